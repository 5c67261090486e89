import numpy as np
import pytest

from robust_observer_hub.core.utils import (
    MaxWidth,
    format_gamma,
    format_matrix,
    relative_deviation,
)


def test_max_width_accepts_arrays():
    width = MaxWidth(lambda v: f"{v:.6g}", np.array([1.0, -12.5, 0.25]))
    assert int(width) == len("-12.5")
    assert int(MaxWidth(str, np.array([]))) == 0


def test_format_matrix_aligns_columns():
    text = format_matrix(np.array([[1.0, -12.5], [0.25, 3.0]]), indent="")
    assert text.splitlines() == ["    1 -12.5", " 0.25     3"]


def test_format_gamma_missing_values():
    assert format_gamma(None, 4) == "   -"
    assert format_gamma(float("nan")) == "-"
    assert format_gamma(0.0070) == "0.007"


def test_relative_deviation():
    assert relative_deviation(0.525, 0.5) == pytest.approx(0.05)
    assert relative_deviation(0.01, 0.0) == pytest.approx(0.01)
