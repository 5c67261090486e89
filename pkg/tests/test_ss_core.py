import numpy as np
import pytest

from robust_observer_hub.core.exceptions import DimensionError, WellPosednessError
from robust_observer_hub.core.plants import build_quaternion
from robust_observer_hub.core.ss_core import (
    IssueKind,
    LftPlant,
    Severity,
    StateSpace,
    UncertaintyStructure,
    build_augmented,
    close_uncertainty,
    closed_error_system,
    freeze_uncertainty,
    spectral_abscissa,
    validate_plant,
)

from .conftest import make_plant


def test_state_space_rejects_non_square_a():
    with pytest.raises(DimensionError):
        StateSpace(np.ones((2, 3)), np.ones((2, 1)), np.ones((1, 3)), np.zeros((1, 1)))


def test_state_space_is_read_only():
    sys = StateSpace([[-1.0]], [[1.0]], [[1.0]], [[0.0]])
    with pytest.raises(ValueError):
        sys.a[0, 0] = 5.0


def test_uncertainty_structure_expand_and_vertices():
    unc = UncertaintyStructure((1, 2))
    delta = unc.expand([0.5, -1.0])
    np.testing.assert_array_equal(np.diag(delta), [0.5, -1.0, -1.0])
    assert unc.total == 3
    assert len(list(unc.vertices())) == 4
    assert [s.stop - s.start for s in unc.slices()] == [1, 2]


def test_uncertainty_structure_rejects_wrong_count():
    with pytest.raises(DimensionError):
        UncertaintyStructure((1, 2)).expand([0.1])


def test_lft_plant_checks_block_total(stable_plant):
    with pytest.raises(DimensionError):
        LftPlant(
            a=stable_plant.a,
            b_p=stable_plant.b_p,
            b_w=stable_plant.b_w,
            c_q=stable_plant.c_q,
            c_z=stable_plant.c_z,
            c_y=stable_plant.c_y,
            d_qp=stable_plant.d_qp,
            d_qw=stable_plant.d_qw,
            d_yp=stable_plant.d_yp,
            d_yw=stable_plant.d_yw,
            unc=UncertaintyStructure((2,)),
        )


def test_build_augmented_shapes_and_damping(stable_plant):
    gain = np.array([[1.0], [0.5]])
    aug = build_augmented(stable_plant, gain, alpha=0.3)
    n = stable_plant.n
    assert aug.n_xi == 2 * n
    assert aug.n_eta == stable_plant.n_p + stable_plant.n_w
    np.testing.assert_allclose(aug.a_aug[:n, :n], stable_plant.a - 0.3 * np.eye(n))
    np.testing.assert_allclose(
        aug.a_aug[n:, n:],
        stable_plant.a - 0.3 * np.eye(n) - gain @ stable_plant.c_y,
    )
    np.testing.assert_array_equal(aug.a_aug[:n, n:], 0.0)


def test_build_augmented_rejects_wrong_gain(stable_plant):
    with pytest.raises(DimensionError):
        build_augmented(stable_plant, np.ones((3, 1)))


def test_close_uncertainty_substitutes_delta(stable_plant):
    closed = close_uncertainty(stable_plant, [0.5])
    expected = stable_plant.a.copy()
    expected[0, 0] += 0.3 * 0.5
    np.testing.assert_allclose(closed.a, expected, atol=1e-14)
    assert closed.n_outputs == stable_plant.n_z + stable_plant.n_y


def test_freeze_uncertainty_with_feedthrough():
    plant = make_plant([[-1.0]])
    plant = LftPlant(
        a=plant.a,
        b_p=plant.b_p,
        b_w=plant.b_w,
        c_q=plant.c_q,
        c_z=plant.c_z,
        c_y=plant.c_y,
        d_qp=[[0.5]],
        d_qw=plant.d_qw,
        d_yp=plant.d_yp,
        d_yw=plant.d_yw,
        unc=plant.unc,
    )
    frozen = freeze_uncertainty(plant, [1.0])
    # p = δ/(1 - 0.5δ)·q при δ = 1 дает коэффициент 2
    np.testing.assert_allclose(frozen.a, [[-1.0 + 0.3 * 2.0]])


def test_well_posedness_violation_raises():
    plant = make_plant([[-1.0]])
    plant = LftPlant(
        a=plant.a,
        b_p=plant.b_p,
        b_w=plant.b_w,
        c_q=plant.c_q,
        c_z=plant.c_z,
        c_y=plant.c_y,
        d_qp=[[1.0]],
        d_qw=plant.d_qw,
        d_yp=plant.d_yp,
        d_yw=plant.d_yw,
        unc=plant.unc,
    )
    with pytest.raises(WellPosednessError):
        close_uncertainty(plant, [1.0])


def test_closed_error_system_decouples_error(stable_plant):
    gain = np.array([[2.0], [0.0]])
    sys = closed_error_system(stable_plant, gain, [0.0])
    n = stable_plant.n
    np.testing.assert_allclose(
        sys.a[n:, n:], stable_plant.a - gain @ stable_plant.c_y
    )
    np.testing.assert_array_equal(sys.d, 0.0)
    np.testing.assert_array_equal(sys.c[:, :n], 0.0)


def test_spectral_abscissa():
    assert spectral_abscissa([[-1.0, 0.0], [0.0, -3.0]]) == pytest.approx(-1.0)
    assert spectral_abscissa([[0.0, 1.0], [-1.0, 0.0]]) == pytest.approx(0.0)


def test_validate_plant_clean(stable_plant):
    assert validate_plant(stable_plant) == []


def test_validate_plant_marginal_warning(skew_plant):
    issues = validate_plant(skew_plant)
    kinds = {(issue.kind, issue.severity) for issue in issues}
    assert (IssueKind.MARGINAL_STABILITY, Severity.WARNING) in kinds
    assert all(issue.kind != IssueKind.DETECTABILITY for issue in issues)


def test_validate_plant_reports_marginal_stability_once():
    issues = validate_plant(build_quaternion())
    assert [(issue.kind, issue.severity) for issue in issues] == [
        (IssueKind.MARGINAL_STABILITY, Severity.WARNING)
    ]


def test_validate_plant_detectability_violation():
    plant = make_plant(np.eye(2))
    plant = LftPlant(
        a=plant.a,
        b_p=plant.b_p,
        b_w=plant.b_w,
        c_q=plant.c_q,
        c_z=plant.c_z,
        c_y=np.zeros((1, 2)),
        d_qp=plant.d_qp,
        d_qw=plant.d_qw,
        d_yp=plant.d_yp,
        d_yw=plant.d_yw,
        unc=plant.unc,
    )
    issues = validate_plant(plant)
    assert any(
        issue.kind == IssueKind.DETECTABILITY and issue.severity == Severity.VIOLATION
        for issue in issues
    )
    assert any(issue.kind == IssueKind.ROBUST_STABILITY for issue in issues)
