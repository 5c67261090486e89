import numpy as np
import pytest

from robust_observer_hub.solver_service import (
    CanonicalBlock,
    CanonicalSdp,
    SolverStatus,
    get_backend,
)
from robust_observer_hub.solver_service.config import SolverConfig


def scalar_block(name: str, constant: float, coefficient: float) -> CanonicalBlock:
    return CanonicalBlock(name, np.array([[constant]]), {0: np.array([[coefficient]])})


def test_solver_order_without_duplicates():
    config = SolverConfig(SOLVER="scs", FALLBACK_SOLVERS=("CLARABEL", "SCS"))
    assert config.solvers == ("SCS", "CLARABEL")


def test_backend_solves_scalar_problem():
    sdp = CanonicalSdp(1, np.array([1.0]), [scalar_block("x >= 2", -2.0, 1.0)])
    result = get_backend().solve(sdp)
    assert result.status == SolverStatus.OPTIMAL
    assert result.values[0] == pytest.approx(2.0, abs=1e-5)
    assert result.solver in SolverConfig().solvers


def test_backend_reports_infeasibility():
    sdp = CanonicalSdp(
        1,
        np.zeros(1),
        [scalar_block("x >= 0", 0.0, 1.0), scalar_block("x <= -1", -1.0, -1.0)],
    )
    assert get_backend().solve(sdp).status == SolverStatus.INFEASIBLE


def test_backend_skips_missing_solvers():
    sdp = CanonicalSdp(1, np.array([1.0]), [scalar_block("x >= 0", 0.0, 1.0)])
    result = get_backend(("NO_SUCH_SOLVER",)).solve(sdp)
    assert result.status == SolverStatus.UNKNOWN
    assert "NO_SUCH_SOLVER" in result.message
