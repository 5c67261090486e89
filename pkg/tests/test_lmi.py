import numpy as np
import pytest

from robust_observer_hub.core.exceptions import DimensionError, InfeasibleError
from robust_observer_hub.core.lmi import (
    ConstraintSense,
    LmiExpression,
    SdpProblem,
    VarKind,
    bisect_gamma_squared,
    block_diag,
    blocks,
    congruence,
    he,
    solve,
)
from robust_observer_hub.solver_service import (
    BackendResult,
    BaseSdpBackend,
    SolverStatus,
)


class StubBackend(BaseSdpBackend):
    """Решатель с заранее заданным ответом."""

    def __init__(self, status, values=None):
        super().__init__("stub")
        self.result = BackendResult(status, values, "stub")
        self.calls = 0

    def solve(self, sdp):
        self.calls += 1
        return self.result


def test_sym_var_structure():
    problem = SdpProblem()
    p = problem.sym_var(3)
    assert p.kind == VarKind.SYMMETRIC
    assert len(p.handles) == 6
    value = p.value(np.arange(1.0, 7.0))
    np.testing.assert_array_equal(value, value.T)


def test_skew_var_has_zero_diagonal():
    problem = SdpProblem()
    g = problem.skew_var(3)
    assert len(g.handles) == 3
    value = g.value(np.array([1.0, 2.0, 3.0]))
    np.testing.assert_array_equal(value, -value.T)
    np.testing.assert_array_equal(np.diag(value), 0.0)


def test_block_scalar_var_repeats_scalar():
    problem = SdpProblem()
    lam = problem.block_scalar_var((1, 2))
    assert lam.kind == VarKind.DIAGONAL_REPEATED
    assert len(lam.handles) == 2
    np.testing.assert_array_equal(lam.value([2.0, 5.0]), np.diag([2.0, 5.0, 5.0]))


def test_block_skew_var_skips_scalar_blocks():
    problem = SdpProblem()
    g = problem.block_skew_var((1, 2, 2))
    assert len(g.handles) == 2
    value = g.value([1.0, -3.0])
    assert value[0, :].tolist() == [0.0] * 5
    assert value[1, 2] == 1.0 and value[2, 1] == -1.0
    assert value[3, 4] == -3.0


def test_expression_algebra():
    problem = SdpProblem()
    p = problem.sym_var(2)
    a = np.array([[0.0, 1.0], [-2.0, -3.0]])
    x = np.array([1.0, 0.5, 2.0])
    p_value = p.value(x)

    np.testing.assert_allclose(he(p @ a).evaluate(x), p_value @ a + a.T @ p_value)
    np.testing.assert_allclose((a.T @ p).evaluate(x), a.T @ p_value)
    np.testing.assert_allclose(congruence(p, a).evaluate(x), a.T @ p_value @ a)
    np.testing.assert_allclose(
        (2.0 * p - np.eye(2)).evaluate(x), 2 * p_value - np.eye(2)
    )
    np.testing.assert_allclose(p[0:1, :].evaluate(x), p_value[0:1, :])


def test_expression_shape_mismatch():
    problem = SdpProblem()
    with pytest.raises(DimensionError):
        problem.sym_var(2) + np.eye(3)


def test_blocks_infers_zero_blocks():
    problem = SdpProblem()
    p = problem.sym_var(2)
    expr = blocks([[p, None], [None, -np.eye(1)]])
    assert expr.shape == (3, 3)
    value = expr.evaluate([1.0, 0.0, 1.0])
    np.testing.assert_array_equal(value, np.diag([1.0, 1.0, -1.0]))

    diag = block_diag(p, np.eye(1))
    assert diag.shape == (3, 3)


def test_blocks_rejects_undetermined_sizes():
    with pytest.raises(DimensionError):
        blocks([[None, np.eye(1)], [None, np.eye(1)]])


def test_add_constraint_rejects_foreign_variables():
    other = SdpProblem()
    other.sym_var(3)
    foreign = other.sym_var(1)
    problem = SdpProblem()
    with pytest.raises(DimensionError):
        problem.add_constraint(foreign)


def test_strict_margin_scales_with_constant():
    problem = SdpProblem(eps_feas=1e-3)
    p = problem.sym_var(1)
    constraint = problem.add_constraint(p - 4.0 * np.eye(1))
    assert constraint.margin == pytest.approx(1e-3 * 5.0)


def test_solve_lyapunov_inequality():
    problem = SdpProblem()
    p = problem.sym_var(2)
    a = np.array([[-1.0, 2.0], [0.0, -3.0]])
    problem.add_constraint(p - np.eye(2), ConstraintSense.POSITIVE, margin=0.0)
    problem.add_constraint(he(p @ a))
    problem.minimize(LmiExpression(np.zeros((1, 1)), {0: np.ones((1, 1))}))
    solution = solve(problem)

    assert solution.is_optimal
    p_value = solution.value(p)
    assert np.linalg.eigvalsh(p_value @ a + a.T @ p_value).max() <= 1e-6
    assert np.linalg.eigvalsh(p_value).min() >= 1.0 - 1e-6


def test_solve_detects_infeasibility():
    problem = SdpProblem()
    p = problem.sym_var(2)
    a = np.array([[0.0, 1.0], [-1.0, 0.0]])
    problem.add_constraint(p, ConstraintSense.POSITIVE)
    # след He{PA} тождественно равен нулю
    problem.add_constraint(he(p @ a), margin=1.0)
    assert solve(problem).status == SolverStatus.INFEASIBLE


def test_solve_reclassifies_constraint_violation():
    problem = SdpProblem()
    p = problem.sym_var(1)
    problem.add_constraint(p - np.eye(1), ConstraintSense.POSITIVE)
    backend = StubBackend(SolverStatus.OPTIMAL, np.array([0.0]))
    solution = solve(problem, backend)
    assert solution.status == SolverStatus.INFEASIBLE
    assert solution.max_constraint_violation == pytest.approx(1.0)


def test_solve_scales_residual_with_constraint_norm():
    problem = SdpProblem()
    p = problem.sym_var(1)
    problem.add_constraint(p - 1e6 * np.eye(1), ConstraintSense.POSITIVE, margin=0.0)
    # нарушение 1e-2 при масштабе 1e6 - шум решателя
    backend = StubBackend(SolverStatus.OPTIMAL, np.array([1e6 - 1e-2]))
    solution = solve(problem, backend)
    assert solution.status == SolverStatus.OPTIMAL
    assert solution.max_constraint_violation == pytest.approx(1e-2)

    small = SdpProblem()
    q = small.sym_var(1)
    small.add_constraint(q - np.eye(1), ConstraintSense.POSITIVE, margin=0.0)
    backend = StubBackend(SolverStatus.OPTIMAL, np.array([1.0 - 1e-2]))
    assert solve(small, backend).status == SolverStatus.INFEASIBLE


def test_solve_reclassifies_objective_cap():
    problem = SdpProblem()
    gamma = problem.scalar_var()
    problem.minimize(gamma, cap=10.0)
    backend = StubBackend(SolverStatus.OPTIMAL, np.array([10.0]))
    assert solve(problem, backend).status == SolverStatus.INFEASIBLE


def test_solve_passes_unknown_status():
    problem = SdpProblem()
    problem.sym_var(1)
    backend = StubBackend(SolverStatus.UNKNOWN)
    solution = solve(problem, backend)
    assert solution.status == SolverStatus.UNKNOWN
    assert np.all(np.isnan(solution.values))


def _threshold_problem(gamma_sq: float) -> SdpProblem:
    # совместна при γ² ≥ 2
    problem = SdpProblem()
    p = problem.sym_var(1)
    problem.add_constraint(p - np.eye(1), ConstraintSense.POSITIVE, margin=0.0)
    problem.add_constraint(2.0 * p - gamma_sq * np.eye(1), margin=0.0)
    return problem


def test_bisect_gamma_squared_finds_threshold():
    result = bisect_gamma_squared(_threshold_problem, bracket=(0.0, 16.0), tol=1e-5)
    assert result.gamma_sq == pytest.approx(2.0, rel=1e-3)
    assert result.gamma == pytest.approx(np.sqrt(2.0), rel=1e-3)
    assert result.solution.is_optimal
    assert result.iterations == len(result.history)


def test_bisect_gamma_squared_infeasible_top():
    with pytest.raises(InfeasibleError):
        bisect_gamma_squared(_threshold_problem, bracket=(0.0, 1.0))


def test_dump_writes_sdpa(tmp_path):
    problem = SdpProblem()
    p = problem.sym_var(2)
    problem.add_constraint(p, ConstraintSense.POSITIVE, name="P")
    problem.minimize(LmiExpression(np.zeros((1, 1)), {0: np.ones((1, 1))}))
    path = tmp_path / "problem.dat-s"
    problem.dump(str(path))

    lines = [line for line in path.read_text().splitlines() if not line.startswith("*")]
    assert lines[0] == "3"
    assert lines[1] == "1"
    assert lines[2] == "2"
