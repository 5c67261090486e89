import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import StrEnum

import cvxpy as cp
import numpy as np
from scipy import sparse

from robust_observer_hub.logging_config import solver_logger as logger

from .config import SolverConfig


class SolverStatus(StrEnum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class CanonicalBlock:
    """
    Ограничение F0 + Σ x_k·F_k ⪰ 0 с симметричными матрицами одного размера.
    """

    name: str
    constant: np.ndarray
    coefficients: dict[int, np.ndarray]

    @property
    def size(self) -> int:
        return self.constant.shape[0]


@dataclass(frozen=True)
class CanonicalSdp:
    """
    Задача SDP в стандартной форме: минимизировать c^T x при ограничениях
    F0_j + Σ x_k·F_{j,k} ⪰ 0 для каждого блока j.
    """

    n_vars: int
    objective: np.ndarray
    blocks: list[CanonicalBlock] = field(default_factory=list)


@dataclass
class BackendResult:
    """
    Ответ решателя. Значения переменных отсутствуют, если решение не найдено.
    """

    status: SolverStatus
    values: np.ndarray | None = None
    solver: str = ""
    message: str = ""
    wall_time: float = 0.0


class BaseSdpBackend(ABC):
    """
    Базовый класс решателя SDP. Вызов синхронный и не хранит состояние между
    задачами, поэтому решатели взаимозаменяемы.
    """

    def __init__(self, name: str):
        self.config = SolverConfig()
        self.name = name

    @abstractmethod
    def solve(self, sdp: CanonicalSdp) -> BackendResult:
        """
        Решает задачу SDP в стандартной форме.

        Args:
            sdp (CanonicalSdp): Задача в стандартной форме.

        Returns:
            BackendResult: Статус и найденная точка. Сбои решателя не
            выбрасываются наружу, а возвращаются со статусом `unknown`.
        """
        return BackendResult(SolverStatus.UNKNOWN)


class CvxpyBackend(BaseSdpBackend):
    """
    Решатель на основе cvxpy. Решатели перебираются по порядку из конфигурации,
    пока один из них не вернёт определённый статус.
    """

    def __init__(self, solvers: tuple[str, ...] | None = None):
        super().__init__("cvxpy")
        self.solvers = solvers or self.config.solvers

    def _solver_options(self, solver: str) -> dict:
        tolerance = self.config.TOLERANCE
        match solver:
            case "CLARABEL":
                return {
                    "tol_gap_abs": tolerance,
                    "tol_gap_rel": tolerance,
                    "tol_feas": tolerance,
                }
            case "SCS":
                return {
                    "eps_abs": tolerance,
                    "eps_rel": tolerance,
                    "max_iters": self.config.MAX_ITERS,
                }
            case _:
                return {}

    @staticmethod
    def _build(sdp: CanonicalSdp) -> tuple[cp.Problem, cp.Variable]:
        x = cp.Variable(max(sdp.n_vars, 1))
        constraints = []

        for block in sdp.blocks:
            m = block.size
            affine = cp.Constant(block.constant)
            ids = sorted(block.coefficients)
            if ids:
                basis = sparse.csc_matrix(
                    np.column_stack(
                        [block.coefficients[k].ravel(order="F") for k in ids]
                    )
                )
                affine = affine + cp.reshape(basis @ x[ids], (m, m), order="F")
            # Симметричная переменная фиксирует, что конус PSD берётся от
            # симметричной матрицы
            slack = cp.Variable((m, m), symmetric=True)
            constraints += [slack == affine, slack >> 0]

        c = np.zeros(max(sdp.n_vars, 1))
        c[: sdp.n_vars] = sdp.objective
        return cp.Problem(cp.Minimize(c @ x), constraints), x

    def solve(self, sdp: CanonicalSdp) -> BackendResult:
        problem, x = self._build(sdp)
        installed = set(cp.installed_solvers())
        messages = []

        for solver in self.solvers:
            if solver not in installed:
                logger.warning(f"Решатель {solver} не установлен, пропускаем.")
                messages.append(f"{solver}: не установлен")
                continue

            start = time.perf_counter()
            try:
                problem.solve(
                    solver=solver,
                    verbose=self.config.VERBOSE,
                    **self._solver_options(solver),
                )
            except cp.error.SolverError as e:
                logger.warning(f"Решатель {solver} завершился с ошибкой: {e}")
                messages.append(f"{solver}: {e}")
                continue
            wall_time = time.perf_counter() - start

            logger.info(
                f"solver={solver} status={problem.status} "
                f"blocks={len(sdp.blocks)} vars={sdp.n_vars} "
                f"time={wall_time:.3f}s"
            )

            match problem.status:
                case cp.OPTIMAL | cp.OPTIMAL_INACCURATE:
                    values = np.asarray(x.value, dtype=float)[: sdp.n_vars]
                    return BackendResult(
                        SolverStatus.OPTIMAL,
                        values,
                        solver,
                        str(problem.status),
                        wall_time,
                    )
                case cp.INFEASIBLE | cp.INFEASIBLE_INACCURATE:
                    return BackendResult(
                        SolverStatus.INFEASIBLE,
                        None,
                        solver,
                        str(problem.status),
                        wall_time,
                    )
                case status:
                    messages.append(f"{solver}: {status}")

        return BackendResult(SolverStatus.UNKNOWN, message="; ".join(messages))


def get_backend(solvers: tuple[str, ...] | None = None) -> BaseSdpBackend:
    """
    Возвращает решатель SDP с порядком попыток из конфигурации или из
    переданного списка.
    """
    return CvxpyBackend(solvers)
