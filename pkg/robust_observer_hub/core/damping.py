"""
Поиск параметра искусственного демпфирования α: бисекция по совместности
и метод золотого сечения по фактическому качеству.
"""

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np

from robust_observer_hub.infra import Settings
from robust_observer_hub.logging_config import solver_logger as logger
from robust_observer_hub.solver_service import SolverStatus

from .analysis import validate_certificate
from .exceptions import ConfigError, DampingSearchError, InfeasibleError
from .ss_core import LftPlant
from .synthesis import SynthesisResult

INV_GOLDEN_RATIO = (math.sqrt(5.0) - 1.0) / 2.0


class DampingObjective(StrEnum):
    GAMMA_ACTUAL = "gamma_actual"
    GAMMA_CERT = "gamma_cert"


@dataclass(frozen=True)
class DampingSearchConfig:
    """
    Параметры поиска α.

    Attributes:
        alpha_max (float): Верхняя граница интервала поиска.
        tol_alpha (float): Точность по α.
        objective (DampingObjective): Минимизируемая величина.
    """

    alpha_max: float = 1.0
    tol_alpha: float = 1e-3
    objective: DampingObjective = DampingObjective.GAMMA_ACTUAL

    def __post_init__(self):
        if not self.alpha_max > 0:
            raise ConfigError("alpha_max должен быть положительным")
        if not self.tol_alpha > 0:
            raise ConfigError("tol_alpha должен быть положительным")
        object.__setattr__(self, "objective", DampingObjective(self.objective))


@dataclass
class DampingSample:
    """
    Одна точка поиска: статус синтеза, γ_cert и γ_actual. Значение цели
    равно +∞, если синтез несовместен.
    """

    alpha: float
    status: SolverStatus
    gamma_cert: float = math.nan
    gamma_actual: float = math.nan
    value: float = math.inf


@dataclass
class DampingResult:
    alpha_star: float
    gamma_actual_star: float
    alpha_min: float
    trace: list[DampingSample] = field(default_factory=list)

    def rows(self) -> tuple[list[str], list[list]]:
        columns = ["alpha", "status", "gamma_cert", "gamma_actual"]
        rows = [
            [s.alpha, str(s.status), s.gamma_cert, s.gamma_actual] for s in self.trace
        ]
        return columns, rows


def find_alpha_min(
    synth: Callable[[float], SynthesisResult], cfg: DampingSearchConfig
) -> float:
    """
    Бисекцией по совместности находит наименьшее α ∈ [0, alpha_max], при
    котором синтез совместен, с точностью tol_alpha.

    Args:
        synth: Функция α ↦ SynthesisResult.
        cfg (DampingSearchConfig): Параметры поиска.

    Raises:
        DampingSearchError: Если синтез несовместен при alpha_max.

    Returns:
        float: α_min.
    """
    top = synth(cfg.alpha_max)
    if not top.is_optimal:
        raise DampingSearchError(cfg.alpha_max, top.status)
    if synth(0.0).is_optimal:
        return 0.0

    lo, hi = 0.0, cfg.alpha_max
    while hi - lo > cfg.tol_alpha:
        middle = 0.5 * (lo + hi)
        if synth(middle).is_optimal:
            hi = middle
        else:
            lo = middle
        logger.info(f"damping bisection: [{lo:.6g}, {hi:.6g}]")
    return hi


def _as_sample(alpha: float, value) -> DampingSample:
    if isinstance(value, DampingSample):
        return value
    return DampingSample(
        alpha, SolverStatus.OPTIMAL, gamma_actual=float(value), value=float(value)
    )


def optimize_alpha(
    synth: Callable[[float], SynthesisResult],
    evaluator: Callable[[float], DampingSample | float],
    cfg: DampingSearchConfig,
    alpha_min: float | None = None,
) -> DampingResult:
    """
    Минимизирует цель методом золотого сечения на [α_min, alpha_max].
    Предполагается унимодальность; трасса всех вычислений возвращается, чтобы
    её нарушение было видно.

    Args:
        synth: Функция α ↦ SynthesisResult (для поиска α_min).
        evaluator: Функция α ↦ DampingSample или число (значение цели).
        cfg (DampingSearchConfig): Параметры поиска.
        alpha_min (float, optional): Нижняя граница; если не задана,
            находится функцией `find_alpha_min`.

    Returns:
        DampingResult: Лучшее α, его γ_actual и трасса вычислений.
    """
    if alpha_min is None:
        alpha_min = find_alpha_min(synth, cfg)
    trace = []

    def evaluate(alpha: float) -> DampingSample:
        try:
            sample = _as_sample(alpha, evaluator(alpha))
        except InfeasibleError:
            sample = DampingSample(alpha, SolverStatus.INFEASIBLE)
        trace.append(sample)
        return sample

    a, b = alpha_min, cfg.alpha_max
    c = b - INV_GOLDEN_RATIO * (b - a)
    d = a + INV_GOLDEN_RATIO * (b - a)
    fc, fd = evaluate(c), evaluate(d)

    while b - a > cfg.tol_alpha:
        if fc.value <= fd.value:
            b, d, fd = d, c, fc
            c = b - INV_GOLDEN_RATIO * (b - a)
            fc = evaluate(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_GOLDEN_RATIO * (b - a)
            fd = evaluate(d)

    best = min(trace, key=lambda sample: sample.value)
    return DampingResult(best.alpha, best.gamma_actual, alpha_min, trace)


def make_damping_evaluator(
    plant: LftPlant,
    synth: Callable[[float], SynthesisResult],
    objective: DampingObjective = DampingObjective.GAMMA_ACTUAL,
    n_samples: int | None = None,
    actual_shift: float = 0.0,
    seed: int | None = None,
) -> Callable[[float], DampingSample]:
    """
    Создаёт функцию α ↦ DampingSample: синтезирует L при α и вычисляет
    γ_actual как худшую H∞ норму по вершинам и случайным замороженным Δ.
    По умолчанию норма считается на недемпфированном объекте
    (`actual_shift` = 0); неограниченные нормы дают γ_actual = +∞.
    """
    settings = Settings()
    n_samples = settings.SCREENING_SAMPLES if n_samples is None else n_samples
    n_samples += 2**plant.unc.n_blocks

    def evaluate(alpha: float) -> DampingSample:
        result = synth(alpha)
        if not result.is_optimal:
            return DampingSample(alpha, result.status)
        report = validate_certificate(
            plant, result.gain, result.gamma_syn, n_samples, actual_shift, seed
        )
        gamma_actual = report.worst if np.isfinite(report.worst) else math.inf
        match objective:
            case DampingObjective.GAMMA_ACTUAL:
                value = gamma_actual
            case DampingObjective.GAMMA_CERT:
                value = result.gamma_syn
        return DampingSample(
            alpha, result.status, result.gamma_syn, gamma_actual, value
        )

    return evaluate
