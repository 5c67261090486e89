"""
Синтез коэффициента наблюдателя L: номинальная лемма об ограниченной
вещественности, блочно-диагональная постановка с точным восстановлением L,
постановка со слабой переменной G (лемма Финслера) и проверка найденного L
анализом с полной матрицей P.
"""

import math
import time
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np

from robust_observer_hub.infra import Settings
from robust_observer_hub.logging_config import solver_logger as logger
from robust_observer_hub.solver_service import BaseSdpBackend, SolverStatus

from .exceptions import ConfigError, DimensionError, InfeasibleError
from .lmi import (
    ConstraintSense,
    LmiExpression,
    SdpProblem,
    SdpSolution,
    bisect_gamma_squared,
    blocks,
    he,
    solve,
)
from .multipliers import (
    MultiplierSpec,
    MultiplierVars,
    SelectionMatrices,
    make_multiplier_vars,
    supply_matrices,
)
from .ss_core import LftPlant, NominalModel, build_augmented, freeze_uncertainty


class Formulation(StrEnum):
    NOMINAL = "nominal"
    BLKDIAG = "blkdiag"
    FINSLER = "finsler"


class GammaSearch(StrEnum):
    # γ̂ как переменная и цель SDP
    MINIMIZE = "minimize"
    # бисекция по γ̂ с проверкой совместности
    BISECT = "bisect"


class Verdict(StrEnum):
    VALID = "valid"
    INVALID = "invalid"
    INFEASIBLE = "infeasible"
    UNKNOWN = "unknown"


@dataclass
class SynthesisConfig:
    """
    Параметры синтеза.

    Attributes:
        formulation (Formulation): Постановка задачи.
        multiplier (MultiplierSpec or None): Мультипликатор (не нужен для
            номинального синтеза).
        alpha (float): Искусственное демпфирование A → A - αI, α ≥ 0.
        eps_g (float): Запас обратимости G_{22,bot}.
        gamma_search (GammaSearch): Способ минимизации γ̂.
        bisection_tol (float): Относительная точность бисекции.
    """

    formulation: Formulation
    multiplier: MultiplierSpec | None = None
    alpha: float = 0.0
    eps_g: float = field(default_factory=lambda: Settings().EPS_G)
    gamma_search: GammaSearch = GammaSearch.MINIMIZE
    bisection_tol: float = 1e-4

    def __post_init__(self):
        self.formulation = Formulation(self.formulation)
        self.gamma_search = GammaSearch(self.gamma_search)
        if not self.alpha >= 0:
            raise ConfigError(f"α должно быть неотрицательным, получено {self.alpha}")
        if not self.eps_g > 0:
            raise ConfigError(f"ε_G должно быть положительным, получено {self.eps_g}")
        if self.formulation != Formulation.NOMINAL and self.multiplier is None:
            raise ConfigError(
                f"для постановки '{self.formulation}' нужен мультипликатор"
            )


@dataclass
class FinslerDiagnostics:
    """
    Диагностика релаксации: относительные невязки подстановок
    r_i = ‖𝒴_i - G_i2·L‖_F / ‖𝒴_i‖_F и обусловленность G_{22,bot}.
    """

    r1: float
    r2: float
    r3: float
    cond_g22_bot: float


@dataclass
class SynthesisResult:
    """
    Результат синтеза. При статусе `optimal` коэффициент L конечен.
    """

    formulation: Formulation
    status: SolverStatus
    gain: np.ndarray | None = None
    gamma_syn: float = math.nan
    alpha: float = 0.0
    multiplier: str = ""
    certificate: dict[str, np.ndarray] = field(default_factory=dict)
    diagnostics: FinslerDiagnostics | None = None
    message: str = ""
    wall_time: float = 0.0
    solution: SdpSolution | None = field(default=None, repr=False)

    @property
    def is_optimal(self) -> bool:
        return self.status == SolverStatus.OPTIMAL


@dataclass
class VerificationResult:
    """
    Результат анализа с фиксированным L и полной матрицей P.
    """

    status: SolverStatus
    gamma_ver: float = math.nan
    certificate: dict[str, np.ndarray] = field(default_factory=dict)
    message: str = ""
    wall_time: float = 0.0

    @property
    def is_optimal(self) -> bool:
        return self.status == SolverStatus.OPTIMAL


@dataclass
class _Assembly:
    """
    Собранная задача и выражения, из которых восстанавливается решение.
    """

    problem: SdpProblem
    parts: dict[str, LmiExpression]
    multiplier: MultiplierVars | None = None


def _gamma_term(problem: SdpProblem, gamma_sq: float | None):
    if gamma_sq is None:
        return problem.scalar_var()
    return float(gamma_sq)


def _set_objective(problem: SdpProblem, gamma):
    if isinstance(gamma, LmiExpression):
        problem.minimize(gamma, cap=Settings().GAMMA_SQ_CAP)


def _run(
    build: Callable[[float | None], _Assembly],
    search: GammaSearch,
    tol: float,
    backend: BaseSdpBackend | None,
) -> tuple[_Assembly, SdpSolution, float]:
    """
    Решает задачу прямой минимизацией γ̂ или бисекцией и возвращает сборку,
    решение и найденное γ̂.
    """
    if search == GammaSearch.MINIMIZE:
        assembly = build(None)
        solution = solve(assembly.problem, backend)
        return assembly, solution, solution.objective_value

    try:
        result = bisect_gamma_squared(
            lambda gamma_sq: build(gamma_sq).problem, tol=tol, backend=backend
        )
    except InfeasibleError as e:
        assembly = build(Settings().GAMMA_SQ_CAP)
        empty = np.full(assembly.problem.n_vars, np.nan)
        solution = SdpSolution(SolverStatus.INFEASIBLE, empty, message=str(e))
        return assembly, solution, math.nan
    # переменные создаются в одном порядке, поэтому точка подходит новой сборке
    return build(result.gamma_sq), result.solution, result.gamma_sq


def _nominal_model(plant: LftPlant, delta=None) -> NominalModel:
    if delta is None:
        return NominalModel(plant.a, plant.b_w, plant.c_z, plant.c_y, plant.d_yw)
    return freeze_uncertainty(plant, delta)


def _brl_lmi(model: NominalModel, pa, pb, gamma) -> LmiExpression:
    """
    [[He{P·A_e} + C_z^T C_z, P·B_e], [⋆, -γ̂ I]] для системы ошибки
    ė = A_e e + B_e w, z̃ = C_z e.
    """
    n_w = model.b_w.shape[1]
    if isinstance(gamma, LmiExpression):
        performance = -gamma.times(np.eye(n_w))
    else:
        performance = -gamma * np.eye(n_w)
    return blocks([[he(pa) + model.c_z.T @ model.c_z, pb], [pb.T, performance]])


def synth_nominal(
    plant: LftPlant,
    alpha: float = 0.0,
    delta=None,
    gamma_search: GammaSearch = GammaSearch.MINIMIZE,
    backend: BaseSdpBackend | None = None,
) -> SynthesisResult:
    """
    Номинальный синтез по лемме об ограниченной вещественности с заменой
    W = P·L. Каналы неопределённости не используются; при заданном `delta`
    неопределённость замораживается в этой точке.

    Args:
        plant (LftPlant): Модель объекта.
        alpha (float, optional): Демпфирование A → A - αI.
        delta (optional): Точка Δ для замораживания (вектор δ_i или матрица).
        gamma_search (GammaSearch, optional): Способ минимизации γ̂.
        backend (BaseSdpBackend, optional): Решатель SDP.

    Returns:
        SynthesisResult: L = P^{-1}·W и γ_syn.
    """
    model = _nominal_model(plant, delta)
    a = model.a - alpha * np.eye(plant.n)

    def build(gamma_sq: float | None) -> _Assembly:
        problem = SdpProblem()
        p = problem.sym_var(plant.n)
        w = problem.full_var(plant.n, plant.n_y)
        gamma = _gamma_term(problem, gamma_sq)
        pa = p @ a - w @ model.c_y
        pb = p @ model.b_w - w @ model.d_yw
        problem.add_constraint(p, ConstraintSense.POSITIVE, name="P")
        problem.add_constraint(_brl_lmi(model, pa, pb, gamma), name="brl")
        _set_objective(problem, gamma)
        return _Assembly(problem, {"P": p, "W": w})

    start = time.perf_counter()
    assembly, solution, gamma_sq = _run(build, gamma_search, 1e-4, backend)
    result = SynthesisResult(
        Formulation.NOMINAL,
        solution.status,
        alpha=alpha,
        message=solution.message,
        solution=solution,
    )
    if solution.is_optimal:
        p = solution.value(assembly.parts["P"])
        w = solution.value(assembly.parts["W"])
        result.gain = np.linalg.solve(p, w)
        result.gamma_syn = math.sqrt(max(gamma_sq, 0.0))
        result.certificate = {"P": p, "W": w}
    result.wall_time = time.perf_counter() - start
    return result


def _blkdiag_assembly(
    plant: LftPlant, cfg: SynthesisConfig, gamma_sq: float | None
) -> _Assembly:
    n = plant.n
    a = plant.a - cfg.alpha * np.eye(n)
    aug = build_augmented(plant, np.zeros((n, plant.n_y)), cfg.alpha)
    sel = SelectionMatrices.for_plant(plant)

    problem = SdpProblem()
    p11 = problem.sym_var(n)
    p22 = problem.sym_var(n)
    y = problem.full_var(n, plant.n_y)
    multiplier = make_multiplier_vars(problem, cfg.multiplier)
    gamma = _gamma_term(problem, gamma_sq)

    # P·A_aug = blkdiag(P11·A, P22·A - Y·C_y), Y = P22·L
    pa = blocks([[p11 @ a, None], [None, p22 @ a - y @ plant.c_y]])
    pb = blocks(
        [
            [p11 @ plant.b_p, p11 @ plant.b_w],
            [p22 @ plant.b_p - y @ plant.d_yp, p22 @ plant.b_w - y @ plant.d_yw],
        ]
    )
    q22, q23, q33 = supply_matrices(aug, multiplier, gamma, sel)
    lmi = blocks([[he(pa) + q22, pb + q23], [(pb + q23).T, q33]])

    problem.add_constraint(p11, ConstraintSense.POSITIVE, name="P11")
    problem.add_constraint(p22, ConstraintSense.POSITIVE, name="P22")
    problem.add_constraint(lmi, name="dissipation")
    _set_objective(problem, gamma)
    return _Assembly(
        problem, {"P11": p11, "P22": p22, "Y": y, "LMI": lmi}, multiplier
    )


def _multiplier_certificate(assembly: _Assembly, x) -> dict[str, np.ndarray]:
    lam, g = assembly.multiplier.values(x)
    certificate = {"Lambda": lam}
    if g is not None:
        certificate["G_skew"] = g
    return certificate


def synth_blkdiag(
    plant: LftPlant,
    cfg: SynthesisConfig,
    backend: BaseSdpBackend | None = None,
) -> SynthesisResult:
    """
    Синтез с P = blkdiag(P11, P22) и заменой Y = P22·L. Задача аффинна без
    релаксации, поэтому γ_syn сам является сертификатом для
    демпфированной модели.

    Args:
        plant (LftPlant): Модель объекта.
        cfg (SynthesisConfig): Параметры синтеза (постановка blkdiag).
        backend (BaseSdpBackend, optional): Решатель SDP.

    Returns:
        SynthesisResult: L = P22^{-1}·Y и γ_syn.
    """
    start = time.perf_counter()
    assembly, solution, gamma_sq = _run(
        lambda gamma_sq: _blkdiag_assembly(plant, cfg, gamma_sq),
        cfg.gamma_search,
        cfg.bisection_tol,
        backend,
    )
    result = SynthesisResult(
        Formulation.BLKDIAG,
        solution.status,
        alpha=cfg.alpha,
        multiplier=cfg.multiplier.name,
        message=solution.message,
        solution=solution,
    )
    if solution.is_optimal:
        p11 = solution.value(assembly.parts["P11"])
        p22 = solution.value(assembly.parts["P22"])
        y = solution.value(assembly.parts["Y"])
        result.gain = np.linalg.solve(p22, y)
        result.gamma_syn = math.sqrt(max(gamma_sq, 0.0))
        result.certificate = {
            "P11": p11,
            "P22": p22,
            "Y": y,
            **_multiplier_certificate(assembly, solution.values),
        }
    result.wall_time = time.perf_counter() - start
    return result


def _finsler_assembly(
    plant: LftPlant, cfg: SynthesisConfig, gamma_sq: float | None
) -> _Assembly:
    n = plant.n
    a = plant.a - cfg.alpha * np.eye(n)
    aug = build_augmented(plant, np.zeros((n, plant.n_y)), cfg.alpha)
    sel = SelectionMatrices.for_plant(plant)
    n_xi, n_eta = 2 * n, plant.n_p + plant.n_w
    n_nu = 2 * n_xi + n_eta

    problem = SdpProblem()
    p = problem.sym_var(n_xi)
    # G = [G1; G2; G3], ν = [ξ̇; ξ; η]
    g = problem.full_var(n_nu, n_xi)
    # 𝒴-переменные на месте G_i2·L во всех трёх блочных строках
    ys = problem.full_var(n_nu, plant.n_y)
    multiplier = make_multiplier_vars(problem, cfg.multiplier)
    gamma = _gamma_term(problem, gamma_sq)

    g_1, g_2 = g[:, :n], g[:, n:]
    # G·A_aug = [G_·1·A, G_·2·A - 𝒴·C_y]
    ga = blocks([[g_1 @ a, g_2 @ a - ys @ plant.c_y]])
    # G·B_aug = [(G_·1 + G_·2)·B_p - 𝒴·D_yp, (G_·1 + G_·2)·B_w - 𝒴·D_yw]
    g_sum = g_1 + g_2
    gb = blocks(
        [
            [
                g_sum @ plant.b_p - ys @ plant.d_yp,
                g_sum @ plant.b_w - ys @ plant.d_yw,
            ]
        ]
    )
    # X = G·[I, -A_aug, -B_aug]
    x = blocks([[g, -ga, -gb]])

    q22, q23, q33 = supply_matrices(aug, multiplier, gamma, sel)
    q = blocks(
        [
            [np.zeros((n_xi, n_xi)), p, np.zeros((n_xi, n_eta))],
            [p, q22, q23],
            [np.zeros((n_eta, n_xi)), q23.T, q33],
        ]
    )
    lmi = q + he(x)

    bottom = slice(n_xi + n, 2 * n_xi)
    g22_bot = g[bottom, n:]

    problem.add_constraint(p, ConstraintSense.POSITIVE, name="P")
    problem.add_constraint(
        he(g22_bot), ConstraintSense.NEGATIVE, margin=cfg.eps_g, name="G22_bot"
    )
    problem.add_constraint(lmi, name="finsler")
    _set_objective(problem, gamma)
    return _Assembly(
        problem, {"P": p, "G": g, "Ys": ys, "LMI": lmi}, multiplier
    )


def _relative_gap(target: np.ndarray, estimate: np.ndarray) -> float:
    scale = np.linalg.norm(target, "fro")
    gap = np.linalg.norm(target - estimate, "fro")
    if scale == 0:
        return float(gap)
    return float(gap / scale)


def finsler_diagnostics(
    plant: LftPlant, g: np.ndarray, ys: np.ndarray, gain: np.ndarray
) -> FinslerDiagnostics:
    """
    Невязки подстановок 𝒴_i ≈ G_i2·L по блочным строкам G1, G2, G3 и число
    обусловленности G_{22,bot}.
    """
    n, n_xi = plant.n, 2 * plant.n
    rows = (slice(0, n_xi), slice(n_xi, 2 * n_xi), slice(2 * n_xi, None))
    r1, r2, r3 = (
        _relative_gap(ys[block], g[block, n:] @ gain) for block in rows
    )
    cond = float(np.linalg.cond(g[n_xi + n : 2 * n_xi, n:]))
    return FinslerDiagnostics(r1, r2, r3, cond)


def synth_finsler(
    plant: LftPlant,
    cfg: SynthesisConfig,
    backend: BaseSdpBackend | None = None,
) -> SynthesisResult:
    """
    Синтез через лемму Финслера: полная P ≻ 0, слабая переменная G и
    независимые 𝒴-переменные вместо билинейных произведений G_i2·L.
    Коэффициент L = G_{22,bot}^{-1}·𝒴_bot. γ_syn может быть оптимистичным,
    его подтверждает `verify`.

    Args:
        plant (LftPlant): Модель объекта.
        cfg (SynthesisConfig): Параметры синтеза (постановка finsler).
        backend (BaseSdpBackend, optional): Решатель SDP.

    Returns:
        SynthesisResult: L, γ_syn и невязки r1, r2, r3.
    """
    start = time.perf_counter()
    assembly, solution, gamma_sq = _run(
        lambda gamma_sq: _finsler_assembly(plant, cfg, gamma_sq),
        cfg.gamma_search,
        cfg.bisection_tol,
        backend,
    )
    result = SynthesisResult(
        Formulation.FINSLER,
        solution.status,
        alpha=cfg.alpha,
        multiplier=cfg.multiplier.name,
        message=solution.message,
        solution=solution,
    )
    if solution.is_optimal:
        n, n_xi = plant.n, 2 * plant.n
        p = solution.value(assembly.parts["P"])
        g = solution.value(assembly.parts["G"])
        ys = solution.value(assembly.parts["Ys"])
        bottom = slice(n_xi + n, 2 * n_xi)
        gain = np.linalg.solve(g[bottom, n:], ys[bottom])
        result.gain = gain
        result.gamma_syn = math.sqrt(max(gamma_sq, 0.0))
        result.diagnostics = finsler_diagnostics(plant, g, ys, gain)
        result.certificate = {
            "P": p,
            "G": g,
            "Ys": ys,
            **_multiplier_certificate(assembly, solution.values),
        }
        logger.info(
            f"finsler: r1={result.diagnostics.r1:.3e} "
            f"r2={result.diagnostics.r2:.3e} r3={result.diagnostics.r3:.3e} "
            f"cond={result.diagnostics.cond_g22_bot:.3e}"
        )
    result.wall_time = time.perf_counter() - start
    return result


def analysis_lmi(
    plant: LftPlant,
    gain: np.ndarray,
    alpha: float,
    p,
    multiplier: MultiplierVars,
    gamma_sq,
) -> LmiExpression:
    """
    Матрица анализа [[He{P·A_aug} + Q22, P·B_aug + Q23], [⋆, Q33]] при
    фиксированном L. Аргументы P, Λ, 𝒢, γ̂ могут быть переменными или
    числами.
    """
    aug = build_augmented(plant, gain, alpha)
    sel = SelectionMatrices.for_plant(plant)
    p = LmiExpression.coerce(p)
    q22, q23, q33 = supply_matrices(aug, multiplier, gamma_sq, sel)
    pb = p @ aug.b_aug + q23
    return blocks([[he(p @ aug.a_aug) + q22, pb], [pb.T, q33]])


def verify(
    plant: LftPlant,
    gain,
    multiplier: MultiplierSpec | None,
    alpha: float = 0.0,
    delta=None,
    backend: BaseSdpBackend | None = None,
) -> VerificationResult:
    """
    Проверяет коэффициент L: с фиксированным L неравенство диссипации аффинно
    по полной P ≻ 0, Λ, 𝒢 и γ̂, поэтому найденный γ_ver является строгим
    сертификатом для демпфированной модели. Без мультипликатора выполняется
    номинальный анализ по лемме об ограниченной вещественности.

    Args:
        plant (LftPlant): Модель объекта.
        gain: Коэффициент L размера n×n_y.
        multiplier (MultiplierSpec or None): Мультипликатор.
        alpha (float, optional): Демпфирование A → A - αI.
        delta (optional): Точка замораживания для номинального анализа.
        backend (BaseSdpBackend, optional): Решатель SDP.

    Raises:
        DimensionError: Если L имеет неверный размер.
        ConfigError: Если L содержит неконечные элементы.

    Returns:
        VerificationResult: γ_ver и сертификат.
    """
    gain = np.atleast_2d(np.asarray(gain, dtype=float))
    if gain.shape != (plant.n, plant.n_y):
        raise DimensionError("L", (plant.n, plant.n_y), gain.shape)
    if not np.all(np.isfinite(gain)):
        raise ConfigError("коэффициент L содержит неконечные элементы")

    start = time.perf_counter()
    problem = SdpProblem()
    gamma = problem.scalar_var()

    if multiplier is None:
        model = _nominal_model(plant, delta)
        a_e = model.a - alpha * np.eye(plant.n) - gain @ model.c_y
        b_e = model.b_w - gain @ model.d_yw
        p = problem.sym_var(plant.n)
        variables = None
        lmi = _brl_lmi(model, p @ a_e, p @ b_e, gamma)
    else:
        p = problem.sym_var(2 * plant.n)
        variables = make_multiplier_vars(problem, multiplier)
        lmi = analysis_lmi(plant, gain, alpha, p, variables, gamma)

    problem.add_constraint(p, ConstraintSense.POSITIVE, name="P")
    problem.add_constraint(lmi, name="analysis")
    problem.minimize(gamma, cap=Settings().GAMMA_SQ_CAP)
    solution = solve(problem, backend)

    result = VerificationResult(solution.status, message=solution.message)
    if solution.is_optimal:
        result.gamma_ver = math.sqrt(max(solution.objective_value, 0.0))
        result.certificate = {"P": solution.value(p)}
        if variables is not None:
            lam, g = variables.values(solution.values)
            result.certificate["Lambda"] = lam
            if g is not None:
                result.certificate["G_skew"] = g
    result.wall_time = time.perf_counter() - start
    return result


def certificate_verdict(
    synthesis: SynthesisResult,
    verification: VerificationResult,
    tolerance: float | None = None,
) -> Verdict:
    """
    Сертификат действителен, если γ_ver ≤ (1 + tolerance)·γ_syn.
    """
    tolerance = Settings().VERIFICATION_TOLERANCE if tolerance is None else tolerance
    if synthesis.status == SolverStatus.INFEASIBLE:
        return Verdict.INFEASIBLE
    if not synthesis.is_optimal:
        return Verdict.UNKNOWN
    if not verification.is_optimal:
        return Verdict.INVALID
    if verification.gamma_ver <= (1.0 + tolerance) * synthesis.gamma_syn:
        return Verdict.VALID
    return Verdict.INVALID


def synthesize(
    plant: LftPlant,
    cfg: SynthesisConfig,
    delta=None,
    backend: BaseSdpBackend | None = None,
) -> SynthesisResult:
    """
    Выбирает синтезатор по постановке из конфигурации.
    """
    match cfg.formulation:
        case Formulation.NOMINAL:
            return synth_nominal(plant, cfg.alpha, delta, cfg.gamma_search, backend)
        case Formulation.BLKDIAG:
            return synth_blkdiag(plant, cfg, backend)
        case Formulation.FINSLER:
            return synth_finsler(plant, cfg, backend)
