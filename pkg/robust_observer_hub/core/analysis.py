"""
H∞ норма, проверка сертификатов на замороженных Δ и диагностика
устойчивости.
"""

import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from robust_observer_hub.infra import Settings

from .exceptions import UnboundedNormError, UserError
from .multipliers import multiplier_matrix
from .sim import rk4_step
from .ss_core import (
    STABILITY_TOL,
    LftPlant,
    StateSpace,
    build_augmented,
    closed_error_system,
    spectral_abscissa,
)
from .utils import make_rng

# Относительный допуск на вещественную часть собственных чисел гамильтониана
IMAGINARY_AXIS_TOL = 1e-8
SWEEP_POINTS = 2000


def _check_hurwitz(a: np.ndarray):
    abscissa = spectral_abscissa(a)
    scale = max(1.0, float(np.linalg.norm(a, 2)))
    if abscissa >= -STABILITY_TOL * scale:
        raise UnboundedNormError(abscissa)


def frequency_gain(sys: StateSpace, omega: float) -> float:
    """σ_max(C(jωI - A)^{-1}B + D)."""
    resolvent = np.linalg.solve(
        1j * omega * np.eye(sys.n_states) - sys.a, sys.b.astype(complex)
    )
    return float(np.linalg.svd(sys.c @ resolvent + sys.d, compute_uv=False)[0])


def _frequency_grid(sys: StateSpace, n_points: int) -> np.ndarray:
    magnitudes = np.abs(np.linalg.eigvals(sys.a))
    magnitudes = magnitudes[magnitudes > 0]
    lo = magnitudes.min() if magnitudes.size else 1.0
    hi = magnitudes.max() if magnitudes.size else 1.0
    grid = np.logspace(np.floor(np.log10(lo)) - 2, np.ceil(np.log10(hi)) + 2, n_points)
    return np.concatenate(([0.0], grid))


def peak_gain_sweep(
    sys: StateSpace, n_points: int = SWEEP_POINTS
) -> tuple[float, float]:
    """
    Пиковое значение σ_max(G(jω)) на логарифмической сетке частот
    (включая ω = 0), охватывающей модули собственных чисел A с запасом в две
    декады.

    Raises:
        UnboundedNormError: Если A не гурвицева.

    Returns:
        tuple[float, float]: Пиковое усиление и частота пика.
    """
    _check_hurwitz(sys.a)
    omegas = _frequency_grid(sys, n_points)
    gains = np.array([frequency_gain(sys, omega) for omega in omegas])
    index = int(np.argmax(gains))
    return float(gains[index]), float(omegas[index])


def _hamiltonian(sys: StateSpace, gamma: float) -> np.ndarray:
    a, b, c, d = sys.a, sys.b, sys.c, sys.d
    r = gamma**2 * np.eye(sys.n_inputs) - d.T @ d
    r_inv = np.linalg.inv(r)
    a_h = a + b @ r_inv @ d.T @ c
    s = np.eye(sys.n_outputs) + d @ r_inv @ d.T
    return np.block([[a_h, b @ r_inv @ b.T], [-c.T @ s @ c, -a_h.T]])


def _has_imaginary_eigenvalue(sys: StateSpace, gamma: float) -> bool:
    h = _hamiltonian(sys, gamma)
    tol = IMAGINARY_AXIS_TOL * max(1.0, float(np.linalg.norm(h, 2)))
    return bool(np.any(np.abs(np.linalg.eigvals(h).real) < tol))


def hinf_norm(sys: StateSpace, tol: float = 1e-6) -> float:
    """
    Вычисляет H∞ норму бисекцией по γ: γ > ‖G‖_∞ тогда и только тогда, когда
    гамильтониан H(γ) не имеет собственных чисел на мнимой оси. Прямая связь
    D учитывается стандартным расширением.

    Args:
        sys (StateSpace): Устойчивая система.
        tol (float, optional): Относительная точность бисекции.

    Raises:
        UnboundedNormError: Если A не гурвицева.

    Returns:
        float: ‖G‖_∞.
    """
    _check_hurwitz(sys.a)
    if not np.any(sys.b) or not np.any(sys.c):
        return float(np.linalg.norm(sys.d, 2)) if sys.d.size else 0.0

    candidates = [0.0] + [abs(float(v.imag)) for v in np.linalg.eigvals(sys.a)]
    lo = max(frequency_gain(sys, omega) for omega in candidates)
    if sys.d.size:
        lo = max(lo, float(np.linalg.norm(sys.d, 2)))

    hi = 2.0 * lo if lo > 0 else 1.0
    while _has_imaginary_eigenvalue(sys, hi):
        lo, hi = hi, 2.0 * hi

    while hi - lo > tol * hi:
        middle = 0.5 * (lo + hi)
        if _has_imaginary_eigenvalue(sys, middle):
            lo = middle
        else:
            hi = middle

    return 0.5 * (lo + hi)


@dataclass
class ValidationSample:
    deltas: np.ndarray
    norm: float
    error: str = ""


@dataclass
class ValidationReport:
    """
    Распределение H∞ норм системы ошибки по замороженным Δ. Проверка на
    замороженных Δ является необходимым условием: сертификат IQC покрывает и
    меняющиеся во времени Δ(t).
    """

    gamma_ref: float
    alpha_shift: float = 0.0
    samples: list[ValidationSample] = field(default_factory=list)

    @property
    def norms(self) -> np.ndarray:
        return np.array([sample.norm for sample in self.samples])

    @property
    def worst(self) -> float:
        norms = self.norms
        if norms.size == 0 or np.all(np.isnan(norms)):
            return math.nan
        return float(np.nanmax(norms))

    @property
    def n_errors(self) -> int:
        return sum(1 for sample in self.samples if sample.error)

    @property
    def passed(self) -> bool:
        return bool(self.samples) and all(
            sample.norm < self.gamma_ref for sample in self.samples
        )

    def summary(self) -> dict:
        return {
            "gamma_ref": self.gamma_ref,
            "alpha_shift": self.alpha_shift,
            "n_samples": len(self.samples),
            "n_errors": self.n_errors,
            "worst": self.worst,
            "pass": self.passed,
        }

    def rows(self) -> tuple[list[str], list[list]]:
        """Колонки и строки CSV: δ_1..δ_N, норма, ошибка."""
        n_blocks = len(self.samples[0].deltas) if self.samples else 0
        columns = [f"delta_{i + 1}" for i in range(n_blocks)] + ["hinf_norm", "error"]
        rows = [
            [*sample.deltas.tolist(), sample.norm, sample.error]
            for sample in self.samples
        ]
        return columns, rows


def sample_deltas(plant: LftPlant, n_samples: int, seed: int) -> list[np.ndarray]:
    """
    Все 2^N вершин и равномерные точки куба до общего количества `n_samples`.
    """
    vertices = list(plant.unc.vertices())
    rng = make_rng(seed)
    remainder = max(n_samples - len(vertices), 0)
    return vertices + [plant.unc.sample(rng) for _ in range(remainder)]


def validate_certificate(
    plant: LftPlant,
    gain,
    gamma_ref: float,
    n_samples: int | None = None,
    alpha_shift: float = 0.0,
    seed: int | None = None,
) -> ValidationReport:
    """
    Вычисляет H∞ норму замкнутой системы ошибки для вершин и случайных
    замороженных Δ. Ошибки отдельных точек (некорректное замыкание,
    неограниченная норма) записываются в отчёт и не прерывают проверку.

    Args:
        plant (LftPlant): Модель объекта.
        gain: Коэффициент наблюдателя L.
        gamma_ref (float): Проверяемая граница γ.
        n_samples (int, optional): Общее число точек (вершины включаются всегда).
        alpha_shift (float, optional): Сдвиг A → A - αI (сдвинутая система).
        seed (int, optional): Зерно генератора.

    Returns:
        ValidationReport: Нормы по точкам, худшее значение и вердикт.
    """
    settings = Settings()
    n_samples = settings.VALIDATION_SAMPLES if n_samples is None else n_samples
    seed = settings.SEED if seed is None else seed
    if n_samples < 1:
        raise UserError("Число точек проверки должно быть не меньше 1.")

    report = ValidationReport(gamma_ref, alpha_shift)
    for deltas in sample_deltas(plant, n_samples, seed):
        try:
            sys = closed_error_system(plant, gain, deltas, alpha_shift)
            report.samples.append(ValidationSample(deltas, hinf_norm(sys)))
        except UnboundedNormError as e:
            report.samples.append(ValidationSample(deltas, math.inf, str(e)))
        except UserError as e:
            report.samples.append(ValidationSample(deltas, math.nan, str(e)))
    return report


@dataclass
class DissipationTrace:
    times: np.ndarray
    values: np.ndarray

    @property
    def max_value(self) -> float:
        return float(np.max(self.values))


def dissipation_along_trajectory(
    plant: LftPlant,
    gain,
    alpha: float,
    certificate: dict[str, np.ndarray],
    gamma_sq: float,
    deltas,
    xi0,
    w_func: Callable[[float], np.ndarray],
    t_final: float = 5.0,
    dt: float = 1e-3,
) -> DissipationTrace:
    """
    Вычисляет dV/dt + z̃^T z̃ - γ² w^T w + [q; p]^T Π [q; p] вдоль траектории
    демпфированной расширенной системы с p = Δq. Для сертификата значение
    неположительно в каждый момент времени.

    Args:
        certificate (dict): Матрицы `P` (2n×2n), `Lambda` и, при D-G, `G_skew`.
        gamma_sq (float): γ² сертификата.
        deltas: Замороженная неопределённость.
        xi0: Начальное состояние ξ(0) = [x(0); e(0)].
        w_func: Возмущение w(t).
    """
    aug = build_augmented(plant, gain, alpha)
    closed = closed_error_system(plant, gain, deltas, alpha)
    delta = plant.delta_matrix(deltas)
    loop = np.linalg.solve(np.eye(plant.n_p) - delta @ plant.d_qp, delta)
    p_mat = certificate["P"]
    pi = multiplier_matrix(certificate["Lambda"], certificate.get("G_skew"))
    n = plant.n

    def derivative(t: float, xi: np.ndarray) -> np.ndarray:
        return closed.a @ xi + closed.b @ w_func(t)

    def dissipation(t: float, xi: np.ndarray) -> float:
        w = np.atleast_1d(w_func(t))
        x, e = xi[:n], xi[n:]
        p = loop @ (plant.c_q @ x + plant.d_qw @ w)
        q = plant.c_q @ x + plant.d_qp @ p + plant.d_qw @ w
        xi_dot = aug.a_aug @ xi + aug.b_aug @ np.concatenate([p, w])
        z = plant.c_z @ e
        qp = np.concatenate([q, p])
        return float(
            2.0 * xi @ p_mat @ xi_dot + z @ z - gamma_sq * (w @ w) + qp @ pi @ qp
        )

    steps = int(round(t_final / dt))
    times = np.arange(steps + 1) * dt
    xi = np.asarray(xi0, dtype=float)
    values = np.empty(steps + 1)
    for i, t in enumerate(times):
        values[i] = dissipation(t, xi)
        if i < steps:
            xi = rk4_step(derivative, t, xi, dt)
    return DissipationTrace(times, values)
