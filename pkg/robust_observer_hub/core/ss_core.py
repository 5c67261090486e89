"""
Типы пространства состояний и LFT-модели объекта, построение расширенной
системы ξ = [x; e] и замыкание замороженной неопределённости.
"""

import itertools
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np

from .exceptions import DimensionError, WellPosednessError

# Порог числа обусловленности I - ΔD_qp, выше которого замыкание некорректно.
WELL_POSEDNESS_COND = 1e12
# Допуск на вещественную часть собственных чисел (относительно ‖A‖).
STABILITY_TOL = 1e-9


def _as_matrix(value, name: str, rows: int | None = None, cols: int | None = None):
    matrix = np.atleast_2d(np.asarray(value, dtype=float))
    if matrix.ndim != 2:
        raise DimensionError(name, "матрица", matrix.shape)
    if rows is not None and matrix.shape[0] != rows:
        raise DimensionError(f"{name} (строки)", rows, matrix.shape[0])
    if cols is not None and matrix.shape[1] != cols:
        raise DimensionError(f"{name} (столбцы)", cols, matrix.shape[1])
    matrix = matrix.copy()
    matrix.flags.writeable = False
    return matrix


def _zeros(rows: int, cols: int) -> np.ndarray:
    return np.zeros((rows, cols))


@dataclass(frozen=True)
class StateSpace:
    """
    Линейная стационарная система ẋ = a·x + b·u, y = c·x + d·u.

    Attributes:
        a (np.ndarray): Матрица динамики n×n.
        b (np.ndarray): Матрица входа n×m.
        c (np.ndarray): Матрица выхода p×n.
        d (np.ndarray): Матрица прямой связи p×m.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        a = _as_matrix(self.a, "a")
        if a.shape[0] != a.shape[1]:
            raise DimensionError("a", "квадратная матрица", a.shape)
        n = a.shape[0]
        b = _as_matrix(self.b, "b", rows=n)
        c = _as_matrix(self.c, "c", cols=n)
        d = _as_matrix(self.d, "d", rows=c.shape[0], cols=b.shape[1])
        for name, value in (("a", a), ("b", b), ("c", c), ("d", d)):
            object.__setattr__(self, name, value)

    @property
    def n_states(self) -> int:
        return self.a.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.b.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.c.shape[0]


@dataclass(frozen=True)
class UncertaintyStructure:
    """
    Структура неопределённости Δ = blkdiag(δ_1·I_{n_1}, ..., δ_N·I_{n_N}),
    |δ_i| ≤ 1.

    Attributes:
        block_sizes (tuple[int, ...]): Кратности n_i скалярных блоков.
    """

    block_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(size) for size in self.block_sizes)
        if not sizes:
            raise DimensionError("block_sizes", "хотя бы один блок", sizes)
        if any(size < 1 for size in sizes):
            raise DimensionError("block_sizes", "n_i ≥ 1", sizes)
        object.__setattr__(self, "block_sizes", sizes)

    @property
    def n_blocks(self) -> int:
        return len(self.block_sizes)

    @property
    def total(self) -> int:
        return sum(self.block_sizes)

    def slices(self) -> list[slice]:
        """Срезы каналов p/q, соответствующие блокам."""
        offsets = np.concatenate(([0], np.cumsum(self.block_sizes)))
        return [slice(int(a), int(b)) for a, b in itertools.pairwise(offsets)]

    def expand(self, deltas: Sequence[float]) -> np.ndarray:
        """
        Собирает блочно-диагональную матрицу Δ из скаляров δ_i.

        Raises:
            DimensionError: Если число скаляров не совпадает с числом блоков.
        """
        deltas = np.asarray(deltas, dtype=float).ravel()
        if deltas.size != self.n_blocks:
            raise DimensionError("δ", self.n_blocks, deltas.size)
        return np.diag(np.repeat(deltas, self.block_sizes))

    def vertices(self) -> Iterator[np.ndarray]:
        """Перебирает все 2^N вершин δ_i ∈ {-1, +1}."""
        for signs in itertools.product((-1.0, 1.0), repeat=self.n_blocks):
            yield np.array(signs)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """Равномерная выборка δ из куба [-1, 1]^N."""
        return rng.uniform(-1.0, 1.0, size=self.n_blocks)


@dataclass(frozen=True)
class LftPlant:
    """
    Реализация объекта с неопределённостью в виде верхнего LFT:
    ẋ = A x + B_p p + B_w w, q = C_q x + D_qp p + D_qw w, z = C_z x,
    y = C_y x + D_yp p + D_yw w, p = Δ q.

    Прямые связи D_zp и D_zw структурно равны нулю, поэтому полей для них нет.
    """

    a: np.ndarray
    b_p: np.ndarray
    b_w: np.ndarray
    c_q: np.ndarray
    c_z: np.ndarray
    c_y: np.ndarray
    d_qp: np.ndarray
    d_qw: np.ndarray
    d_yp: np.ndarray
    d_yw: np.ndarray
    unc: UncertaintyStructure
    name: str = field(default="plant", compare=False)

    def __post_init__(self):
        a = _as_matrix(self.a, "A")
        if a.shape[0] != a.shape[1]:
            raise DimensionError("A", "квадратная матрица", a.shape)
        n = a.shape[0]
        b_p = _as_matrix(self.b_p, "B_p", rows=n)
        b_w = _as_matrix(self.b_w, "B_w", rows=n)
        n_p, n_w = b_p.shape[1], b_w.shape[1]
        c_q = _as_matrix(self.c_q, "C_q", cols=n)
        c_z = _as_matrix(self.c_z, "C_z", cols=n)
        c_y = _as_matrix(self.c_y, "C_y", cols=n)
        n_q, n_y = c_q.shape[0], c_y.shape[0]
        if n_q != n_p:
            raise DimensionError("n_q = n_p", n_p, n_q)
        if self.unc.total != n_p:
            raise DimensionError("Σ n_i = n_p", n_p, self.unc.total)
        matrices = {
            "a": a,
            "b_p": b_p,
            "b_w": b_w,
            "c_q": c_q,
            "c_z": c_z,
            "c_y": c_y,
            "d_qp": _as_matrix(self.d_qp, "D_qp", rows=n_q, cols=n_p),
            "d_qw": _as_matrix(self.d_qw, "D_qw", rows=n_q, cols=n_w),
            "d_yp": _as_matrix(self.d_yp, "D_yp", rows=n_y, cols=n_p),
            "d_yw": _as_matrix(self.d_yw, "D_yw", rows=n_y, cols=n_w),
        }
        for name, value in matrices.items():
            object.__setattr__(self, name, value)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def n_p(self) -> int:
        return self.b_p.shape[1]

    @property
    def n_q(self) -> int:
        return self.c_q.shape[0]

    @property
    def n_w(self) -> int:
        return self.b_w.shape[1]

    @property
    def n_z(self) -> int:
        return self.c_z.shape[0]

    @property
    def n_y(self) -> int:
        return self.c_y.shape[0]

    def delta_matrix(self, delta) -> np.ndarray:
        """
        Приводит неопределённость к матрице Δ: принимается либо вектор δ_i
        длины N, либо готовая матрица n_p×n_q.
        """
        delta = np.asarray(delta, dtype=float)
        if delta.ndim <= 1:
            return self.unc.expand(delta)
        if delta.shape != (self.n_p, self.n_q):
            raise DimensionError("Δ", (self.n_p, self.n_q), delta.shape)
        return delta


@dataclass(frozen=True)
class AugmentedSystem:
    """
    Расширенная система ξ̇ = A_aug ξ + B_aug η, ζ = C_aug ξ + D_aug η с
    ξ = [x; e], η = [p; w], ζ = [q; z̃].
    """

    a_aug: np.ndarray
    b_aug: np.ndarray
    c_aug: np.ndarray
    d_aug: np.ndarray

    @property
    def n_xi(self) -> int:
        return self.a_aug.shape[0]

    @property
    def n_eta(self) -> int:
        return self.b_aug.shape[1]


@dataclass(frozen=True)
class NominalModel:
    """
    Данные номинального синтеза при замороженной неопределённости:
    ẋ = a x + b_w w, z = c_z x, y = c_y x + d_yw w.
    """

    a: np.ndarray
    b_w: np.ndarray
    c_z: np.ndarray
    c_y: np.ndarray
    d_yw: np.ndarray


class IssueKind(StrEnum):
    DETECTABILITY = "detectability"
    WELL_POSEDNESS = "well-posedness"
    ROBUST_STABILITY = "robust-stability"
    MARGINAL_STABILITY = "marginal-stability"


class Severity(StrEnum):
    VIOLATION = "violation"
    WARNING = "warning"


@dataclass(frozen=True)
class PlantIssue:
    kind: IssueKind
    severity: Severity
    message: str


def _check_gain(plant: LftPlant, gain) -> np.ndarray:
    gain = np.atleast_2d(np.asarray(gain, dtype=float))
    if gain.shape != (plant.n, plant.n_y):
        raise DimensionError("L", (plant.n, plant.n_y), gain.shape)
    return gain


def _feedback_gain(plant: LftPlant, delta: np.ndarray) -> np.ndarray:
    """
    Возвращает K = (I - Δ D_qp)^{-1} Δ, так что p = K (C_q x + D_qw w).

    Raises:
        WellPosednessError: Если I - Δ D_qp вырождена.
    """
    loop = np.eye(plant.n_p) - delta @ plant.d_qp
    condition = np.linalg.cond(loop)
    if not np.isfinite(condition) or condition > WELL_POSEDNESS_COND:
        raise WellPosednessError(condition)
    return np.linalg.solve(loop, delta)


def spectral_abscissa(a) -> float:
    """
    Максимальная вещественная часть собственных чисел квадратной матрицы.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] != a.shape[1]:
        raise DimensionError("A", "квадратная матрица", a.shape)
    if a.size == 0:
        return -np.inf
    return float(np.max(np.linalg.eigvals(a).real))


def build_augmented(plant: LftPlant, gain, alpha: float = 0.0) -> AugmentedSystem:
    """
    Строит расширенную систему для ξ = [x; e]. При α > 0 в обоих диагональных
    блоках A_aug матрица A заменяется на A - αI (искусственное демпфирование).

    Args:
        plant (LftPlant): Объект с неопределённостью.
        gain: Коэффициент наблюдателя L размера n×n_y.
        alpha (float, optional): Параметр демпфирования.

    Raises:
        DimensionError: Если размер L не совпадает с n×n_y.

    Returns:
        AugmentedSystem: Матрицы A_aug, B_aug, C_aug, D_aug.
    """
    gain = _check_gain(plant, gain)
    n = plant.n
    a = plant.a - alpha * np.eye(n)

    a_aug = np.block([[a, _zeros(n, n)], [_zeros(n, n), a - gain @ plant.c_y]])
    b_aug = np.block(
        [
            [plant.b_p, plant.b_w],
            [plant.b_p - gain @ plant.d_yp, plant.b_w - gain @ plant.d_yw],
        ]
    )
    c_aug = np.block(
        [[plant.c_q, _zeros(plant.n_q, n)], [_zeros(plant.n_z, n), plant.c_z]]
    )
    d_aug = np.block(
        [
            [plant.d_qp, plant.d_qw],
            [_zeros(plant.n_z, plant.n_p), _zeros(plant.n_z, plant.n_w)],
        ]
    )
    return AugmentedSystem(a_aug, b_aug, c_aug, d_aug)


def freeze_uncertainty(plant: LftPlant, delta) -> NominalModel:
    """
    Замораживает неопределённость: подставляет p = Δ q и возвращает
    номинальные матрицы A(Δ), B_w(Δ), C_y(Δ), D_yw(Δ).

    Raises:
        WellPosednessError: Если I - D_qp·Δ вырождена.
    """
    delta = plant.delta_matrix(delta)
    k = _feedback_gain(plant, delta)
    return NominalModel(
        a=plant.a + plant.b_p @ k @ plant.c_q,
        b_w=plant.b_w + plant.b_p @ k @ plant.d_qw,
        c_z=plant.c_z,
        c_y=plant.c_y + plant.d_yp @ k @ plant.c_q,
        d_yw=plant.d_yw + plant.d_yp @ k @ plant.d_qw,
    )


def close_uncertainty(plant: LftPlant, delta) -> StateSpace:
    """
    Замыкает верхний LFT F_u(M, Δ) и возвращает систему w → [z; y].

    Args:
        plant (LftPlant): Объект с неопределённостью.
        delta: Вектор δ_i или матрица Δ.

    Raises:
        WellPosednessError: Если I - D_qp·Δ вырождена.

    Returns:
        StateSpace: Реализация (A(Δ), B(Δ), [C_z; C_y(Δ)], [0; D_yw(Δ)]).
    """
    frozen = freeze_uncertainty(plant, delta)
    c = np.vstack([frozen.c_z, frozen.c_y])
    d = np.vstack([_zeros(plant.n_z, plant.n_w), frozen.d_yw])
    return StateSpace(frozen.a, frozen.b_w, c, d)


def closed_error_system(
    plant: LftPlant, gain, delta, alpha_shift: float = 0.0
) -> StateSpace:
    """
    Замыкает p = Δq вокруг расширенной системы и возвращает оператор w → z̃
    с состоянием размерности 2n. Прямая связь w → z̃ тождественно равна нулю.

    Args:
        plant (LftPlant): Объект с неопределённостью.
        gain: Коэффициент наблюдателя L.
        delta: Вектор δ_i или матрица Δ.
        alpha_shift (float, optional): Сдвиг A → A - αI (сдвинутая система).

    Raises:
        WellPosednessError: Если I - Δ·D_qp вырождена.
    """
    aug = build_augmented(plant, gain, alpha_shift)
    k = _feedback_gain(plant, plant.delta_matrix(delta))
    n = plant.n
    b_p_aug, b_w_aug = aug.b_aug[:, : plant.n_p], aug.b_aug[:, plant.n_p :]

    # p = K C_q x + K D_qw w; x - первый блок ξ
    k_xi = np.hstack([k @ plant.c_q, _zeros(plant.n_p, n)])
    a_cl = aug.a_aug + b_p_aug @ k_xi
    b_cl = b_w_aug + b_p_aug @ k @ plant.d_qw
    c_cl = np.hstack([_zeros(plant.n_z, n), plant.c_z])
    return StateSpace(a_cl, b_cl, c_cl, _zeros(plant.n_z, plant.n_w))


def _is_detectable(a: np.ndarray, c: np.ndarray, tol: float) -> bool:
    n = a.shape[0]
    for eigenvalue in np.linalg.eigvals(a):
        if eigenvalue.real < -tol:
            continue
        pencil = np.vstack([eigenvalue * np.eye(n) - a, c.astype(complex)])
        singular_values = np.linalg.svd(pencil, compute_uv=False)
        rank_tol = n * np.finfo(float).eps * max(singular_values[0], 1.0)
        if np.sum(singular_values > rank_tol) < n:
            return False
    return True


def validate_plant(
    plant: LftPlant, n_samples: int = 64, seed: int = 0
) -> list[PlantIssue]:
    """
    Проверяет стандартные предположения о модели: обнаруживаемость (A, C_y)
    тестом PBH, корректность LFT во всех вершинах Δ и робастную устойчивость
    A + B_pΔ(I - D_qpΔ)^{-1}C_q в вершинах и в `n_samples` случайных точках.
    Маргинальная устойчивость отмечается как предупреждение.

    Args:
        plant (LftPlant): Проверяемая модель.
        n_samples (int, optional): Число случайных внутренних точек.
        seed (int, optional): Зерно генератора случайных чисел.

    Returns:
        list[PlantIssue]: Найденные нарушения и предупреждения (пустой список,
        если модель корректна).
    """
    issues = []
    scale = max(1.0, float(np.linalg.norm(plant.a, 2)))
    tol = STABILITY_TOL * scale

    if not _is_detectable(plant.a, plant.c_y, tol):
        issues.append(
            PlantIssue(
                IssueKind.DETECTABILITY,
                Severity.VIOLATION,
                "Пара (A, C_y) не обнаруживаема: есть неустойчивая "
                "ненаблюдаемая мода.",
            )
        )

    nominal_abscissa = spectral_abscissa(plant.a)
    nominal_marginal = abs(nominal_abscissa) <= tol
    if nominal_marginal:
        issues.append(
            PlantIssue(
                IssueKind.MARGINAL_STABILITY,
                Severity.WARNING,
                "A маргинально устойчива: для синтеза нужно демпфирование α > 0.",
            )
        )

    rng = np.random.default_rng(seed)
    vertices = list(plant.unc.vertices())
    samples = vertices + [plant.unc.sample(rng) for _ in range(n_samples)]
    worst, marginal = -np.inf, False

    for i, deltas in enumerate(samples):
        is_vertex = i < len(vertices)
        try:
            frozen = freeze_uncertainty(plant, deltas)
        except WellPosednessError as e:
            if is_vertex:
                issues.append(
                    PlantIssue(
                        IssueKind.WELL_POSEDNESS,
                        Severity.VIOLATION,
                        f"Вершина δ = {deltas.tolist()}: {e}",
                    )
                )
            continue
        abscissa = spectral_abscissa(frozen.a)
        worst = max(worst, abscissa)
        marginal = marginal or abs(abscissa) <= tol

    if worst > tol:
        issues.append(
            PlantIssue(
                IssueKind.ROBUST_STABILITY,
                Severity.VIOLATION,
                "Объект не робастно устойчив: спектральная абсцисса "
                f"{worst:.3e} > 0 на выборке Δ.",
            )
        )
    elif marginal and not nominal_marginal:
        issues.append(
            PlantIssue(
                IssueKind.ROBUST_STABILITY,
                Severity.WARNING,
                "Объект маргинально устойчив на выборке Δ.",
            )
        )

    return issues
