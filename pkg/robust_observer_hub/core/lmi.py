"""
Аффинные матричные выражения над скалярными переменными решения, сборка
задачи SDP и вызов решателя.
"""

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from typing import TextIO

import numpy as np

from robust_observer_hub.infra import Settings
from robust_observer_hub.logging_config import solver_logger as logger
from robust_observer_hub.solver_service import (
    BaseSdpBackend,
    CanonicalBlock,
    CanonicalSdp,
    SolverStatus,
    get_backend,
)

from .exceptions import DimensionError, InfeasibleError


def _as_constant(value) -> np.ndarray:
    return np.atleast_2d(np.asarray(value, dtype=float))


class LmiExpression:
    """
    Аффинное матричное выражение value(x) = constant + Σ x_k·terms[k].

    Поддерживает сложение, умножение на число, умножение на постоянную
    матрицу слева и справа (`M @ X`, `X @ M`), транспонирование и срезы.
    Произведение двух выражений не аффинно и не поддерживается.
    """

    # Отключает векторизацию numpy, чтобы `ndarray @ LmiExpression` вызывал
    # __rmatmul__
    __array_ufunc__ = None

    def __init__(self, constant, terms: dict[int, np.ndarray] | None = None):
        self.constant = _as_constant(constant)
        self.terms = {}
        for k, coefficient in (terms or {}).items():
            coefficient = _as_constant(coefficient)
            if coefficient.shape != self.constant.shape:
                raise DimensionError(
                    f"коэффициент x_{k}", self.constant.shape, coefficient.shape
                )
            self.terms[int(k)] = coefficient

    @classmethod
    def zeros(cls, rows: int, cols: int | None = None) -> "LmiExpression":
        return cls(np.zeros((rows, rows if cols is None else cols)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.constant.shape

    @property
    def is_square(self) -> bool:
        return self.shape[0] == self.shape[1]

    def variables(self) -> set[int]:
        return set(self.terms)

    def is_constant(self) -> bool:
        return not self.terms

    @staticmethod
    def coerce(value) -> "LmiExpression":
        if isinstance(value, LmiExpression):
            return value
        return LmiExpression(value)

    def _check_shape(self, other: "LmiExpression", operation: str):
        if self.shape != other.shape:
            raise DimensionError(operation, self.shape, other.shape)

    def _map(self, func: Callable[[np.ndarray], np.ndarray]) -> "LmiExpression":
        return LmiExpression(
            func(self.constant), {k: func(c) for k, c in self.terms.items()}
        )

    def __add__(self, other) -> "LmiExpression":
        other = self.coerce(other)
        self._check_shape(other, "сложение")
        terms = dict(self.terms)
        for k, coefficient in other.terms.items():
            terms[k] = terms[k] + coefficient if k in terms else coefficient
        return LmiExpression(self.constant + other.constant, terms)

    __radd__ = __add__

    def __neg__(self) -> "LmiExpression":
        return self._map(lambda c: -c)

    def __sub__(self, other) -> "LmiExpression":
        return self + (-self.coerce(other))

    def __rsub__(self, other) -> "LmiExpression":
        return self.coerce(other) + (-self)

    def __mul__(self, scalar: float) -> "LmiExpression":
        if not np.isscalar(scalar):
            return NotImplemented
        return self._map(lambda c: scalar * c)

    __rmul__ = __mul__

    def __matmul__(self, matrix) -> "LmiExpression":
        if isinstance(matrix, LmiExpression):
            return NotImplemented
        matrix = _as_constant(matrix)
        if self.shape[1] != matrix.shape[0]:
            raise DimensionError("умножение справа", self.shape[1], matrix.shape[0])
        return self._map(lambda c: c @ matrix)

    def __rmatmul__(self, matrix) -> "LmiExpression":
        matrix = _as_constant(matrix)
        if matrix.shape[1] != self.shape[0]:
            raise DimensionError("умножение слева", self.shape[0], matrix.shape[1])
        return self._map(lambda c: matrix @ c)

    def __getitem__(self, key) -> "LmiExpression":
        return self._map(lambda c: np.atleast_2d(c[key]))

    @property
    def T(self) -> "LmiExpression":
        return self._map(lambda c: c.T)

    def times(self, matrix) -> "LmiExpression":
        """
        Умножает скалярное (1×1) выражение на постоянную матрицу.
        """
        if self.shape != (1, 1):
            raise DimensionError("скалярное выражение", (1, 1), self.shape)
        matrix = _as_constant(matrix)
        return LmiExpression(
            self.constant[0, 0] * matrix,
            {k: c[0, 0] * matrix for k, c in self.terms.items()},
        )

    def evaluate(self, x) -> np.ndarray:
        """
        Вычисляет значение выражения в точке x.
        """
        x = np.asarray(x, dtype=float)
        value = self.constant.copy()
        for k, coefficient in self.terms.items():
            value += x[k] * coefficient
        return value

    def symmetrized(self) -> "LmiExpression":
        if not self.is_square:
            raise DimensionError("квадратная матрица", "n×n", self.shape)
        return 0.5 * (self + self.T)

    def __repr__(self) -> str:
        return f"LmiExpression(shape={self.shape}, vars={len(self.terms)})"


def he(x) -> LmiExpression:
    """He{X} = X + X^T."""
    x = LmiExpression.coerce(x)
    if not x.is_square:
        raise DimensionError("He{X}", "квадратная матрица", x.shape)
    return x + x.T


def congruence(x, m) -> LmiExpression:
    """
    Конгруэнтное преобразование M^T·X·M.
    """
    x = LmiExpression.coerce(x)
    if not x.is_square:
        raise DimensionError("конгруэнция", "квадратная матрица", x.shape)
    m = _as_constant(m)
    return m.T @ x @ m


def _pick_or_zeros(pick, item, rows: int, cols: int) -> np.ndarray:
    value = None if item is None else pick(item)
    return np.zeros((rows, cols)) if value is None else value


def blocks(rows: Sequence[Sequence]) -> LmiExpression:
    """
    Собирает блочное выражение из выражений, постоянных матриц и `None`
    (нулевой блок). Размеры нулевых блоков определяются по соседям в строке
    и столбце.

    Raises:
        DimensionError: Если размеры блоков не согласованы или не могут быть
        определены.
    """
    n_rows, n_cols = len(rows), max(len(row) for row in rows)
    grid = [
        [None if item is None else LmiExpression.coerce(item) for item in row]
        for row in rows
    ]
    heights, widths = [None] * n_rows, [None] * n_cols

    for i, row in enumerate(grid):
        if len(row) != n_cols:
            raise DimensionError(f"число блоков в строке {i}", n_cols, len(row))
        for j, item in enumerate(row):
            if item is None:
                continue
            for sizes, index, size in (
                (heights, i, item.shape[0]),
                (widths, j, item.shape[1]),
            ):
                if sizes[index] is None:
                    sizes[index] = size
                elif sizes[index] != size:
                    raise DimensionError(f"блок ({i}, {j})", sizes[index], size)

    if None in heights or None in widths:
        raise DimensionError("блочная матрица", "определённые размеры", "нулевой ряд")

    present = [item for row in grid for item in row if item is not None]
    keys = set().union(*(item.terms for item in present))

    def assemble(pick: Callable[[LmiExpression], np.ndarray | None]) -> np.ndarray:
        return np.block(
            [
                [
                    _pick_or_zeros(pick, item, heights[i], widths[j])
                    for j, item in enumerate(row)
                ]
                for i, row in enumerate(grid)
            ]
        )

    constant = assemble(lambda item: item.constant)
    terms = {k: assemble(lambda item, k=k: item.terms.get(k)) for k in keys}
    return LmiExpression(constant, terms)


def block_diag(*items) -> LmiExpression:
    """
    Блочно-диагональное выражение blkdiag(X_1, ..., X_m).
    """
    items = [LmiExpression.coerce(item) for item in items]
    rows = []
    for i, item in enumerate(items):
        row = [
            item if i == j else np.zeros((item.shape[0], other.shape[1]))
            for j, other in enumerate(items)
        ]
        rows.append(row)
    return blocks(rows)


class VarKind(StrEnum):
    SYMMETRIC = "symmetric"
    FULL = "full"
    SKEW = "skew"
    DIAGONAL_REPEATED = "diagonal-repeated"
    BLOCK_SYMMETRIC = "block-symmetric"
    BLOCK_SKEW = "block-skew"
    SCALAR = "scalar"


class MatrixVar(LmiExpression):
    """
    Матричная переменная решения. Структурные связи (симметрия,
    кососимметрия, повторяющиеся скаляры) заложены в общие переменные, а не
    в ограничения.

    Attributes:
        kind (VarKind): Вид структуры.
        handles (tuple[int, ...]): Индексы скалярных переменных в векторе x.
        block_sizes (tuple[int, ...]): Размеры диагональных блоков для
            блочных видов.
    """

    def __init__(
        self,
        kind: VarKind,
        shape: tuple[int, int],
        terms: dict[int, np.ndarray],
        block_sizes: tuple[int, ...] = (),
    ):
        super().__init__(np.zeros(shape), terms)
        self.kind = kind
        self.handles = tuple(terms)
        self.block_sizes = block_sizes

    def value(self, x) -> np.ndarray:
        return self.evaluate(x)

    def __repr__(self) -> str:
        return f"MatrixVar({self.kind}, shape={self.shape})"


def _unit(rows: int, cols: int, i: int, j: int) -> np.ndarray:
    matrix = np.zeros((rows, cols))
    matrix[i, j] = 1.0
    return matrix


class ConstraintSense(StrEnum):
    # expr ⪯ -margin·I
    NEGATIVE = "nsd"
    # expr ⪰ +margin·I
    POSITIVE = "psd"


@dataclass
class Constraint:
    name: str
    expr: LmiExpression
    sense: ConstraintSense
    margin: float

    def canonical(self) -> LmiExpression:
        """Приводит ограничение к виду F(x) ⪰ 0."""
        shift = self.margin * np.eye(self.expr.shape[0])
        if self.sense == ConstraintSense.NEGATIVE:
            return -self.expr - shift
        return self.expr - shift

    def violation(self, x) -> float:
        """
        Нарушение нестрогого неравенства (без запаса) в точке x.
        """
        return self._violation(self.expr.evaluate(x))

    def relative_violation(self, x) -> float:
        """
        Нарушение, отнесённое к масштабу ограничения 1 + max(‖F0‖, ‖F(x)‖).
        """
        value = self.expr.evaluate(x)
        scale = max(
            np.linalg.norm(self.expr.constant, 2), np.linalg.norm(value, 2)
        )
        return self._violation(value) / (1.0 + scale)

    def _violation(self, value: np.ndarray) -> float:
        eigenvalues = np.linalg.eigvalsh(0.5 * (value + value.T))
        if self.sense == ConstraintSense.NEGATIVE:
            return max(0.0, float(eigenvalues[-1]))
        return max(0.0, float(-eigenvalues[0]))


@dataclass
class SdpSolution:
    """
    Результат решения задачи SDP.
    """

    status: SolverStatus
    values: np.ndarray
    objective_value: float = math.nan
    max_constraint_violation: float = math.nan
    solver: str = ""
    message: str = ""
    wall_time: float = 0.0

    @property
    def is_optimal(self) -> bool:
        return self.status == SolverStatus.OPTIMAL

    def value(self, expr: LmiExpression) -> np.ndarray:
        return expr.evaluate(self.values)


class SdpProblem:
    """
    Задача SDP: линейная цель и аффинные матричные неравенства. Строгие
    неравенства реализуются с запасом ε_feas·(1 + ‖F0‖_2).
    """

    def __init__(self, eps_feas: float | None = None):
        settings = Settings()
        self.eps_feas = settings.EPS_FEAS if eps_feas is None else eps_feas
        if self.eps_feas <= 0:
            raise DimensionError("ε_feas", "> 0", self.eps_feas)
        self.n_vars = 0
        self.constraints: list[Constraint] = []
        self.objective = LmiExpression.zeros(1)
        self.objective_cap: float | None = None

    def _allocate(self, count: int) -> list[int]:
        handles = list(range(self.n_vars, self.n_vars + count))
        self.n_vars += count
        return handles

    @staticmethod
    def _check_positive(*sizes):
        if any(int(size) < 1 for size in sizes):
            raise DimensionError("размер переменной", "≥ 1", sizes)

    def scalar_var(self) -> MatrixVar:
        (k,) = self._allocate(1)
        return MatrixVar(VarKind.SCALAR, (1, 1), {k: np.ones((1, 1))})

    def sym_var(self, n: int) -> MatrixVar:
        """Симметричная n×n переменная: n(n+1)/2 скаляров."""
        self._check_positive(n)
        terms = {}
        for i in range(n):
            for j in range(i, n):
                (k,) = self._allocate(1)
                unit = _unit(n, n, i, j)
                terms[k] = unit + unit.T if i != j else unit
        return MatrixVar(VarKind.SYMMETRIC, (n, n), terms)

    def full_var(self, rows: int, cols: int) -> MatrixVar:
        self._check_positive(rows, cols)
        handles = self._allocate(rows * cols)
        terms = {
            k: _unit(rows, cols, *divmod(index, cols))
            for index, k in enumerate(handles)
        }
        return MatrixVar(VarKind.FULL, (rows, cols), terms)

    def skew_var(self, n: int) -> MatrixVar:
        """Кососимметричная n×n переменная: n(n-1)/2 скаляров, нулевая диагональ."""
        self._check_positive(n)
        terms = {}
        for i in range(n):
            for j in range(i + 1, n):
                (k,) = self._allocate(1)
                unit = _unit(n, n, i, j)
                terms[k] = unit - unit.T
        return MatrixVar(VarKind.SKEW, (n, n), terms)

    def _block_var(
        self,
        kind: VarKind,
        block_sizes: Sequence[int],
        make_block: Callable[[int], MatrixVar | None],
    ) -> MatrixVar:
        block_sizes = tuple(int(size) for size in block_sizes)
        self._check_positive(*block_sizes)
        total = sum(block_sizes)
        terms, offset = {}, 0
        for size in block_sizes:
            block = make_block(size)
            if block is not None:
                for k, coefficient in block.terms.items():
                    embedded = np.zeros((total, total))
                    embedded[offset : offset + size, offset : offset + size] = (
                        coefficient
                    )
                    terms[k] = embedded
            offset += size
        return MatrixVar(kind, (total, total), terms, block_sizes)

    def block_scalar_var(self, block_sizes: Sequence[int]) -> MatrixVar:
        """
        Переменная blkdiag(λ_1·I_{n_1}, ..., λ_N·I_{n_N}): по одному скаляру
        на блок.
        """

        def make_block(size: int) -> MatrixVar:
            (k,) = self._allocate(1)
            return MatrixVar(VarKind.SCALAR, (size, size), {k: np.eye(size)})

        return self._block_var(VarKind.DIAGONAL_REPEATED, block_sizes, make_block)

    def block_sym_var(self, block_sizes: Sequence[int]) -> MatrixVar:
        """Блочно-диагональная переменная с полными симметричными блоками."""
        return self._block_var(VarKind.BLOCK_SYMMETRIC, block_sizes, self.sym_var)

    def block_skew_var(self, block_sizes: Sequence[int]) -> MatrixVar:
        """
        Блочно-диагональная кососимметричная переменная. Блоки размера 1
        тождественно равны нулю.
        """
        return self._block_var(
            VarKind.BLOCK_SKEW,
            block_sizes,
            lambda size: self.skew_var(size) if size >= 2 else None,
        )

    def add_constraint(
        self,
        expr,
        sense: ConstraintSense = ConstraintSense.NEGATIVE,
        margin: float | None = None,
        name: str = "",
    ) -> Constraint:
        """
        Добавляет матричное неравенство. Если запас не указан, неравенство
        считается строгим и запас равен ε_feas·(1 + ‖F0‖_2).

        Args:
            expr: Квадратное выражение (симметризуется).
            sense (ConstraintSense): Знак неравенства.
            margin (float, optional): Явный запас; 0 означает нестрогое
                неравенство.
            name (str, optional): Имя для диагностики и выгрузки.

        Raises:
            DimensionError: Если выражение не квадратное или ссылается на
            несуществующие переменные.
        """
        expr = LmiExpression.coerce(expr)
        if not expr.is_square:
            raise DimensionError("ограничение LMI", "квадратная матрица", expr.shape)
        unknown = [k for k in expr.terms if not 0 <= k < self.n_vars]
        if unknown:
            raise DimensionError("переменные ограничения", self.n_vars, unknown)

        expr = expr.symmetrized()
        if margin is None:
            margin = self.eps_feas * (1.0 + np.linalg.norm(expr.constant, 2))
        constraint = Constraint(
            name or f"lmi{len(self.constraints)}", expr, sense, margin
        )
        self.constraints.append(constraint)
        return constraint

    def minimize(self, objective, cap: float | None = None):
        """
        Задаёт линейную цель. Если указан `cap`, добавляется ограничение
        objective ≤ cap, а достижение этой границы считается несовместностью.
        """
        objective = LmiExpression.coerce(objective)
        if objective.shape != (1, 1):
            raise DimensionError("цель", (1, 1), objective.shape)
        self.objective = objective
        self.objective_cap = cap
        if cap is not None:
            self.add_constraint(objective - cap, margin=0.0, name="objective_cap")

    def canonical(self) -> CanonicalSdp:
        c = np.zeros(self.n_vars)
        for k, coefficient in self.objective.terms.items():
            c[k] = coefficient[0, 0]
        sdp_blocks = []
        for constraint in self.constraints:
            form = constraint.canonical()
            sdp_blocks.append(
                CanonicalBlock(constraint.name, form.constant, form.terms)
            )
        return CanonicalSdp(self.n_vars, c, sdp_blocks)

    def max_violation(self, x) -> float:
        return max((c.violation(x) for c in self.constraints), default=0.0)

    def max_relative_violation(self, x) -> float:
        return max(
            (c.relative_violation(x) for c in self.constraints), default=0.0
        )

    def dump(self, file_path: str):
        """
        Выгружает задачу в разреженном формате SDPA: минимизировать c^T x при
        Σ F_k·x_k - F_0 ⪰ 0. Матрица 0 содержит -F0 стандартной формы.
        Записываются только элементы верхнего треугольника.
        """
        sdp = self.canonical()
        with open(file_path, "w", encoding="utf-8") as stream:
            self._write_sdpa(sdp, stream)

    @staticmethod
    def _write_sdpa(sdp: CanonicalSdp, stream: TextIO):
        stream.write(f"* robust observer SDP: {len(sdp.blocks)} blocks\n")
        for block in sdp.blocks:
            stream.write(f"* block {block.name} size {block.size}\n")
        stream.write(f"{sdp.n_vars}\n{len(sdp.blocks)}\n")
        stream.write(" ".join(str(block.size) for block in sdp.blocks) + "\n")
        stream.write(" ".join(f"{value:.17g}" for value in sdp.objective) + "\n")

        for block_no, block in enumerate(sdp.blocks, start=1):
            matrices = [(0, -block.constant)]
            matrices += [
                (k + 1, block.coefficients[k]) for k in sorted(block.coefficients)
            ]
            for mat_no, matrix in matrices:
                rows, cols = np.nonzero(np.triu(matrix))
                for i, j in zip(rows, cols):
                    stream.write(
                        f"{mat_no} {block_no} {i + 1} {j + 1} {matrix[i, j]:.17g}\n"
                    )


def solve(problem: SdpProblem, backend: BaseSdpBackend | None = None) -> SdpSolution:
    """
    Решает задачу SDP и классифицирует результат. Задача считается
    несовместной, если решатель сообщил о несовместности, если нарушение
    ограничений после сходимости, отнесённое к масштабу ограничения,
    превышает порог или если цель упёрлась в верхнюю границу `cap`.

    Args:
        problem (SdpProblem): Задача.
        backend (BaseSdpBackend, optional): Решатель; по умолчанию из
            конфигурации.

    Returns:
        SdpSolution: Статус, точка и диагностика.
    """
    settings = Settings()
    backend = backend or get_backend()
    result = backend.solve(problem.canonical())
    empty = np.full(problem.n_vars, np.nan)

    if result.status != SolverStatus.OPTIMAL or result.values is None:
        logger.info(
            f"SDP: status={result.status} solver={result.solver} "
            f"message='{result.message}'"
        )
        status = (
            result.status
            if result.status != SolverStatus.OPTIMAL
            else SolverStatus.UNKNOWN
        )
        return SdpSolution(
            status,
            empty,
            solver=result.solver,
            message=result.message,
            wall_time=result.wall_time,
        )

    values = result.values
    objective_value = float(problem.objective.evaluate(values)[0, 0])
    violation = problem.max_violation(values)
    relative = problem.max_relative_violation(values)
    status, message = SolverStatus.OPTIMAL, result.message

    if relative > settings.INFEASIBILITY_RESIDUAL:
        status = SolverStatus.INFEASIBLE
        message = f"нарушение ограничений {violation:.3e} (отн. {relative:.3e})"
    elif (
        problem.objective_cap is not None
        and objective_value >= problem.objective_cap * (1.0 - 1e-6)
    ):
        status = SolverStatus.INFEASIBLE
        message = f"цель достигла границы {problem.objective_cap:g}"

    logger.info(
        f"SDP: status={status} solver={result.solver} "
        f"objective={objective_value:.6e} violation={violation:.3e}"
    )
    return SdpSolution(
        status,
        values,
        objective_value,
        violation,
        result.solver,
        message,
        result.wall_time,
    )


@dataclass
class BisectionResult:
    """
    Результат поиска γ̂ = γ² бисекцией.
    """

    gamma_sq: float
    solution: SdpSolution
    iterations: int = 0
    history: list[tuple[float, SolverStatus]] = field(default_factory=list)

    @property
    def gamma(self) -> float:
        return math.sqrt(max(self.gamma_sq, 0.0))


def bisect_gamma_squared(
    builder: Callable[[float], SdpProblem],
    bracket: tuple[float, float] | None = None,
    tol: float = 1e-4,
    backend: BaseSdpBackend | None = None,
) -> BisectionResult:
    """
    Ищет наименьшее γ̂ = γ², при котором задача совместна, бисекцией по
    интервалу `bracket` до относительной точности `tol`. Построитель должен
    быть монотонным: увеличение γ̂ не делает задачу несовместной.

    Args:
        builder: Функция γ̂ ↦ SdpProblem с фиксированным γ̂.
        bracket (tuple[float, float], optional): Интервал поиска; по
            умолчанию [0, γ̂_max] из конфигурации.
        tol (float, optional): Относительная точность.
        backend (BaseSdpBackend, optional): Решатель.

    Raises:
        InfeasibleError: Если задача несовместна на верхней границе интервала.

    Returns:
        BisectionResult: γ̂, γ = √γ̂ и решение на найденной границе.
    """
    lo, hi = bracket if bracket is not None else (0.0, Settings().GAMMA_SQ_CAP)
    history = []

    def attempt(gamma_sq: float) -> SdpSolution:
        solution = solve(builder(gamma_sq), backend)
        history.append((gamma_sq, solution.status))
        return solution

    best = attempt(hi)
    if not best.is_optimal:
        raise InfeasibleError(f"γ² = {hi:g} на верхней границе интервала")

    if lo < hi:
        lower = attempt(lo)
        if lower.is_optimal:
            return BisectionResult(lo, lower, len(history), history)
    else:
        return BisectionResult(hi, best, len(history), history)

    while hi - lo > tol * max(hi, np.finfo(float).tiny):
        middle = 0.5 * (lo + hi)
        solution = attempt(middle)
        if solution.is_optimal:
            hi, best = middle, solution
        else:
            lo = middle

    return BisectionResult(hi, best, len(history), history)
