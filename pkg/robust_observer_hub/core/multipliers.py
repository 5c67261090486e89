"""
Параметризации IQC-мультипликаторов (D и D-G масштабирование) и блоки
Q22, Q23, Q33 функции снабжения.
"""

from dataclasses import dataclass
from enum import StrEnum

import numpy as np

from robust_observer_hub.infra import Settings

from .exceptions import ConfigError, DimensionError
from .lmi import (
    ConstraintSense,
    LmiExpression,
    MatrixVar,
    SdpProblem,
    congruence,
    he,
)
from .ss_core import AugmentedSystem, LftPlant, UncertaintyStructure


class Scaling(StrEnum):
    D = "d"
    DG = "dg"


class LambdaKind(StrEnum):
    SCALAR_PER_BLOCK = "scalar"
    FULL_PER_BLOCK = "full"


@dataclass(frozen=True)
class MultiplierSpec:
    """
    Описание мультипликатора Π(Λ, 𝒢) = [[Λ, 𝒢], [𝒢^T, -Λ]].

    Attributes:
        scaling (Scaling): D (𝒢 = 0) или D-G (кососимметричная 𝒢 для
            вещественных повторяющихся блоков).
        lambda_kind (LambdaKind): λ_i·I_{n_i} или полная Λ_i ∈ S^{n_i} на блок.
        blocks (UncertaintyStructure): Структура неопределённости.
    """

    scaling: Scaling
    lambda_kind: LambdaKind
    blocks: UncertaintyStructure

    @property
    def name(self) -> str:
        return f"{self.scaling}-{self.lambda_kind}"

    @classmethod
    def from_name(cls, name: str, blocks: UncertaintyStructure) -> "MultiplierSpec":
        """
        Разбирает имя вида `d-scalar`, `d-full`, `dg-scalar`, `dg-full`.

        Raises:
            ConfigError: Если имя не соответствует ни одному мультипликатору.
        """
        scaling, _, kind = name.strip().lower().partition("-")
        try:
            return cls(Scaling(scaling), LambdaKind(kind), blocks)
        except ValueError:
            raise ConfigError(
                f"неизвестный мультипликатор '{name}', допустимы: "
                "d-scalar, d-full, dg-scalar, dg-full"
            ) from None


@dataclass(frozen=True)
class MultiplierVars:
    """
    Переменные мультипликатора: Λ (или её значение) и 𝒢 (для D-G).
    """

    lam: MatrixVar | np.ndarray
    g: MatrixVar | np.ndarray | None = None

    def values(self, x) -> tuple[np.ndarray, np.ndarray | None]:
        lam = LmiExpression.coerce(self.lam).evaluate(x)
        g = None if self.g is None else LmiExpression.coerce(self.g).evaluate(x)
        return lam, g


@dataclass(frozen=True)
class SelectionMatrices:
    """
    Селекторы q = M_q ζ, z̃ = M_z ζ, p = E_p η, w = E_w η.
    """

    m_q: np.ndarray
    m_z: np.ndarray
    e_p: np.ndarray
    e_w: np.ndarray

    @classmethod
    def for_sizes(
        cls, n_q: int, n_z: int, n_p: int, n_w: int
    ) -> "SelectionMatrices":
        return cls(
            m_q=np.hstack([np.eye(n_q), np.zeros((n_q, n_z))]),
            m_z=np.hstack([np.zeros((n_z, n_q)), np.eye(n_z)]),
            e_p=np.hstack([np.eye(n_p), np.zeros((n_p, n_w))]),
            e_w=np.hstack([np.zeros((n_w, n_p)), np.eye(n_w)]),
        )

    @classmethod
    def for_plant(cls, plant: LftPlant) -> "SelectionMatrices":
        return cls.for_sizes(plant.n_q, plant.n_z, plant.n_p, plant.n_w)


def make_multiplier_vars(
    problem: SdpProblem,
    spec: MultiplierSpec,
    eps_lambda: float | None = None,
) -> MultiplierVars:
    """
    Создаёт переменные мультипликатора в задаче и добавляет ограничение
    Λ ⪰ ε_Λ·I.
    """
    eps_lambda = Settings().EPS_LAMBDA if eps_lambda is None else eps_lambda
    sizes = spec.blocks.block_sizes

    match spec.lambda_kind:
        case LambdaKind.SCALAR_PER_BLOCK:
            lam = problem.block_scalar_var(sizes)
        case LambdaKind.FULL_PER_BLOCK:
            lam = problem.block_sym_var(sizes)
    problem.add_constraint(
        lam, ConstraintSense.POSITIVE, margin=eps_lambda, name="lambda"
    )

    g = problem.block_skew_var(sizes) if spec.scaling == Scaling.DG else None
    return MultiplierVars(lam, g)


def multiplier_matrix(lam: np.ndarray, g: np.ndarray | None = None) -> np.ndarray:
    """
    Числовая матрица Π = [[Λ, 𝒢], [𝒢^T, -Λ]].
    """
    lam = np.atleast_2d(lam)
    g = np.zeros_like(lam) if g is None else np.atleast_2d(g)
    return np.block([[lam, g], [g.T, -lam]])


def supply_matrices(
    aug: AugmentedSystem,
    variables: MultiplierVars,
    gamma_sq: LmiExpression | float,
    sel: SelectionMatrices,
) -> tuple[LmiExpression, LmiExpression, LmiExpression]:
    """
    Строит блоки функции снабжения
    z̃^T z̃ - γ² w^T w + [q; p]^T Π [q; p] = [ξ; η]^T [[Q22, Q23], [⋆, Q33]] [ξ; η].

    Args:
        aug (AugmentedSystem): Расширенная система (используются C_aug, D_aug).
        variables (MultiplierVars): Λ и 𝒢 (переменные или значения).
        gamma_sq: γ̂ = γ², скалярная переменная 1×1 или число.
        sel (SelectionMatrices): Селекторы каналов.

    Raises:
        DimensionError: Если размеры не согласованы.

    Returns:
        tuple: Q22, Q23, Q33 как аффинные выражения от (Λ, 𝒢, γ̂).
    """
    n_zeta, n_eta = aug.c_aug.shape[0], aug.d_aug.shape[1]
    if sel.m_q.shape[1] != n_zeta or sel.e_p.shape[1] != n_eta:
        raise DimensionError(
            "селекторы", (n_zeta, n_eta), (sel.m_q.shape[1], sel.e_p.shape[1])
        )

    lam = LmiExpression.coerce(variables.lam)
    q_c, q_d = sel.m_q @ aug.c_aug, sel.m_q @ aug.d_aug
    z_c, z_d = sel.m_z @ aug.c_aug, sel.m_z @ aug.d_aug

    q22 = z_c.T @ z_c + congruence(lam, q_c)
    q23 = z_c.T @ z_d + q_c.T @ lam @ q_d
    if isinstance(gamma_sq, LmiExpression):
        performance = gamma_sq.times(sel.e_w.T @ sel.e_w)
    else:
        performance = float(gamma_sq) * (sel.e_w.T @ sel.e_w)
    q33 = (
        z_d.T @ z_d
        + congruence(lam, q_d)
        - performance
        - congruence(lam, sel.e_p)
    )

    if variables.g is not None:
        g = LmiExpression.coerce(variables.g)
        # перекрёстные члены q^T 𝒢 p + p^T 𝒢^T q
        q23 = q23 + q_c.T @ g @ sel.e_p
        q33 = q33 + he(q_d.T @ g @ sel.e_p)

    return q22, q23, q33
