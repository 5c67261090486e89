"""
LFT-модели двух примеров (кинематика кватерниона и система масса-пружина-
демпфер), загрузка внешней модели из JSON и проверка LFT прямой
подстановкой параметров.
"""

import json
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field, fields
from enum import StrEnum

import numpy as np
from scipy.optimize import brentq

from .exceptions import ConfigError, DimensionError
from .ss_core import LftPlant, UncertaintyStructure, freeze_uncertainty
from .utils import make_rng

PLANT_MATRICES = (
    "a",
    "b_p",
    "b_w",
    "c_q",
    "c_z",
    "c_y",
    "d_qp",
    "d_qw",
    "d_yp",
    "d_yw",
)


class PlantName(StrEnum):
    MCK = "mck"
    QUATERNION = "quaternion"


def _check_fields(cls, data: Mapping, section: str):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(
            f"неизвестные ключи в секции [{section}]: {', '.join(sorted(unknown))}"
        )


@dataclass(frozen=True)
class QuatConfig:
    """
    Параметры примера с кватернионом.

    Attributes:
        omega_bar (tuple[float, float, float]): Номинальная угловая скорость,
            рад/с.
        delta_omega (float): Полуширина неопределённости каждой компоненты, рад/с.
        sigma_gyro (float): Интенсивность шума гироскопа.
        sigma_meas (float): Интенсивность шума измерения.
    """

    omega_bar: tuple[float, float, float] = (0.05, 0.02, 0.05)
    delta_omega: float = 0.20
    sigma_gyro: float = 0.001
    sigma_meas: float = 0.01

    def __post_init__(self):
        omega_bar = tuple(float(v) for v in self.omega_bar)
        if len(omega_bar) != 3:
            raise ConfigError("omega_bar должен содержать три компоненты")
        object.__setattr__(self, "omega_bar", omega_bar)
        for name in ("delta_omega", "sigma_gyro", "sigma_meas"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} должен быть положительным")

    @classmethod
    def from_mapping(cls, data: Mapping) -> "QuatConfig":
        _check_fields(cls, data, "quaternion")
        return cls(**data)


@dataclass(frozen=True)
class MckConfig:
    """
    Параметры системы масса-пружина-демпфер m·q̈ + c·q̇ + k·q = w с
    ускорением в качестве измерения.

    `cq_norm` задаёт спектральную норму C_q: вторые копии каналов c и k
    (входящие только в измерение) масштабируются весом s в C_q и 1/s в D_yp.
    При `cq_norm = None` вес равен единице.
    """

    m0: float = 1.0
    c0: float = 0.5
    k0: float = 2.0
    m_range: tuple[float, float] = (0.8, 1.2)
    c_range: tuple[float, float] = (0.3, 0.8)
    k_range: tuple[float, float] = (1.5, 2.6)
    cq_norm: float | None = 0.86

    def __post_init__(self):
        for name in ("m", "c", "k"):
            lo, hi = (float(v) for v in getattr(self, f"{name}_range"))
            nominal = float(getattr(self, f"{name}0"))
            if not 0 < lo < hi:
                raise ConfigError(f"{name}_range должен быть положительным интервалом")
            if not lo <= nominal <= hi:
                raise ConfigError(f"{name}0 = {nominal} вне интервала [{lo}, {hi}]")
            object.__setattr__(self, f"{name}_range", (lo, hi))
        if self.cq_norm is not None and not self.cq_norm > 0:
            raise ConfigError("cq_norm должен быть положительным")

    @classmethod
    def from_mapping(cls, data: Mapping) -> "MckConfig":
        _check_fields(cls, data, "mck")
        return cls(**data)

    @staticmethod
    def _center(interval: tuple[float, float]) -> tuple[float, float]:
        lo, hi = interval
        return 0.5 * (lo + hi), 0.5 * (hi - lo)

    @property
    def m_mid_weight(self) -> tuple[float, float]:
        """Середина m_mid и относительная полуширина w_m: m = m_mid(1 + w_m·δ_m)."""
        mid, half = self._center(self.m_range)
        return mid, half / mid

    @property
    def c_mid_half(self) -> tuple[float, float]:
        return self._center(self.c_range)

    @property
    def k_mid_half(self) -> tuple[float, float]:
        return self._center(self.k_range)


def omega_matrix(omega) -> np.ndarray:
    """
    Матрица Ω(ω) кинематики q̇ = ½·Ω(ω)·q для q = [q0; q_v].
    """
    wx, wy, wz = np.asarray(omega, dtype=float)
    return np.array(
        [
            [0.0, -wx, -wy, -wz],
            [wx, 0.0, wz, -wy],
            [wy, -wz, 0.0, wx],
            [wz, wy, -wx, 0.0],
        ]
    )


def gyro_noise_matrix(q=(1.0, 0.0, 0.0, 0.0)) -> np.ndarray:
    """
    Матрица B_ω(q) входа шума гироскопа: q̇ = ½·Ω(ω)q + B_ω(q)·n_ω.
    """
    q0, q1, q2, q3 = np.asarray(q, dtype=float)
    return 0.5 * np.array(
        [
            [-q1, -q2, -q3],
            [q0, -q3, q2],
            [q3, q0, -q1],
            [-q2, q1, q0],
        ]
    )


def build_quaternion(cfg: QuatConfig | None = None) -> LftPlant:
    """
    Строит LFT кинематики кватерниона с неопределённой угловой скоростью
    ω = ω̄ + δ_ω·δ, |δ_i| ≤ 1. Неопределённость Δ = blkdiag(δ_1 I_4, δ_2 I_4,
    δ_3 I_4), измеряется векторная часть кватерниона, вход
    w = [n_ω; v] ∈ R^6.

    Args:
        cfg (QuatConfig, optional): Параметры примера.

    Returns:
        LftPlant: Модель с n = 4, n_p = n_q = 12, n_w = 6, n_y = 3.
    """
    cfg = cfg or QuatConfig()
    basis = np.eye(3)

    b_p = 0.5 * cfg.delta_omega * np.hstack([omega_matrix(e) for e in basis])
    c_q = np.vstack([np.eye(4)] * 3)
    c_y = np.hstack([np.zeros((3, 1)), np.eye(3)])
    b_w = np.hstack([cfg.sigma_gyro * gyro_noise_matrix(), np.zeros((4, 3))])
    d_yw = np.hstack([np.zeros((3, 3)), cfg.sigma_meas * np.eye(3)])

    return LftPlant(
        a=0.5 * omega_matrix(cfg.omega_bar),
        b_p=b_p,
        b_w=b_w,
        c_q=c_q,
        c_z=np.eye(4),
        c_y=c_y,
        d_qp=np.zeros((12, 12)),
        d_qw=np.zeros((12, 6)),
        d_yp=np.zeros((3, 12)),
        d_yw=d_yw,
        unc=UncertaintyStructure((4, 4, 4)),
        name=PlantName.QUATERNION,
    )


def build_mck(cfg: MckConfig | None = None) -> LftPlant:
    """
    Строит LFT системы масса-пружина-демпфер с центром в серединах
    интервалов. Каналы p = [p_m, p_c1, p_c2, p_k1, p_k2] со структурой
    (1, 2, 2): зависимость 1/m реализована обратной связью (D_qp ≠ 0), а δ_c
    и δ_k входят отдельными каналами в динамику и в измерение ускорения.
    Полуширины c и k размещены в C_q, копии для измерения взвешены так, чтобы
    ‖C_q‖₂ = `cfg.cq_norm`.

    Args:
        cfg (MckConfig, optional): Параметры примера.

    Returns:
        LftPlant: Модель с n = 2, n_p = n_q = 5, n_w = 1, n_y = 1.
    """
    cfg = cfg or MckConfig()
    m_mid, w_m = cfg.m_mid_weight
    c_mid, c_h = cfg.c_mid_half
    k_mid, k_h = cfg.k_mid_half

    # ẋ2 = (w - c_mid·x2 - k_mid·x1 - p_c1 - p_k1)/m_mid - p_m
    accel_x = np.array([[-k_mid, -c_mid]]) / m_mid
    accel_p = np.array([[-m_mid, -1.0, 0.0, -1.0, 0.0]]) / m_mid
    # измерение использует вторые копии каналов c и k
    meas_p = np.array([[-m_mid, 0.0, -1.0, 0.0, -1.0]]) / m_mid
    accel_w = np.array([[1.0 / m_mid]])

    a = np.vstack([[0.0, 1.0], accel_x])
    b_p = np.vstack([np.zeros((1, 5)), accel_p])
    b_w = np.vstack([[0.0], accel_w])

    # q_m = w_m·ẋ2, q_c = c_h·x2, q_k = k_h·x1; копии для измерения с весом s
    def output_matrix(s: float) -> np.ndarray:
        return np.vstack(
            [w_m * accel_x, [0.0, c_h], [0.0, s * c_h], [k_h, 0.0], [s * k_h, 0.0]]
        )

    weight = _copy_weight(output_matrix, cfg.cq_norm)
    c_q = output_matrix(weight)
    meas_p[0, [2, 4]] /= weight
    d_qp = np.vstack([w_m * accel_p, np.zeros((4, 5))])
    d_qw = np.vstack([w_m * accel_w, np.zeros((4, 1))])

    return LftPlant(
        a=a,
        b_p=b_p,
        b_w=b_w,
        c_q=c_q,
        c_z=np.eye(2),
        c_y=accel_x,
        d_qp=d_qp,
        d_qw=d_qw,
        d_yp=meas_p,
        d_yw=accel_w,
        unc=UncertaintyStructure((1, 2, 2)),
        name=PlantName.MCK,
    )


def _copy_weight(output_matrix: Callable[[float], np.ndarray], target) -> float:
    """
    Вес s > 0 копий каналов, при котором ‖C_q(s)‖₂ = target. Норма растёт
    по s, поэтому корень ищется методом Брента.
    """
    if target is None:
        return 1.0

    def residual(s: float) -> float:
        return float(np.linalg.norm(output_matrix(s), 2)) - target

    floor = residual(0.0)
    if floor >= 0.0:
        raise ConfigError(
            f"cq_norm = {target} недостижима: норма без копий {floor + target:.4f}"
        )
    upper = 1.0
    while residual(upper) < 0.0:
        upper *= 2.0
    return float(brentq(residual, 0.0, upper, xtol=1e-12))


def mck_parameters_to_delta(cfg: MckConfig, m: float, c: float, k: float) -> np.ndarray:
    """
    Переводит физические параметры (m, c, k) в нормированные δ = (δ_m, δ_c, δ_k).
    """
    m_mid, w_m = cfg.m_mid_weight
    c_mid, c_h = cfg.c_mid_half
    k_mid, k_h = cfg.k_mid_half
    return np.array([(m / m_mid - 1.0) / w_m, (c - c_mid) / c_h, (k - k_mid) / k_h])


def mck_delta_to_parameters(cfg: MckConfig, deltas) -> tuple[float, float, float]:
    m_mid, w_m = cfg.m_mid_weight
    c_mid, c_h = cfg.c_mid_half
    k_mid, k_h = cfg.k_mid_half
    d_m, d_c, d_k = np.asarray(deltas, dtype=float)
    return m_mid * (1.0 + w_m * d_m), c_mid + c_h * d_c, k_mid + k_h * d_k


def quaternion_omega_to_delta(cfg: QuatConfig, omega) -> np.ndarray:
    """
    Переводит угловую скорость ω в нормированные δ = (ω - ω̄)/δ_ω.
    """
    return (np.asarray(omega, dtype=float) - np.array(cfg.omega_bar)) / cfg.delta_omega


def mck_parametric(cfg: MckConfig, deltas) -> dict[str, np.ndarray]:
    """
    Прямая подстановка параметров: A, B_w, C_y, D_yw системы масса-пружина-
    демпфер при заданных δ.
    """
    m, c, k = mck_delta_to_parameters(cfg, deltas)
    return {
        "a": np.array([[0.0, 1.0], [-k / m, -c / m]]),
        "b_w": np.array([[0.0], [1.0 / m]]),
        "c_y": np.array([[-k / m, -c / m]]),
        "d_yw": np.array([[1.0 / m]]),
    }


def quaternion_parametric(cfg: QuatConfig, deltas) -> dict[str, np.ndarray]:
    """
    Прямая подстановка ω = ω̄ + δ_ω·δ в кинематику кватерниона.
    """
    omega = np.array(cfg.omega_bar) + cfg.delta_omega * np.asarray(deltas, dtype=float)
    return {
        "a": 0.5 * omega_matrix(omega),
        "b_w": np.hstack([cfg.sigma_gyro * gyro_noise_matrix(), np.zeros((4, 3))]),
        "c_y": np.hstack([np.zeros((3, 1)), np.eye(3)]),
        "d_yw": np.hstack([np.zeros((3, 3)), cfg.sigma_meas * np.eye(3)]),
    }


@dataclass
class OracleReport:
    """
    Результат сравнения замыкания LFT с прямой подстановкой параметров.
    """

    n_samples: int
    max_error: float
    tol: float
    worst_delta: list[float] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tol


def lft_oracle_check(
    plant: LftPlant,
    parametric_eval: Callable[[np.ndarray], dict[str, np.ndarray]],
    n_samples: int = 100,
    tol: float = 1e-10,
    seed: int = 0,
) -> OracleReport:
    """
    Сравнивает замыкание F_u(M, Δ) с прямой подстановкой параметров во всех
    вершинах и в `n_samples` случайных точках куба δ.

    Args:
        plant (LftPlant): Проверяемая модель.
        parametric_eval: Функция δ ↦ словарь матриц `a`, `b_w`, `c_y`, `d_yw`.
        n_samples (int, optional): Число случайных точек.
        tol (float, optional): Допустимая максимальная поэлементная ошибка.
        seed (int, optional): Зерно генератора.

    Returns:
        OracleReport: Максимальная ошибка и точка, где она достигнута.
    """
    rng = make_rng(seed)
    samples = list(plant.unc.vertices())
    samples += [plant.unc.sample(rng) for _ in range(n_samples)]
    max_error, worst = 0.0, []

    for deltas in samples:
        frozen = freeze_uncertainty(plant, deltas)
        expected = parametric_eval(deltas)
        error = max(
            float(np.max(np.abs(getattr(frozen, name) - matrix)))
            for name, matrix in expected.items()
        )
        if error > max_error:
            max_error, worst = error, deltas.tolist()

    return OracleReport(len(samples), max_error, tol, worst)


def load_plant_file(file_path: str) -> LftPlant:
    """
    Загружает модель из JSON файла с десятью матрицами (`a`, `b_p`, `b_w`,
    `c_q`, `c_z`, `c_y`, `d_qp`, `d_qw`, `d_yp`, `d_yw`) и списком
    `block_sizes`.

    Raises:
        ConfigError: Если файл не найден, не является JSON или в нём нет
        нужных ключей либо размеры не согласованы.
    """
    try:
        with open(file_path, encoding="utf-8") as plant_file:
            data = json.load(plant_file)
    except FileNotFoundError:
        raise ConfigError(f"файл модели '{file_path}' не найден") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"файл модели '{file_path}' не является JSON: {e}") from None

    missing = [key for key in (*PLANT_MATRICES, "block_sizes") if key not in data]
    if missing:
        raise ConfigError(f"в файле модели нет ключей: {', '.join(missing)}")

    try:
        return LftPlant(
            **{name: np.asarray(data[name], dtype=float) for name in PLANT_MATRICES},
            unc=UncertaintyStructure(tuple(data["block_sizes"])),
            name=str(data.get("name", file_path)),
        )
    except (DimensionError, ValueError) as e:
        raise ConfigError(f"некорректная модель в '{file_path}': {e}") from None


@dataclass(frozen=True)
class PlantSetup:
    """
    Модель вместе с параметрами эксперимента: точка номинального синтеза,
    демпфирование для синтеза и сдвиг системы при валидации.
    """

    plant: LftPlant
    nominal_delta: np.ndarray
    design_alpha: float = 0.0
    validation_shift: float = 0.0
    parametric_eval: Callable[[np.ndarray], dict[str, np.ndarray]] | None = None


# Демпфирование, при котором синтезируются наблюдатели для кватерниона
QUATERNION_ALPHA = 0.15


def get_plant_setup(
    name: str,
    quat_cfg: QuatConfig | None = None,
    mck_cfg: MckConfig | None = None,
) -> PlantSetup:
    """
    Возвращает модель по имени (`mck`, `quaternion`) или по пути к JSON файлу.
    """
    match name:
        case PlantName.MCK:
            cfg = mck_cfg or MckConfig()
            return PlantSetup(
                build_mck(cfg),
                mck_parameters_to_delta(cfg, cfg.m0, cfg.c0, cfg.k0),
                parametric_eval=lambda deltas: mck_parametric(cfg, deltas),
            )
        case PlantName.QUATERNION:
            cfg = quat_cfg or QuatConfig()
            return PlantSetup(
                build_quaternion(cfg),
                np.zeros(3),
                design_alpha=QUATERNION_ALPHA,
                validation_shift=QUATERNION_ALPHA,
                parametric_eval=lambda deltas: quaternion_parametric(cfg, deltas),
            )
        case path if path.endswith(".json"):
            plant = load_plant_file(path)
            return PlantSetup(plant, np.zeros(plant.unc.n_blocks))
        case _:
            raise ConfigError(
                f"неизвестная модель '{name}', допустимы: mck, quaternion, *.json"
            )
