"""
Численное интегрирование, моделирование нелинейного наблюдателя
кватерниона с проекцией невязки и статистика ошибок по Монте-Карло.
"""

from collections.abc import Callable, Mapping
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, SimulationError
from .plants import QuatConfig, omega_matrix
from .ss_core import LftPlant, closed_error_system
from .utils import make_rng

# Допустимый уход нормы оценки кватерниона от единицы
NORM_DRIFT_LIMIT = 1e-3
PERCENTILES = (5, 50, 95)


@dataclass(frozen=True)
class SimConfig:
    """
    Параметры моделирования.

    Attributes:
        t_final (float): Горизонт, с.
        dt (float): Шаг интегрирования, с.
        seed (int): Зерно генераторов прогонов.
        n_runs (int): Число прогонов.
        noise_on (bool): Включить шумы измерений и гироскопа.
        init_angle (float): Расстояние между q(0) и q̂(0) на сфере, рад.
    """

    t_final: float = 20.0
    dt: float = 1e-3
    seed: int = 0
    n_runs: int = 50
    noise_on: bool = True
    init_angle: float = 0.2

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("шаг dt должен быть положительным")
        if not self.t_final >= self.dt:
            raise ConfigError("горизонт t_final должен быть не меньше dt")
        if self.n_runs < 1:
            raise ConfigError("число прогонов должно быть не меньше 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    @classmethod
    def from_mapping(cls, data: Mapping, seed: int = 0) -> "SimConfig":
        """
        Создаёт конфигурацию из секции [sim] (ключи `t_final`, `dt`, `runs`,
        `noise`, `init_angle`).
        """
        known = {"t_final", "dt", "runs", "noise", "init_angle"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(
                f"неизвестные ключи в секции [sim]: {', '.join(sorted(unknown))}"
            )
        return cls(
            t_final=float(data.get("t_final", cls.t_final)),
            dt=float(data.get("dt", cls.dt)),
            seed=seed,
            n_runs=int(data.get("runs", cls.n_runs)),
            noise_on=bool(data.get("noise", cls.noise_on)),
            init_angle=float(data.get("init_angle", cls.init_angle)),
        )


def rk4_step(
    f: Callable[[float, np.ndarray], np.ndarray], t: float, x: np.ndarray, dt: float
) -> np.ndarray:
    """
    Шаг классического метода Рунге-Кутты 4-го порядка.

    Raises:
        SimulationError: Если новое состояние содержит неконечные элементы.
    """
    k1 = f(t, x)
    k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2)
    k4 = f(t + dt, x + dt * k3)
    x_next = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(x_next)):
        raise SimulationError(f"неконечное состояние при t = {t + dt:g}")
    return x_next


def projector(q_hat: np.ndarray) -> np.ndarray:
    """
    Проектор на касательное пространство P = I - q̂q̂^T/‖q̂‖².
    """
    return np.eye(q_hat.size) - np.outer(q_hat, q_hat) / (q_hat @ q_hat)


def initial_estimate(q0: np.ndarray, angle: float, rng: np.random.Generator):
    """
    Единичный кватернион на расстоянии `angle` от q0 в случайном направлении.
    """
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    tangent = np.concatenate(([0.0], direction))
    tangent -= (tangent @ q0) * q0
    tangent /= np.linalg.norm(tangent)
    return np.cos(angle) * q0 + np.sin(angle) * tangent


@dataclass
class QuaternionTrajectory:
    times: np.ndarray
    q: np.ndarray
    q_hat: np.ndarray

    @property
    def error(self) -> np.ndarray:
        return self.q - self.q_hat

    @property
    def error_norms(self) -> np.ndarray:
        return np.linalg.norm(self.error, axis=1)

    @property
    def max_norm_drift(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.q_hat, axis=1) - 1.0)))


def simulate_quaternion(
    cfg: SimConfig,
    qcfg: QuatConfig,
    gain,
    omega_true: Callable[[float], np.ndarray],
    rng: np.random.Generator | None = None,
    q0=None,
    q_hat0=None,
    run_index: int | None = None,
) -> QuaternionTrajectory:
    """
    Моделирует кинематику q̇ = ½Ω(ω + n_ω)q и наблюдатель
    q̂̇ = ½Ω(ω̄)q̂ + P_q̂·L·(y - C_y q̂), y = C_y q + v. Проекция применяется на
    каждой стадии интегрирования. Шумы постоянны на шаге dt с дисперсией
    σ²/dt.

    Args:
        cfg (SimConfig): Параметры моделирования.
        qcfg (QuatConfig): Параметры примера.
        gain: Коэффициент L размера 4×3.
        omega_true: Истинная угловая скорость ω(t).
        rng (np.random.Generator, optional): Генератор шумов и q̂(0).
        q0 (optional): Начальный кватернион, по умолчанию [1, 0, 0, 0].
        q_hat0 (optional): Начальная оценка; по умолчанию на расстоянии
            `cfg.init_angle` от q0.
        run_index (int, optional): Номер прогона для сообщений об ошибках.

    Raises:
        SimulationError: При неконечном состоянии или уходе ‖q̂‖ от 1 больше
        чем на 1e-3.

    Returns:
        QuaternionTrajectory: Траектории q и q̂.
    """
    rng = rng or make_rng(cfg.seed)
    gain = np.asarray(gain, dtype=float)
    c_y = np.hstack([np.zeros((3, 1)), np.eye(3)])
    observer_a = 0.5 * omega_matrix(qcfg.omega_bar)

    q = np.array([1.0, 0.0, 0.0, 0.0]) if q0 is None else np.asarray(q0, float)
    if abs(np.linalg.norm(q) - 1.0) > 1e-12:
        raise SimulationError("начальный кватернион должен быть единичным", run_index)
    if q_hat0 is None:
        q_hat = initial_estimate(q, cfg.init_angle, rng)
    else:
        q_hat = np.asarray(q_hat0, dtype=float)

    times = cfg.times
    qs = np.empty((times.size, 4))
    q_hats = np.empty((times.size, 4))
    qs[0], q_hats[0] = q, q_hat
    gyro_std = qcfg.sigma_gyro / np.sqrt(cfg.dt)
    meas_std = qcfg.sigma_meas / np.sqrt(cfg.dt)

    for i, t in enumerate(times[:-1]):
        if cfg.noise_on:
            n_omega = gyro_std * rng.normal(size=3)
            v = meas_std * rng.normal(size=3)
        else:
            n_omega, v = np.zeros(3), np.zeros(3)

        # состояние [q; q̂], шумы постоянны на шаге
        def vector_field(s: float, state: np.ndarray) -> np.ndarray:
            q_s, q_hat_s = state[:4], state[4:]
            q_dot = 0.5 * omega_matrix(omega_true(s) + n_omega) @ q_s
            innovation = c_y @ q_s + v - c_y @ q_hat_s
            q_hat_dot = observer_a @ q_hat_s + projector(q_hat_s) @ gain @ innovation
            return np.concatenate([q_dot, q_hat_dot])

        try:
            state = rk4_step(vector_field, t, np.concatenate([q, q_hat]), cfg.dt)
        except SimulationError as e:
            raise SimulationError(str(e), run_index) from None
        q, q_hat = state[:4], state[4:]

        drift = abs(np.linalg.norm(q_hat) - 1.0)
        if drift > NORM_DRIFT_LIMIT:
            raise SimulationError(
                f"норма оценки ушла от единицы на {drift:.3e} при t = {t:g}",
                run_index,
            )
        qs[i + 1], q_hats[i + 1] = q, q_hat

    return QuaternionTrajectory(times, qs, q_hats)


def simulate_linear(
    plant: LftPlant,
    gain,
    deltas,
    cfg: SimConfig,
    xi0,
    rng: np.random.Generator | None = None,
    run_index: int | None = None,
) -> np.ndarray:
    """
    Интегрирует замкнутую систему ошибки ξ̇ = A_cl ξ + B_cl w при замороженной
    Δ и возвращает нормы ошибки ‖e(t)‖.
    """
    closed = closed_error_system(plant, gain, deltas)
    rng = rng or make_rng(cfg.seed)
    w_std = 1.0 / np.sqrt(cfg.dt)
    xi = np.asarray(xi0, dtype=float)
    norms = np.empty(cfg.n_steps + 1)
    norms[0] = np.linalg.norm(xi[plant.n :])

    for i, t in enumerate(cfg.times[:-1]):
        if cfg.noise_on:
            w = w_std * rng.normal(size=plant.n_w)
        else:
            w = np.zeros(plant.n_w)
        try:
            xi = rk4_step(lambda s, x: closed.a @ x + closed.b @ w, t, xi, cfg.dt)
        except SimulationError as e:
            raise SimulationError(str(e), run_index) from None
        norms[i + 1] = np.linalg.norm(xi[plant.n :])

    return norms


@dataclass
class TrajectoryStats:
    """
    Перцентили (5, 50, 95) нормы ошибки ‖e(t)‖₂ по прогонам.
    """

    times: np.ndarray
    p5: np.ndarray
    p50: np.ndarray
    p95: np.ndarray
    final_norms: np.ndarray

    @classmethod
    def from_norms(cls, times: np.ndarray, norms: np.ndarray) -> "TrajectoryStats":
        p5, p50, p95 = np.percentile(norms, PERCENTILES, axis=0)
        return cls(times, p5, p50, p95, norms[:, -1].copy())

    def rows(self) -> tuple[list[str], list[list[float]]]:
        columns = ["t", "p5", "p50", "p95"]
        rows = np.column_stack([self.times, self.p5, self.p50, self.p95]).tolist()
        return columns, rows


def monte_carlo(
    plant: LftPlant,
    gain,
    cfg: SimConfig,
    quat_cfg: QuatConfig | None = None,
    x0=None,
    x_hat0=None,
) -> TrajectoryStats:
    """
    Моделирует `cfg.n_runs` прогонов с замороженной неопределённостью,
    выбранной равномерно в кубе. Для кватерниона (задан `quat_cfg`)
    используется нелинейная кинематика, иначе линейная замкнутая система
    ошибки. Генератор прогона выводится из пары (seed, номер прогона).

    Args:
        plant (LftPlant): Модель объекта.
        gain: Коэффициент наблюдателя L.
        cfg (SimConfig): Параметры моделирования.
        quat_cfg (QuatConfig, optional): Параметры кватерниона.
        x0 (optional): Начальное состояние объекта (линейный случай),
            по умолчанию e_1.
        x_hat0 (optional): Начальная оценка (линейный случай), по умолчанию 0.

    Raises:
        SimulationError: С номером прогона, на котором произошёл сбой.

    Returns:
        TrajectoryStats: Полосы перцентилей и конечные нормы.
    """
    norms = np.empty((cfg.n_runs, cfg.n_steps + 1))

    if x0 is None:
        x0 = np.zeros(plant.n)
        x0[0] = 1.0
    x0 = np.asarray(x0, dtype=float)
    x_hat0 = np.zeros(plant.n) if x_hat0 is None else np.asarray(x_hat0, float)
    xi0 = np.concatenate([x0, x0 - x_hat0])

    for run in range(cfg.n_runs):
        rng = make_rng(cfg.seed, run)
        deltas = plant.unc.sample(rng)

        if quat_cfg is not None:
            omega = np.array(quat_cfg.omega_bar) + quat_cfg.delta_omega * deltas
            trajectory = simulate_quaternion(
                cfg, quat_cfg, gain, lambda t: omega, rng, run_index=run
            )
            norms[run] = trajectory.error_norms
        else:
            norms[run] = simulate_linear(
                plant, gain, deltas, cfg, xi0, rng, run_index=run
            )

    return TrajectoryStats.from_norms(cfg.times, norms)
