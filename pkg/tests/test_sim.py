import math

import numpy as np
import pytest

from robust_observer_hub.core.exceptions import ConfigError, SimulationError
from robust_observer_hub.core.plants import QuatConfig, build_quaternion
from robust_observer_hub.core.sim import (
    SimConfig,
    TrajectoryStats,
    initial_estimate,
    monte_carlo,
    projector,
    rk4_step,
    simulate_linear,
    simulate_quaternion,
)

QUATERNION_GAIN = np.vstack([np.zeros((1, 3)), np.eye(3)])


def test_rk4_exponential_decay():
    x, dt = np.array([1.0]), 0.1
    for i in range(10):
        x = rk4_step(lambda t, s: -s, i * dt, x, dt)
    assert x[0] == pytest.approx(math.exp(-1.0), rel=1e-6)


def test_rk4_rejects_non_finite_state():
    with pytest.raises(SimulationError):
        rk4_step(lambda t, s: s * np.inf, 0.0, np.array([1.0]), 0.1)


def test_sim_config_validation():
    with pytest.raises(ConfigError):
        SimConfig(dt=0.0)
    with pytest.raises(ConfigError):
        SimConfig(t_final=1e-4, dt=1e-3)
    with pytest.raises(ConfigError):
        SimConfig(n_runs=0)
    with pytest.raises(ConfigError):
        SimConfig.from_mapping({"steps": 10})

    cfg = SimConfig.from_mapping({"t_final": 1.0, "dt": 0.01, "runs": 3}, seed=7)
    assert cfg.n_steps == 100
    assert cfg.times[-1] == pytest.approx(1.0)
    assert (cfg.n_runs, cfg.seed) == (3, 7)


def test_projector_annihilates_estimate(rng):
    q_hat = rng.normal(size=4)
    p = projector(q_hat)
    np.testing.assert_allclose(p @ q_hat, 0.0, atol=1e-12)
    np.testing.assert_allclose(p @ p, p, atol=1e-12)


def test_initial_estimate_is_unit_at_given_angle(rng):
    q0 = np.array([1.0, 0.0, 0.0, 0.0])
    q_hat = initial_estimate(q0, 0.2, rng)
    assert np.linalg.norm(q_hat) == pytest.approx(1.0)
    assert math.acos(q0 @ q_hat) == pytest.approx(0.2)


def test_quaternion_observer_converges_without_noise():
    cfg = SimConfig(t_final=10.0, dt=1e-2, noise_on=False)
    qcfg = QuatConfig()
    omega = np.array(qcfg.omega_bar)
    trajectory = simulate_quaternion(cfg, qcfg, QUATERNION_GAIN, lambda t: omega)

    norms = np.linalg.norm(trajectory.q, axis=1)
    np.testing.assert_allclose(norms, 1.0, atol=1e-9)
    assert trajectory.max_norm_drift < 1e-3
    assert trajectory.error_norms[-1] < 0.5 * trajectory.error_norms[0]


def test_quaternion_rejects_non_unit_start():
    cfg = SimConfig(t_final=0.1, dt=1e-2, noise_on=False)
    with pytest.raises(SimulationError):
        simulate_quaternion(
            cfg, QuatConfig(), QUATERNION_GAIN, lambda t: np.zeros(3), q0=[2.0, 0, 0, 0]
        )


def test_simulate_linear_is_deterministic(stable_plant):
    cfg = SimConfig(t_final=1.0, dt=1e-2, seed=5)
    gain = np.array([[1.0], [0.0]])
    xi0 = [1.0, 0.0, 1.0, 0.0]
    first = simulate_linear(stable_plant, gain, [0.3], cfg, xi0)
    second = simulate_linear(stable_plant, gain, [0.3], cfg, xi0)
    np.testing.assert_array_equal(first, second)
    assert first[0] == pytest.approx(1.0)
    assert first.shape == (cfg.n_steps + 1,)


def test_monte_carlo_percentiles(stable_plant):
    cfg = SimConfig(t_final=1.0, dt=1e-2, n_runs=6, seed=2)
    gain = np.array([[1.0], [0.0]])
    stats = monte_carlo(stable_plant, gain, cfg)
    assert isinstance(stats, TrajectoryStats)
    assert stats.final_norms.shape == (6,)
    assert np.all(stats.p5 <= stats.p50 + 1e-12)
    assert np.all(stats.p50 <= stats.p95 + 1e-12)

    repeated = monte_carlo(stable_plant, gain, cfg)
    np.testing.assert_array_equal(stats.final_norms, repeated.final_norms)

    columns, rows = stats.rows()
    assert columns == ["t", "p5", "p50", "p95"]
    assert len(rows) == cfg.n_steps + 1


def test_monte_carlo_quaternion_runs():
    cfg = SimConfig(t_final=0.5, dt=1e-2, n_runs=3)
    stats = monte_carlo(build_quaternion(), QUATERNION_GAIN, cfg, quat_cfg=QuatConfig())
    assert stats.p50.shape == (cfg.n_steps + 1,)
    assert np.all(np.isfinite(stats.p95))


def test_quaternion_estimate_stays_unit_with_gyro_noise():
    cfg = SimConfig(t_final=20.0, dt=1e-3, seed=11, noise_on=True)
    qcfg = QuatConfig()
    rng = np.random.default_rng(cfg.seed)
    omega = np.array(qcfg.omega_bar) + rng.uniform(
        -qcfg.delta_omega, qcfg.delta_omega, size=3
    )
    trajectory = simulate_quaternion(
        cfg, qcfg, QUATERNION_GAIN, lambda t: omega, rng=rng
    )

    assert trajectory.times[-1] == pytest.approx(20.0)
    assert trajectory.max_norm_drift <= 5e-5
    np.testing.assert_allclose(np.linalg.norm(trajectory.q, axis=1), 1.0, atol=5e-5)
