import os

import pytest

from robust_observer_hub.core import RunConfig
from robust_observer_hub.core.damping import DampingObjective
from robust_observer_hub.core.exceptions import ConfigError
from robust_observer_hub.core.models import ALPHA_SEARCH
from robust_observer_hub.core.multipliers import LambdaKind, Scaling
from robust_observer_hub.core.synthesis import Formulation

CONFIG_TEXT = """
[run]
plant = "quaternion"
formulation = "blkdiag"
multiplier = "dg-scalar"
alpha = 0.15
samples = 50
seed = 3

[quaternion]
delta_omega = 0.1

[sim]
t_final = 2.0
dt = 0.01
runs = 4
noise = false

[damping]
alpha_max = 0.5
objective = "gamma_cert"
"""


def write_config(tmp_path, text: str) -> str:
    path = tmp_path / "run.toml"
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_load_full_config(tmp_path):
    config = RunConfig.load(write_config(tmp_path, CONFIG_TEXT))
    assert config.plant == "quaternion"
    assert config.formulation == Formulation.BLKDIAG
    assert config.alpha == pytest.approx(0.15)
    assert (config.samples, config.seed) == (50, 3)
    assert config.quaternion.delta_omega == pytest.approx(0.1)
    assert (config.sim.n_runs, config.sim.seed, config.sim.noise_on) == (4, 3, False)
    assert config.damping.alpha_max == pytest.approx(0.5)
    assert config.damping.objective == DampingObjective.GAMMA_CERT


def test_overrides_take_precedence(tmp_path):
    overrides = {"alpha": "search", "runs": "7", "samples": "10", "dt": "0.02"}
    config = RunConfig.load(write_config(tmp_path, CONFIG_TEXT), overrides)
    assert config.alpha == ALPHA_SEARCH
    assert config.samples == 10
    assert config.sim.n_runs == 7
    assert config.sim.dt == pytest.approx(0.02)


def test_defaults_without_file():
    config = RunConfig.load()
    assert config.plant == "mck"
    assert config.formulation == Formulation.FINSLER
    assert config.alpha is None


@pytest.mark.parametrize(
    "text",
    [
        "[solver]\nname = 'scs'\n",
        "[run]\nmode = 'fast'\n",
        "[run]\nsamples = 'many'\n",
        "[run]\nformulation = 'lyapunov'\n",
        "[run]\nalpha = -0.5\n",
        "[mck]\nm0 = 5.0\n",
        "[sim]\nsteps = 10\n",
        "[damping]\nobjective = 'speed'\n",
        "[run\nplant = 'mck'\n",
    ],
)
def test_invalid_configs(tmp_path, text):
    with pytest.raises(ConfigError):
        RunConfig.load(write_config(tmp_path, text))


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.load(str(tmp_path / "absent.toml"))


def test_run_dir_and_multiplier(tmp_path):
    config = RunConfig(
        plant="mck", formulation="blkdiag", multiplier="d-full", output=str(tmp_path)
    )
    assert config.run_dir("synthesize") == os.path.join(
        str(tmp_path), "synthesize-mck-blkdiag-d-full"
    )
    assert config.run_dir("validate", with_design=False) == os.path.join(
        str(tmp_path), "validate-mck"
    )

    setup = config.plant_setup()
    spec = config.multiplier_spec(setup)
    assert (spec.scaling, spec.lambda_kind) == (Scaling.D, LambdaKind.FULL_PER_BLOCK)
    cfg = config.synthesis_config(setup, 0.2)
    assert cfg.alpha == pytest.approx(0.2)
    assert cfg.multiplier == spec


def test_nominal_has_no_multiplier(tmp_path):
    config = RunConfig(formulation="nominal", output=str(tmp_path))
    assert config.multiplier_spec(config.plant_setup()) is None
    assert config.run_dir("synthesize").endswith("synthesize-mck-nominal")


def test_plant_label_from_path(tmp_path):
    config = RunConfig(plant=str(tmp_path / "models" / "toy.json"))
    assert config.plant_label == "toy"


def test_to_dict_is_serializable():
    data = RunConfig(alpha=ALPHA_SEARCH).to_dict()
    assert data["formulation"] == "finsler"
    assert data["alpha"] == "search"
    assert data["damping"]["objective"] == "gamma_actual"
    assert data["sim"]["n_runs"] == 50
