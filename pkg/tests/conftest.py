import json

import numpy as np
import pytest

# Пакет core импортируется раньше декораторов и CLI
from robust_observer_hub.core import RunConfig
from robust_observer_hub.core.plants import PLANT_MATRICES
from robust_observer_hub.core.ss_core import LftPlant, UncertaintyStructure
from robust_observer_hub.infra import ResultStore


def make_plant(a, block_sizes=(1,), b_p_scale=0.3, name="toy") -> LftPlant:
    """
    Объект с измерением первой координаты, неопределённостью в первой строке
    A и шумом измерения 0.1.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    n = a.shape[0]
    n_p = sum(block_sizes)
    b_p = np.zeros((n, n_p))
    b_p[0, :] = b_p_scale
    c_q = np.zeros((n_p, n))
    c_q[:, 0] = 1.0
    c_y = np.zeros((1, n))
    c_y[0, 0] = 1.0
    return LftPlant(
        a=a,
        b_p=b_p,
        b_w=np.hstack([np.eye(n), np.zeros((n, 1))]),
        c_q=c_q,
        c_z=np.eye(n),
        c_y=c_y,
        d_qp=np.zeros((n_p, n_p)),
        d_qw=np.zeros((n_p, n + 1)),
        d_yp=np.zeros((1, n_p)),
        d_yw=np.hstack([np.zeros((1, n)), [[0.1]]]),
        unc=UncertaintyStructure(tuple(block_sizes)),
        name=name,
    )


def write_plant_file(path, plant: LftPlant, **changes) -> str:
    """Сохраняет модель в JSON формате `load_plant_file`."""
    data = {name: getattr(plant, name).tolist() for name in PLANT_MATRICES}
    data["block_sizes"] = list(plant.unc.block_sizes)
    data.update(changes)
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)

@pytest.fixture
def stable_plant() -> LftPlant:
    """Устойчивый объект второго порядка с одним скалярным блоком."""
    return make_plant([[-1.0, 1.0], [0.0, -2.0]])


@pytest.fixture
def skew_plant() -> LftPlant:
    """Объект с кососимметричной A: собственные числа на мнимой оси."""
    return make_plant([[0.0, 1.0], [-1.0, 0.0]])


@pytest.fixture
def store(tmp_path) -> ResultStore:
    return ResultStore(str(tmp_path / "run"))


@pytest.fixture
def run_config(tmp_path) -> RunConfig:
    return RunConfig(output=str(tmp_path / "results"))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
