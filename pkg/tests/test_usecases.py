import csv
import json
import math

import pytest

from robust_observer_hub.core import RunConfig, cmd_damping, cmd_synthesize, cmd_table
from robust_observer_hub.core import usecases
from robust_observer_hub.core.damping import DampingSearchConfig
from robust_observer_hub.core.synthesis import (
    Formulation,
    SynthesisResult,
    Verdict,
    VerificationResult,
)
from robust_observer_hub.core.usecases import (
    TABLES,
    SynthesisOutcome,
    TableRow,
    _deviates,
    _table_entry,
)
from robust_observer_hub.solver_service import SolverStatus

from .conftest import write_plant_file


def outcome(formulation, gamma_syn, gamma_ver, verdict=Verdict.VALID):
    return SynthesisOutcome(
        SynthesisResult(formulation, SolverStatus.OPTIMAL, gamma_syn=gamma_syn),
        VerificationResult(SolverStatus.OPTIMAL, gamma_ver=gamma_ver),
        verdict,
    )


def test_deviates():
    assert not _deviates(0.52, 0.5)
    assert _deviates(0.6, 0.5)
    assert _deviates(math.nan, 0.5)
    assert not _deviates(math.nan, None)


def test_table_entry_flags():
    row = TableRow(
        "Blkdiag full", Formulation.BLKDIAG, "d-full", 0.897, 0.897, Verdict.VALID
    )
    assert _table_entry(row, outcome(Formulation.BLKDIAG, 0.9, 0.9), "")["flag"] == ""

    entry = _table_entry(row, outcome(Formulation.BLKDIAG, 0.7, 0.95), "")
    assert entry["flag"] == "DEVIATION"

    failed = outcome(Formulation.BLKDIAG, 0.9, math.nan, Verdict.INVALID)
    assert _table_entry(row, failed, "")["flag"] == "PATTERN+DEVIATION"

    error = _table_entry(row, None, "SolverError: сбой")
    assert error["flag"] == "ERROR"
    assert error["status"] == "error"


def test_outcome_summary():
    result = outcome(Formulation.FINSLER, 0.8, 0.808)
    assert result.gamma_ref == pytest.approx(0.808)
    summary = result.summary()
    assert summary["ratio"] == pytest.approx(1.01)
    assert summary["verdict"] == "valid"
    assert summary["diagnostics"] is None


def test_cmd_table_writes_flagged_rows(monkeypatch, run_config):
    def fake_run_synthesis(config, setup, alpha):
        if config.multiplier == "d-full" and config.formulation == Formulation.FINSLER:
            raise RuntimeError("сбой")
        return outcome(config.formulation, 0.5, 0.5)

    monkeypatch.setattr(usecases, "run_synthesis", fake_run_synthesis)
    entries = cmd_table(2, run_config)

    flags = {entry["row"]: entry["flag"] for entry in entries}
    assert flags == {
        "Nominal": "",
        "Blkdiag scalar": "PATTERN",
        "Blkdiag full": "DEVIATION",
        "Finsler scalar": "DEVIATION",
        "Finsler full": "ERROR",
    }

    path = f"{run_config.output}/table2/table2.csv"
    with open(path, encoding="utf-8") as csv_file:
        lines = [line for line in csv_file if not line.startswith("#")]
    rows = list(csv.DictReader(lines))
    assert len(rows) == len(TABLES[2][1])
    assert rows[-1]["error"] == "RuntimeError: сбой"


def test_cmd_synthesize_alpha_search(tmp_path, stable_plant):
    config = RunConfig(
        plant=write_plant_file(tmp_path / "toy.json", stable_plant),
        formulation="nominal",
        alpha="search",
        output=str(tmp_path / "results"),
    )
    result = cmd_synthesize(config)
    assert result.synthesis.alpha == 0.0
    assert result.verdict == Verdict.VALID

    saved = tmp_path / "results" / "synthesize-toy-nominal" / "result.json"
    data = json.loads(saved.read_text(encoding="utf-8"))
    assert data["gamma_syn"] == pytest.approx(result.synthesis.gamma_syn)
    assert len(data["gain"]) == stable_plant.n


def test_cmd_damping(tmp_path, stable_plant):
    config = RunConfig(
        plant=write_plant_file(tmp_path / "toy.json", stable_plant),
        formulation="nominal",
        output=str(tmp_path / "results"),
        damping=DampingSearchConfig(alpha_max=0.5, tol_alpha=0.05),
    )
    result = cmd_damping(config)
    assert result.alpha_min == 0.0
    assert 0.0 <= result.alpha_star <= 0.5
    assert math.isfinite(result.gamma_actual_star)
    assert (tmp_path / "results" / "damping-toy-nominal" / "damping.csv").is_file()
