import math

import numpy as np
import pytest

from robust_observer_hub.core.analysis import hinf_norm
from robust_observer_hub.core.exceptions import ConfigError, DimensionError
from robust_observer_hub.core.multipliers import (
    LambdaKind,
    MultiplierSpec,
    MultiplierVars,
    Scaling,
)
from robust_observer_hub.core.plants import (
    QUATERNION_ALPHA,
    build_mck,
    build_quaternion,
    get_plant_setup,
)
from robust_observer_hub.core.ss_core import closed_error_system
from robust_observer_hub.core.synthesis import (
    Formulation,
    GammaSearch,
    SynthesisConfig,
    SynthesisResult,
    Verdict,
    VerificationResult,
    analysis_lmi,
    certificate_verdict,
    synth_nominal,
    synthesize,
    verify,
)
from robust_observer_hub.solver_service import SolverStatus


def _spec(plant, name: str) -> MultiplierSpec:
    return MultiplierSpec.from_name(name, plant.unc)


def test_synthesis_config_validation(stable_plant):
    spec = _spec(stable_plant, "d-full")
    with pytest.raises(ConfigError):
        SynthesisConfig(Formulation.BLKDIAG, spec, alpha=-0.1)
    with pytest.raises(ConfigError):
        SynthesisConfig(Formulation.FINSLER, spec, eps_g=0.0)
    with pytest.raises(ConfigError):
        SynthesisConfig(Formulation.FINSLER)
    assert SynthesisConfig("nominal").formulation == Formulation.NOMINAL


def test_nominal_synthesis_bounds_error_norm(stable_plant):
    result = synth_nominal(stable_plant)
    assert result.is_optimal
    assert result.gain.shape == (stable_plant.n, stable_plant.n_y)
    assert set(result.certificate) == {"P", "W"}

    norm = hinf_norm(closed_error_system(stable_plant, result.gain, [0.0]))
    assert norm <= result.gamma_syn * (1.0 + 1e-3)


def test_nominal_verification_matches_synthesis(stable_plant):
    result = synth_nominal(stable_plant)
    verification = verify(stable_plant, result.gain, None)
    assert verification.is_optimal
    assert verification.gamma_ver <= result.gamma_syn * 1.01
    assert certificate_verdict(result, verification) == Verdict.VALID


def test_bisection_agrees_with_minimization(stable_plant):
    direct = synth_nominal(stable_plant)
    bisected = synth_nominal(stable_plant, gamma_search=GammaSearch.BISECT)
    assert bisected.is_optimal
    assert bisected.gamma_syn == pytest.approx(direct.gamma_syn, rel=1e-3)


def test_blkdiag_infeasible_for_marginal_dynamics(skew_plant):
    cfg = SynthesisConfig(Formulation.BLKDIAG, _spec(skew_plant, "d-scalar"))
    result = synthesize(skew_plant, cfg)
    assert result.status == SolverStatus.INFEASIBLE
    assert result.gain is None
    assert math.isnan(result.gamma_syn)
    failed = VerificationResult(SolverStatus.INFEASIBLE)
    assert certificate_verdict(result, failed) == Verdict.INFEASIBLE


def test_blkdiag_recovery_is_exact(stable_plant):
    spec = _spec(stable_plant, "d-full")
    result = synthesize(stable_plant, SynthesisConfig(Formulation.BLKDIAG, spec))
    assert result.is_optimal
    cert = result.certificate
    np.testing.assert_allclose(cert["P22"] @ result.gain, cert["Y"], atol=1e-8)

    # сертификат синтеза доказывает неравенство для восстановленного L
    n = stable_plant.n
    p = np.block(
        [[cert["P11"], np.zeros((n, n))], [np.zeros((n, n)), cert["P22"]]]
    )
    lmi = analysis_lmi(
        stable_plant,
        result.gain,
        0.0,
        p,
        MultiplierVars(cert["Lambda"]),
        result.gamma_syn**2,
    )
    assert np.linalg.eigvalsh(lmi.constant).max() <= 1e-6

    verification = verify(stable_plant, result.gain, spec)
    assert verification.gamma_ver <= result.gamma_syn * 1.01
    assert certificate_verdict(result, verification) == Verdict.VALID


def test_blkdiag_certificate_bounds_frozen_norms(stable_plant):
    spec = _spec(stable_plant, "d-full")
    result = synthesize(stable_plant, SynthesisConfig(Formulation.BLKDIAG, spec))
    for delta in (-1.0, -0.3, 0.0, 0.6, 1.0):
        sys = closed_error_system(stable_plant, result.gain, [delta])
        assert hinf_norm(sys) <= result.gamma_syn * (1.0 + 1e-3)


def test_finsler_synthesis_reports_diagnostics(stable_plant):
    spec = _spec(stable_plant, "d-scalar")
    result = synthesize(stable_plant, SynthesisConfig(Formulation.FINSLER, spec))
    assert result.is_optimal
    assert result.formulation == Formulation.FINSLER
    assert result.multiplier == "d-scalar"
    diagnostics = result.diagnostics
    for value in (diagnostics.r1, diagnostics.r2, diagnostics.r3):
        assert value >= 0.0 and math.isfinite(value)
    assert diagnostics.cond_g22_bot >= 1.0

    verification = verify(stable_plant, result.gain, spec)
    assert verification.is_optimal
    verdict = certificate_verdict(result, verification)
    assert verdict in (Verdict.VALID, Verdict.INVALID)


def test_verify_rejects_bad_gains(stable_plant):
    with pytest.raises(DimensionError):
        verify(stable_plant, np.ones((3, 1)), None)
    with pytest.raises(ConfigError):
        verify(stable_plant, np.array([[np.nan], [0.0]]), None)


@pytest.mark.parametrize(
    "gamma_ver, expected",
    [(1.0, Verdict.VALID), (1.009, Verdict.VALID), (1.2, Verdict.INVALID)],
)
def test_certificate_verdict_tolerance(gamma_ver, expected):
    synthesis = SynthesisResult(
        Formulation.FINSLER, SolverStatus.OPTIMAL, gamma_syn=1.0
    )
    verification = VerificationResult(SolverStatus.OPTIMAL, gamma_ver=gamma_ver)
    assert certificate_verdict(synthesis, verification, tolerance=0.01) == expected


def test_certificate_verdict_failed_verification():
    synthesis = SynthesisResult(
        Formulation.FINSLER, SolverStatus.OPTIMAL, gamma_syn=1.0
    )
    verification = VerificationResult(SolverStatus.INFEASIBLE)
    assert certificate_verdict(synthesis, verification) == Verdict.INVALID
    unknown = SynthesisResult(Formulation.FINSLER, SolverStatus.UNKNOWN)
    assert certificate_verdict(unknown, verification) == Verdict.UNKNOWN


@pytest.mark.reference
class TestMckComparison:
    plant = build_mck()
    setup = get_plant_setup("mck")

    def _run(self, formulation, multiplier=None):
        spec = _spec(self.plant, multiplier) if multiplier else None
        delta = self.setup.nominal_delta if spec is None else None
        result = synthesize(self.plant, SynthesisConfig(formulation, spec), delta)
        verification = None
        if result.is_optimal:
            verification = verify(self.plant, result.gain, spec, 0.0, delta)
        return result, verification

    def test_nominal(self):
        result, verification = self._run(Formulation.NOMINAL)
        assert result.gamma_syn == pytest.approx(0.500, rel=0.05)
        assert verification.gamma_ver == pytest.approx(0.500, rel=0.05)

    def test_blkdiag_scalar_infeasible(self):
        result, _ = self._run(Formulation.BLKDIAG, "d-scalar")
        assert result.status == SolverStatus.INFEASIBLE

    @pytest.mark.parametrize(
        "formulation, multiplier",
        [
            (Formulation.BLKDIAG, "d-full"),
            (Formulation.FINSLER, "d-scalar"),
            (Formulation.FINSLER, "d-full"),
        ],
    )
    def test_d_multipliers_not_certifiable(self, formulation, multiplier):
        # D-мультипликатор с P ≻ 0 доказывал бы устойчивость и при комплексных
        # δ, а для этого интервала она нарушается
        result, verification = self._run(formulation, multiplier)
        assert not result.is_optimal
        assert verification is None


@pytest.mark.reference
class TestQuaternionComparison:
    plant = build_quaternion()

    def test_nominal(self):
        result = synth_nominal(self.plant, QUATERNION_ALPHA)
        assert result.gamma_syn == pytest.approx(0.0033, rel=0.05)

    def test_d_scaling_infeasible(self):
        spec = MultiplierSpec(Scaling.D, LambdaKind.SCALAR_PER_BLOCK, self.plant.unc)
        cfg = SynthesisConfig(Formulation.BLKDIAG, spec, QUATERNION_ALPHA)
        assert synthesize(self.plant, cfg).status == SolverStatus.INFEASIBLE

    def test_dg_scaling(self):
        spec = MultiplierSpec(Scaling.DG, LambdaKind.SCALAR_PER_BLOCK, self.plant.unc)
        cfg = SynthesisConfig(Formulation.BLKDIAG, spec, QUATERNION_ALPHA)
        result = synthesize(self.plant, cfg)
        assert result.gamma_syn == pytest.approx(0.0070, rel=0.05)
