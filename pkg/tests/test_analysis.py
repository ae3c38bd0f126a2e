"""Tests for subsystem matrices, stability checks, certificates and error bounds."""

import numpy as np
import pytest

from active_consensus import analysis, report
from active_consensus.analysis import CertificateMode, StabilityVerdict
from active_consensus.ct_sim import CtScenario
from active_consensus.dt_sim import simulate
from active_consensus.errors import CertificationError, ConvergenceError, InvalidInputError, UnstableStepError
from active_consensus.graph import Topology, spectral_decomposition
from active_consensus.schedule import DwellStats, ModeSchedule
from active_consensus.scenarios import random_config, random_dt_scenario
from active_consensus.signals import ReferenceEnsemble, Sinusoid


@pytest.fixture
def pair():
    return spectral_decomposition(Topology.from_generator("path", 2))


def test_two_agent_subsystem_matrix(pair):
    subsystem = analysis.subsystem_matrix(pair, np.array([1.0, 0.0]))
    expected = np.array([[-0.5, -0.5, 0.0], [-0.5, -2.5, -1.0], [0.0, 4.0, 0.0]])
    assert np.allclose(subsystem.matrix, expected)
    assert np.allclose(np.poly(subsystem.matrix), [1.0, 3.0, 5.0, 2.0])
    assert subsystem.input_matrix.shape == (3, 3)


def test_eigenvalues_match_trace_and_determinant(pair):
    rng = np.random.default_rng(12)
    for n in (2, 4, 6):
        decomposition = pair if n == 2 else spectral_decomposition(Topology.from_generator("ring", n))
        for _ in range(5):
            eta = np.where(rng.random(n) < 0.5, rng.uniform(0.1, 3.0, n), 0.0)
            eta[rng.integers(n)] = 1.0
            matrix = analysis.subsystem_matrix(decomposition, eta).matrix
            mu = analysis.eigenvalues(matrix)
            assert np.sum(mu).real == pytest.approx(np.trace(matrix), rel=1e-9, abs=1e-9)
            assert abs(np.sum(mu).imag) < 1e-9
            assert np.prod(mu).real == pytest.approx(np.linalg.det(matrix), rel=1e-8)


def test_eigenvalues_sorted_and_checked():
    mu = analysis.eigenvalues(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    assert np.allclose(mu, [-1j, 1j])
    assert analysis.hurwitz_verdict(np.array([[0.0, 1.0], [-1.0, 0.0]])) is StabilityVerdict.MARGINAL
    assert analysis.schur_verdict(np.diag([0.5, 1.5])) is StabilityVerdict.UNSTABLE
    with pytest.raises(InvalidInputError):
        analysis.eigenvalues(np.ones((2, 3)))
    with pytest.raises(InvalidInputError):
        analysis.eigenvalues(np.array([[np.inf]]))


@pytest.mark.parametrize("kind,n", [("path", 2), ("ring", 5), ("complete", 4), ("path", 7)])
def test_every_weight_pattern_is_hurwitz(kind, n):
    decomposition = spectral_decomposition(Topology.from_generator(kind, n))
    rng = np.random.default_rng(n)
    for _ in range(5):
        eta = np.where(rng.random(n) < 0.5, rng.uniform(0.1, 3.0, n), 0.0)
        eta[rng.integers(n)] = 1.0
        subsystem = analysis.subsystem_matrix(decomposition, eta)
        assert analysis.is_hurwitz(subsystem.matrix)
        assert analysis.is_hurwitz(analysis.weighted_laplacian_matrix(decomposition, eta))


def test_zero_weights_rejected(pair):
    with pytest.raises(InvalidInputError):
        analysis.subsystem_matrix(pair, np.zeros(2))
    with pytest.raises(InvalidInputError):
        analysis.subsystems(pair, [])


def test_step_limit_separates_schur(pair):
    weight_set = [np.array([1.0, 0.0]), np.array([2.0, 1.0])]
    limit = analysis.step_limits(pair, weight_set)
    subsystem = analysis.subsystems(pair, weight_set)[limit.binding]
    assert limit.value == min(limit.per_subsystem)
    assert analysis.is_schur(subsystem.euler_matrix(0.9 * limit.value))
    assert not analysis.is_schur(subsystem.euler_matrix(1.1 * limit.value))


def test_euler_step_limit_formula():
    assert analysis.euler_step_limit(np.array([-1.0, -2.0])) == pytest.approx(1.0)
    assert analysis.euler_step_limit(np.array([-1.0 + 1.0j])) == pytest.approx(1.0)
    with pytest.raises(InvalidInputError):
        analysis.euler_step_limit(np.array([0.5]))


def test_stability_report(pair):
    report = analysis.stability_report(pair, [np.array([1.0, 0.0])], delta_c=0.1)
    assert report["all_hurwitz"] and report["all_weighted_laplacian_hurwitz"]
    assert report["all_schur"]
    assert report["binding_subsystem"] == 0
    entry = report["subsystems"][0]
    assert entry["hurwitz"] == "stable"
    assert len(entry["eigenvalues"]) == 3
    assert report["reduced_laplacian_eigenvalues"] == pytest.approx([2.0])


def test_expm_oracle_matches_eigen_decay(pair):
    subsystem = analysis.subsystem_matrix(pair, np.array([1.0, 1.0]))
    phi = analysis.expm_oracle(subsystem.matrix, 20.0)
    assert np.linalg.norm(phi, 2) < 1e-3
    with pytest.raises(InvalidInputError):
        analysis.expm_oracle(np.eye(13))


def _ct_scenario():
    topology = Topology.from_generator("path", 3)
    schedule = ModeSchedule(
        [(0.0, [1.0, 0.0, 2.0]), (6.0, [0.0, 1.0, 0.0]), (12.0, [1.0, 1.0, 1.0])],
        20.0,
    )
    ensemble = ReferenceEnsemble(
        [Sinusoid(1.0, 0.5, 0.4), Sinusoid(-1.0, 0.3, 0.7, 1.0), Sinusoid(2.0, 0.2, 0.3)]
    )
    return CtScenario(topology, schedule, ensemble, 0.01)


def test_ct_certificate_fits_and_verifies():
    scenario = _ct_scenario()
    decomposition = spectral_decomposition(scenario.topology)
    certificate = analysis.fit_certificate(
        decomposition, None, scenario.schedule, CertificateMode.CONTINUOUS, dwell=DwellStats(1, 6.0)
    )
    assert certificate.rate > 0
    assert certificate.kappa >= 1.0
    assert certificate.fit_margin >= 0
    assert certificate.seeds == analysis.FIT_SEEDS
    check = analysis.verify_certificate(certificate, decomposition, scenario.schedule)
    assert check.holds
    assert check.samples > 0
    assert certificate.to_dict()["mode"] == "continuous"


def test_dwell_violation_blocks_certificate():
    scenario = _ct_scenario()
    with pytest.raises(CertificationError, match="dwell"):
        analysis.fit_certificate(
            spectral_decomposition(scenario.topology),
            None,
            scenario.schedule,
            CertificateMode.CONTINUOUS,
            dwell=DwellStats(0, 100.0),
        )


@pytest.mark.slow
def test_ct_bound_dominates_simulated_error():
    scenario = _ct_scenario()
    decomposition = spectral_decomposition(scenario.topology)
    certificate = analysis.fit_certificate(decomposition, None, scenario.schedule, CertificateMode.CONTINUOUS)
    x0 = np.array([4.0, -3.0, 0.5])
    v0 = np.array([0.2, 0.0, -0.1])
    trajectory = scenario.integrate(x0, v0)
    bound = analysis.ct_bound_curve(certificate, scenario, x0, v0, trajectory.times)
    assert np.all(trajectory.max_error <= bound)
    assert analysis.ct_bound(certificate, scenario, x0, v0, 0.0) >= trajectory.max_error[0]


def test_discrete_certificate_requires_stable_step():
    scenario, _, _ = random_dt_scenario(seed=2, steps=100)
    decomposition = scenario.decomposition
    d_bar = scenario.step_limit().value
    with pytest.raises(UnstableStepError):
        analysis.fit_certificate(
            decomposition, None, scenario.schedule, CertificateMode.DISCRETE, delta_c=1.2 * d_bar
        )


def test_growing_propagators_fail_certification():
    scenario, _, _ = random_dt_scenario(seed=2, steps=100)
    limit = scenario.step_limit()
    d_bar = limit.value
    binding = scenario.weight_set()[limit.binding]
    with pytest.raises(CertificationError):
        analysis.fit_certificate(
            scenario.decomposition,
            None,
            ModeSchedule([(0.0, binding)], 2000 * d_bar),
            CertificateMode.DISCRETE,
            delta_c=1.5 * d_bar,
            allow_unstable=True,
        )


def test_step_past_limit_never_certifies_with_override():
    scenario, _, _ = random_dt_scenario(seed=3, steps=300)
    limit = scenario.step_limit().value
    with pytest.raises(CertificationError, match="not Schur"):
        analysis.fit_certificate(
            scenario.decomposition,
            scenario.weight_set(),
            scenario.schedule,
            CertificateMode.DISCRETE,
            delta_c=1.05 * limit,
            allow_unstable=True,
        )


def _past_limit_config():
    for seed in range(3, 40):
        config = random_config(seed, steps=300, step_fraction=1.05)
        scenario = config.dt_scenario()
        if scenario.delta_c >= scenario.step_limit().value:
            return config
    raise AssertionError("no random scenario uses its binding weight pattern")


def test_certify_refuses_step_past_limit_with_override():
    config = _past_limit_config()
    with pytest.raises(CertificationError):
        report.certify(config, "dt", allow_unstable=True)
    with pytest.raises(UnstableStepError):
        report.certify(config, "dt")


@pytest.mark.slow
@pytest.mark.parametrize("seed", [3, 8, 21])
def test_dt_bound_dominates_simulated_error(seed):
    scenario, x0, v0 = random_dt_scenario(seed=seed, steps=300)
    certificate = analysis.fit_certificate(
        scenario.decomposition,
        None,
        scenario.schedule,
        CertificateMode.DISCRETE,
        delta_c=scenario.delta_c,
    )
    assert 0.0 < certificate.rate < 1.0
    trajectory = simulate(scenario, x0, v0)
    bound = analysis.dt_bound_curve(certificate, scenario, x0, v0, trajectory.steps)
    assert np.all(trajectory.max_error <= bound)


def test_bound_mode_mismatch():
    scenario = _ct_scenario()
    decomposition = spectral_decomposition(scenario.topology)
    certificate = analysis.fit_certificate(decomposition, None, scenario.schedule, CertificateMode.CONTINUOUS)
    dt_scenario, x0, v0 = random_dt_scenario(seed=1, steps=10)
    with pytest.raises(InvalidInputError):
        analysis.dt_bound_curve(certificate, dt_scenario, x0, v0, [0, 1])


def test_step_limits_reject_non_hurwitz(mocker, pair):
    mocker.patch.object(analysis, "MARGIN", 1e6)
    with pytest.raises(ConvergenceError):
        analysis.step_limits(pair, [np.array([1.0, 1.0])])
