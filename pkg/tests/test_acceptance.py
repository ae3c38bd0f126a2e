"""Acceptance-scale property suites over random and built-in scenarios."""

import math

import numpy as np
import pytest

from active_consensus import analysis, report
from active_consensus.containment import contains, hull_2d, nested_centroid
from active_consensus.ct_sim import integrate
from active_consensus.dt_sim import DtScenario, compact_state, compact_step, simulate
from active_consensus.graph import Topology, spectral_decomposition
from active_consensus.schedule import ModeSchedule
from active_consensus.scenarios import (
    random_config,
    random_dt_scenario,
    random_topology,
    random_weight_set,
    ring_config,
)
from active_consensus.signals import Constant, ReferenceEnsemble

pytestmark = pytest.mark.slow


def test_hurwitz_on_random_graphs():
    rng = np.random.default_rng(2024)
    checked = 0
    for _ in range(100):
        topology = random_topology(rng, (2, 10))
        decomposition = spectral_decomposition(topology)
        for eta in random_weight_set(rng, topology.n):
            assert analysis.is_hurwitz(analysis.weighted_laplacian_matrix(decomposition, eta))
            assert analysis.is_hurwitz(analysis.subsystem_matrix(decomposition, eta).matrix)
            checked += 1
    assert checked == 300


def test_schur_boundary_on_random_instances():
    rng = np.random.default_rng(4048)
    for _ in range(25):
        topology = random_topology(rng, (2, 10))
        decomposition = spectral_decomposition(topology)
        weight_set = random_weight_set(rng, topology.n)
        limit = analysis.step_limits(decomposition, weight_set)
        parts = analysis.subsystems(decomposition, weight_set)
        assert all(analysis.is_schur(s.euler_matrix(0.95 * limit.value)) for s in parts)
        assert not analysis.is_schur(parts[limit.binding].euler_matrix(1.05 * limit.value))


@pytest.mark.parametrize("seed", range(100, 120))
def test_compact_recursion_matches_agentwise_steps(seed):
    scenario, x0, v0 = random_dt_scenario(seed=seed, steps=500)
    trajectory = simulate(scenario, x0, v0)
    state, _ = compact_state(scenario, trajectory.x[0], trajectory.v[0], 0)
    worst = 0.0
    for k in range(scenario.steps):
        state = compact_step(scenario, state, k)
        expected, q1 = compact_state(scenario, trajectory.x[k + 1], trajectory.v[k + 1], k + 1)
        worst = max(worst, float(np.max(np.abs(state - expected))))
        assert abs(q1) < 1e-9
    assert worst <= 1e-10


STATIC_CASES = [
    ("complete", 4, [1.0, 0.0, 2.0, 0.0], [3.0, -7.0, 6.0, 100.0]),
    ("ring", 5, [1.0, 0.0, 2.0, 0.0, 0.5], [1.0, -4.0, 3.0, 8.0, 2.0]),
    ("path", 3, [0.0, 2.0, 1.0], [5.0, -1.0, 2.0]),
]


@pytest.mark.parametrize("kind,n,eta,values", STATIC_CASES)
def test_static_references_dt_exactness(kind, n, eta, values):
    topology = Topology.from_generator(kind, n)
    eta = np.array(eta)
    decomposition = spectral_decomposition(topology)
    delta_c = 0.5 * analysis.max_stable_step(decomposition, [eta])
    omega = analysis.spectral_radius(analysis.subsystem_matrix(decomposition, eta).euler_matrix(delta_c))
    steps = math.ceil(40.0 / (1.0 - omega))
    schedule = ModeSchedule([(0.0, eta)], steps * delta_c * (1 + 1e-9))
    ensemble = ReferenceEnsemble(Constant(c) for c in values)
    scenario = DtScenario(topology, schedule, ensemble, delta_c, delta_c, steps)
    trajectory = simulate(scenario, np.zeros(n))
    assert trajectory.avg[-1] == pytest.approx(eta @ values / eta.sum())
    assert trajectory.max_error[-1] < 1e-8


@pytest.mark.parametrize("kind,n,eta,values", STATIC_CASES)
def test_static_references_ct_exactness(kind, n, eta, values):
    topology = Topology.from_generator(kind, n)
    eta = np.array(eta)
    rate = -analysis.subsystem_matrix(spectral_decomposition(topology), eta).abscissa
    # at 10 / rate the slowest mode still carries exp(-10) of an O(1) initial error
    t_end = 20.0 / rate
    schedule = ModeSchedule([(0.0, eta)], t_end)
    ensemble = ReferenceEnsemble(Constant(c) for c in values)
    trajectory = integrate(topology, schedule, ensemble, np.zeros(n), None, t_end, 0.01)
    assert trajectory.max_error[-1] < 1e-6
    assert trajectory.conservation_drift() < 1e-9


@pytest.mark.parametrize("seed", range(1, 11))
def test_certified_bound_holds_on_held_out_starts(seed):
    result = report.certify(random_config(seed, steps=300), "dt")
    assert result.certificate.seeds == analysis.FIT_SEEDS
    held_out = result.summary["held_out"]
    assert held_out["seeds"] == list(analysis.VERIFY_SEEDS)
    assert held_out["holds"]
    assert result.summary["bound"]["dominates"]
    assert result.summary["passed"]


@pytest.fixture(scope="module")
def ring_run():
    return report.simulate_ct(ring_config()).trajectory


def _window(trajectory, start, stop):
    inside = (trajectory.times >= start) & (trajectory.times < stop)
    return trajectory.max_error[inside]


def test_ring_error_is_bounded_while_references_move(ring_run):
    dynamic = _window(ring_run, 0.0, 50.0)
    assert np.all(np.isfinite(dynamic))
    assert dynamic.max() < 10.0


@pytest.mark.parametrize("switch,next_switch", [(50.0, 70.0), (70.0, 90.0), (90.0, 120.0 + 1e-9)])
def test_ring_settles_after_each_static_switch(ring_run, switch, next_switch):
    assert np.all(_window(ring_run, switch + 10.0, next_switch) < 1e-3)


@pytest.mark.parametrize("switch", [70.0, 90.0])
def test_ring_shows_decaying_spike_at_switch(ring_run, switch):
    before = _window(ring_run, switch - 5.0, switch)
    spike = _window(ring_run, switch, switch + 2.0)
    assert before.max() < 1e-3
    assert spike.max() > 0.1
    assert spike.max() > 100.0 * before.max()
    assert _window(ring_run, switch + 10.0, switch + 15.0).max() < 1e-3 * spike.max()


def test_nested_centroid_fuzz():
    rng = np.random.default_rng(31337)
    for _ in range(1000):
        m = int(rng.integers(1, 12))
        points = rng.normal(scale=rng.uniform(0.1, 10.0), size=(m, 2))
        subsets = [
            rng.choice(m, size=int(rng.integers(1, m + 1)), replace=False) for _ in range(int(rng.integers(1, 7)))
        ]
        centroid = nested_centroid(points, subsets)
        used = sorted(set(np.concatenate(subsets).tolist()))
        assert contains(hull_2d(points[used]), centroid, tol=1e-9)


def test_rk4_agrees_with_matrix_exponential():
    topology = Topology.from_generator("path", 4)
    eta = np.array([2.0, 0.0, 1.0, 3.0])
    r = np.array([1.0, -2.0, 4.0, 0.5])
    x0 = np.array([0.0, 1.0, -1.0, 2.0])
    v0 = np.array([0.1, 0.0, -0.1, 0.0])
    lap = topology.laplacian
    system = np.zeros((9, 9))
    system[:4, :4] = -np.diag(eta) - lap
    system[:4, 4:8] = -lap
    system[4:8, :4] = lap
    system[:4, -1] = eta * r
    exact = (analysis.expm_oracle(system, 2.0) @ np.concatenate([x0, v0, [1.0]]))[:8]

    schedule = ModeSchedule([(0.0, eta)], 2.0)
    ensemble = ReferenceEnsemble(Constant(c) for c in r)
    trajectory = integrate(topology, schedule, ensemble, x0, v0, 2.0, 1e-3)
    final = np.concatenate([trajectory.x[-1], trajectory.v[-1]])
    assert np.max(np.abs(final - exact)) <= 1e-8
