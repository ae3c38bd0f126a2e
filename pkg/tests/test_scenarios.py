"""Tests for the built-in and random scenarios."""

import json

import numpy as np
import pytest

from active_consensus import report
from active_consensus.analysis import max_stable_step
from active_consensus.config import dump_config, parse_config
from active_consensus.graph import spectral_decomposition
from active_consensus.scenarios import (
    CANNED,
    leaders_config,
    random_config,
    random_dt_scenario,
    random_schedule,
    random_topology,
    ring_config,
)


@pytest.mark.parametrize("name", sorted(CANNED))
def test_canned_configs_round_trip(name):
    config = CANNED[name]()
    assert parse_config(dump_config(config)) == config


def test_ring_active_sets():
    schedule = ring_config().build_schedule()
    assert schedule.active_set(10.0) == frozenset({0, 1, 3, 5})
    assert schedule.active_set(60.0) == frozenset({1, 2, 4, 5})
    assert schedule.active_set(80.0) == frozenset({2, 5})
    assert schedule.alive_at(100.0).tolist() == [1, 2, 3, 4, 5]


def test_ring_analysis_passes():
    result = report.analyze(ring_config())
    assert result["all_hurwitz"]
    assert result["all_weighted_laplacian_hurwitz"]
    assert len(result["subsystems"]) == 3
    assert result["passed"]


@pytest.mark.slow
def test_ring_tracks_static_references_after_switch():
    result = report.simulate_ct(ring_config())
    trajectory = result.trajectory
    assert len(result.summary["switch_left_limits"]) == 2
    late = trajectory.times >= 118.0
    assert np.all(trajectory.max_error[late] < 1e-4)
    # average of the static references of agents 3 and 6 (1-based)
    assert trajectory.avg[-1] == pytest.approx((4.0 + 1.5) / 2)
    assert result.summary["conservation_drift"] < 1e-8


def test_leaders_step_is_stable():
    result = report.analyze(leaders_config())
    assert result["max_stable_step"] > 0.2
    assert result["all_schur"]


def test_random_topology_is_connected():
    rng = np.random.default_rng(5)
    for _ in range(20):
        topology = random_topology(rng, (2, 10))
        assert 2 <= topology.n <= 10


def test_random_schedule_respects_dwell():
    rng = np.random.default_rng(9)
    weight_set = [np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([1.0, 1.0])]
    schedule = random_schedule(rng, weight_set, 50.0, (2.0, 4.0), quantum=0.5)
    gaps = np.diff([0.0] + schedule.switch_times.tolist())
    assert np.all(gaps >= 2.0 - 1e-12)
    assert np.allclose(schedule.switch_times / 0.5, np.round(schedule.switch_times / 0.5))
    for a, b in zip(schedule.epochs, schedule.epochs[1:]):
        assert not np.array_equal(a.weights, b.weights)


def test_random_scenario_is_reproducible():
    first, x0, _ = random_dt_scenario(seed=17)
    second, y0, _ = random_dt_scenario(seed=17)
    assert np.array_equal(x0, y0)
    assert first.delta_c == second.delta_c
    d_bar = max_stable_step(spectral_decomposition(first.topology), first.weight_set())
    assert first.delta_c == pytest.approx(0.5 * d_bar)


def test_random_config_matches_scenario():
    config = random_config(17)
    scenario, x0, _ = random_dt_scenario(seed=17)
    built = config.dt_scenario()
    assert built.steps == scenario.steps
    assert np.array_equal(config.initial_state()[0], x0)
    assert np.allclose(built.references(7), scenario.references(7))
    assert json.loads(dump_config(config))["bounds"] is True
