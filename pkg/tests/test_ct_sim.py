"""Tests for the continuous-time simulator."""

import numpy as np
import pytest

from active_consensus.analysis import expm_oracle
from active_consensus.ct_sim import CtScenario, CtState, integrate, time_grid, vector_field
from active_consensus.errors import HorizonError, InvalidInputError, NonFiniteStateError
from active_consensus.graph import Topology
from active_consensus.schedule import Departure, ModeSchedule
from active_consensus.signals import Constant, Piecewise, ReferenceEnsemble, Sinusoid


def _constants(values):
    return ReferenceEnsemble(Constant(v) for v in values)


@pytest.fixture
def path4():
    return Topology.from_generator("path", 4)


def test_vector_field_two_agents():
    topology = Topology(np.array([[0.0, 1.0], [1.0, 0.0]]))
    schedule = ModeSchedule([(0.0, [1.0, 0.0])], 1.0)
    ensemble = _constants([1.0, 3.0])
    x_dot, v_dot = vector_field(topology, schedule, ensemble, CtState(0.0, np.zeros(2), np.zeros(2)))
    # inactive agent 1 ignores its reference
    assert np.allclose(x_dot, [1.0, 0.0])
    assert np.allclose(v_dot, [0.0, 0.0])


def test_equilibrium_from_least_squares_integral_state(path4):
    eta = np.array([2.0, 0.0, 1.0, 3.0])
    r = np.array([1.0, -2.0, 4.0, 0.5])
    schedule = ModeSchedule([(0.0, eta)], 1.0)
    x_star = np.full(4, eta @ r / eta.sum())
    # L v = -E (x* - r) is consistent because the right-hand side sums to zero
    v_star, *_ = np.linalg.lstsq(path4.laplacian, -eta * (x_star - r), rcond=None)
    x_dot, v_dot = vector_field(path4, schedule, _constants(r), CtState(0.0, x_star, v_star))
    assert np.allclose(x_dot, 0.0, atol=1e-12)
    assert np.allclose(v_dot, 0.0, atol=1e-12)


def test_constant_references_reach_active_average():
    topology = Topology.from_generator("complete", 4)
    schedule = ModeSchedule([(0.0, [1.0, 0.0, 2.0, 0.0])], 60.0)
    ensemble = _constants([3.0, -7.0, 6.0, 100.0])
    trajectory = integrate(topology, schedule, ensemble, np.zeros(4), None, 60.0, 0.01)
    assert trajectory.avg[-1] == pytest.approx(5.0)
    assert np.allclose(trajectory.x[-1], 5.0, atol=1e-5)


def test_integral_states_conserve_their_sum(path4):
    schedule = ModeSchedule([(0.0, [1.0, 1.0, 0.0, 0.0]), (3.0, [0.0, 0.5, 2.0, 1.0])], 6.0)
    ensemble = ReferenceEnsemble(Sinusoid(i, 1.0, 0.5 + i) for i in range(4))
    v0 = np.array([0.3, -0.1, 0.2, 0.0])
    trajectory = integrate(path4, schedule, ensemble, np.ones(4), v0, 6.0, 0.01)
    assert trajectory.conservation_drift() < 1e-9


def test_switch_times_are_grid_points():
    schedule = ModeSchedule([(0.0, [1.0, 1.0]), (0.333, [1.0, 0.0]), (0.71, [0.0, 1.0])], 1.0)
    grid = time_grid(schedule, _constants([0.0, 1.0]), 1.0, 0.1)
    assert 0.333 in grid and 0.71 in grid
    assert grid[0] == 0.0 and grid[-1] == 1.0
    assert np.all(np.diff(grid) > 0)
    assert np.max(np.diff(grid)) <= 0.1 + 1e-12


def test_switch_rows_record_left_limits():
    topology = Topology.from_generator("complete", 3)
    schedule = ModeSchedule([(0.0, [1.0, 0.0, 0.0]), (2.0, [0.0, 0.0, 1.0])], 4.0)
    ensemble = _constants([1.0, 2.0, 3.0])
    trajectory = integrate(topology, schedule, ensemble, np.zeros(3), None, 4.0, 0.05)
    assert len(trajectory.switch_rows) == 1
    row = trajectory.switch_rows[0]
    assert trajectory.times[row] == pytest.approx(2.0)
    assert trajectory.left_avg[0] == pytest.approx(1.0)
    assert trajectory.avg[row] == pytest.approx(3.0)
    assert np.allclose(trajectory.left_errors[0], np.abs(trajectory.x[row] - 1.0))


def test_departed_agents_become_nan():
    topology = Topology.from_generator("complete", 3)
    schedule = ModeSchedule([(0.0, [1.0, 1.0, 0.0])], 60.0, [Departure(5.0, 0)])
    ensemble = _constants([1.0, 2.0, 3.0])
    trajectory = CtScenario(topology, schedule, ensemble, 0.01).integrate(np.zeros(3))
    after = trajectory.times > 5.0
    assert np.all(np.isnan(trajectory.x[after, 0]))
    assert not np.any(np.isnan(trajectory.x[after, 1:]))
    assert trajectory.avg[-1] == pytest.approx(2.0)
    assert np.allclose(trajectory.x[-1, 1:], 2.0, atol=1e-5)
    assert np.isfinite(trajectory.max_error[-1])
    assert np.all(np.isnan(trajectory.errors[trajectory.times >= 5.0, 0]))
    assert trajectory.conservation_drift() < 1e-8


def test_departure_that_disconnects_is_rejected():
    topology = Topology.from_generator("path", 3)
    schedule = ModeSchedule([(0.0, [1.0, 1.0, 1.0])], 5.0, [Departure(1.0, 1)])
    with pytest.raises(InvalidInputError):
        CtScenario(topology, schedule, _constants([0.0, 0.0, 0.0]))


def _reference_solution(topology, eta, r, x0, v0, t):
    n = topology.n
    lap = topology.laplacian
    system = np.zeros((2 * n + 1, 2 * n + 1))
    system[:n, :n] = -np.diag(eta) - lap
    system[:n, n : 2 * n] = -lap
    system[n : 2 * n, :n] = lap
    system[:n, -1] = eta * r
    y0 = np.concatenate([x0, v0, [1.0]])
    return (expm_oracle(system, t) @ y0)[: 2 * n]


def test_rk4_converges_with_fourth_order(path4):
    eta = np.array([2.0, 0.0, 1.0, 3.0])
    r = np.array([1.0, -2.0, 4.0, 0.5])
    x0 = np.array([0.0, 1.0, -1.0, 2.0])
    v0 = np.array([0.1, 0.0, -0.1, 0.0])
    schedule = ModeSchedule([(0.0, eta)], 2.0)
    exact = _reference_solution(path4, eta, r, x0, v0, 2.0)

    errors = []
    for h in (0.1, 0.05):
        trajectory = integrate(path4, schedule, _constants(r), x0, v0, 2.0, h)
        final = np.concatenate([trajectory.x[-1], trajectory.v[-1]])
        errors.append(np.max(np.abs(final - exact)))
    assert errors[0] / errors[1] >= 8.0


def test_horizon_checked():
    topology = Topology.from_generator("path", 2)
    schedule = ModeSchedule([(0.0, [1.0, 1.0])], 1.0)
    with pytest.raises(HorizonError):
        integrate(topology, schedule, _constants([0.0, 0.0]), np.zeros(2), None, 2.0)


def test_blow_up_raises():
    topology = Topology.from_generator("complete", 3, weight=100.0)
    schedule = ModeSchedule([(0.0, [100.0, 100.0, 100.0])], 1e4)
    with pytest.raises(NonFiniteStateError):
        integrate(topology, schedule, _constants([1.0, 2.0, 3.0]), np.ones(3), None, 1e4, 10.0)


def test_piecewise_reference_breakpoint_on_grid():
    topology = Topology.from_generator("path", 2)
    schedule = ModeSchedule([(0.0, [1.0, 1.0])], 2.0)
    ensemble = ReferenceEnsemble([Piecewise([(0.0, Constant(0.0)), (1.05, Constant(1.0))]), Constant(1.0)])
    trajectory = integrate(topology, schedule, ensemble, np.zeros(2), None, 2.0, 0.1)
    assert np.any(np.isclose(trajectory.times, 1.05))
