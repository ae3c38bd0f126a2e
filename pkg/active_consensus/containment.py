"""Containment control as active average consensus over observed leaders.

Each follower that sees at least one leader feeds the centroid of the
leaders it sees into the discrete-time algorithm with unit weight; followers
that see none are passive. The network then tracks the mean of those local
centroids, which always lies in the convex hull of the observed leaders.
"""

import bisect
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from active_consensus.ct_sim import Trajectory
from active_consensus.dt_sim import DtScenario, simulate
from active_consensus.errors import InvalidInputError
from active_consensus.graph import Topology
from active_consensus.schedule import TIME_EPS, ModeSchedule, nudge
from active_consensus.signals import ReferenceEnsemble, ZohTrack

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-9


class LeaderEnsemble:
    """Planar leader trajectories given as piecewise-linear waypoints ``(t, x, y)``.

    Positions are held at the first waypoint before it and at the last one
    after it. With ``freeze_at`` every leader stops where it is at that time.
    """

    def __init__(
        self,
        waypoints: Sequence[Sequence[Sequence[float]]],
        max_displacement: Optional[float] = None,
        freeze_at: Optional[float] = None,
    ):
        if not waypoints:
            raise InvalidInputError("at least one leader is required")
        self._tracks: List[np.ndarray] = []
        for j, points in enumerate(waypoints):
            track = np.asarray(points, dtype=float)
            if track.ndim != 2 or track.shape[1] != 3 or track.shape[0] == 0:
                raise InvalidInputError(f"leader {j} needs waypoints of the form (t, x, y)")
            if not np.all(np.isfinite(track)):
                raise InvalidInputError(f"leader {j} has non-finite waypoints")
            if np.any(np.diff(track[:, 0]) <= 0):
                raise InvalidInputError(f"leader {j} waypoint times must be strictly increasing")
            self._tracks.append(track)
        if max_displacement is not None and not max_displacement > 0:
            raise InvalidInputError("displacement bound must be positive")
        self.max_displacement = max_displacement
        self.freeze_at = freeze_at

    @property
    def m(self) -> int:
        return len(self._tracks)

    def position(self, j: int, t: float) -> np.ndarray:
        if self.freeze_at is not None:
            t = min(t, self.freeze_at)
        track = self._tracks[j]
        return np.array([np.interp(t, track[:, 0], track[:, 1]), np.interp(t, track[:, 0], track[:, 2])])

    def positions(self, t: float) -> np.ndarray:
        return np.array([self.position(j, t) for j in range(self.m)])

    def check_displacement(self, delta_s: float, t_end: float) -> float:
        """Largest per-sample displacement on ``[0, t_end]``; enforces the declared bound."""
        count = int(math.floor(t_end / delta_s + TIME_EPS))
        largest = 0.0
        previous = self.positions(0.0)
        for l in range(1, count + 1):
            current = self.positions(l * delta_s)
            step = float(np.max(np.linalg.norm(current - previous, axis=1)))
            if self.max_displacement is not None and step > self.max_displacement + 1e-12:
                raise InvalidInputError(
                    f"a leader moves {step:.6g} between samples {l - 1} and {l}, "
                    f"above the declared bound {self.max_displacement:.6g}"
                )
            largest = max(largest, step)
            previous = current
        return largest


class ObservationMap:
    """Right-continuous epochs of per-follower observed leader sets (0-based)."""

    def __init__(
        self,
        epochs: Sequence[Tuple[float, Sequence[Sequence[int]]]],
        n_followers: int,
        n_leaders: int,
    ):
        if not epochs:
            raise InvalidInputError("an observation map needs at least one epoch")
        starts = [float(start) for start, _ in epochs]
        if starts[0] != 0.0:
            raise InvalidInputError("the first observation epoch must start at t = 0")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise InvalidInputError("observation epoch times must be strictly increasing")
        self._starts = starts
        self._sets: List[Tuple[FrozenSet[int], ...]] = []
        for start, observed in epochs:
            if len(observed) != n_followers:
                raise InvalidInputError(f"observation epoch at t={start} must list {n_followers} followers")
            sets = tuple(frozenset(int(j) for j in leaders) for leaders in observed)
            for leaders in sets:
                if any(not 0 <= j < n_leaders for j in leaders):
                    raise InvalidInputError(f"observation epoch at t={start} names an unknown leader")
            if not any(sets):
                raise InvalidInputError(f"no follower observes a leader in the epoch starting at t={start}")
            self._sets.append(sets)
        self.n_followers = n_followers
        self.n_leaders = n_leaders

    def observed_at(self, t: float) -> Tuple[FrozenSet[int], ...]:
        return self._sets[max(bisect.bisect_right(self._starts, t) - 1, 0)]

    def observed_union(self, t: float) -> FrozenSet[int]:
        return frozenset().union(*self.observed_at(t))


def local_centroid(
    leaders: LeaderEnsemble,
    obs_map: ObservationMap,
    l: int,
    i: int,
    delta_s: float,
) -> Tuple[np.ndarray, float]:
    """Reference and weight of follower ``i`` at sample ``l``.

    Returns:
        ``(mean of observed leader positions, 1.0)``, or ``(0, 0.0)`` if the
        follower observes no leader
    """
    t = l * delta_s
    observed = sorted(obs_map.observed_at(nudge(t))[i])
    if not observed:
        return np.zeros(2), 0.0
    return leaders.positions(t)[observed].mean(axis=0), 1.0


@dataclass(frozen=True, eq=False)
class Hull2D:
    """Convex hull vertices in counterclockwise order.

    One vertex for a point hull and two for a segment hull.
    """

    vertices: np.ndarray

    def __len__(self) -> int:
        return self.vertices.shape[0]


def _cross(o: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return float((a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]))


def hull_2d(points: Sequence[Sequence[float]]) -> Hull2D:
    """Convex hull by the monotone chain; collinear points are dropped."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
        raise InvalidInputError("hull needs at least one planar point")
    if not np.all(np.isfinite(pts)):
        raise InvalidInputError("hull points must be finite")
    unique = np.unique(pts, axis=0)
    if unique.shape[0] <= 2:
        return Hull2D(unique)

    def chain(ordered: np.ndarray) -> List[np.ndarray]:
        stack: List[np.ndarray] = []
        for p in ordered:
            while len(stack) >= 2 and _cross(stack[-2], stack[-1], p) <= 0:
                stack.pop()
            stack.append(p)
        return stack

    lower = chain(unique)
    upper = chain(unique[::-1])
    vertices = np.array(lower[:-1] + upper[:-1])
    if vertices.shape[0] < 3:
        # all input points collinear; keep the two extremes
        vertices = np.array([unique[0], unique[-1]])
    return Hull2D(vertices)


def _segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    s = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0.0, 1.0)
    return float(np.linalg.norm(p - (a + s * ab)))


def contains(hull: Hull2D, point: Sequence[float], tol: float = 0.0) -> bool:
    """True when ``point`` is inside the hull or within ``tol`` of its boundary."""
    p = np.asarray(point, dtype=float)
    vertices = hull.vertices
    if len(hull) == 1:
        return float(np.linalg.norm(p - vertices[0])) <= tol
    if len(hull) == 2:
        return _segment_distance(p, vertices[0], vertices[1]) <= tol
    for a, b in zip(vertices, np.roll(vertices, -1, axis=0)):
        if _cross(a, b, p) / np.linalg.norm(b - a) < -tol:
            return False
    return True


def nested_centroid(points: Sequence[Sequence[float]], subsets: Sequence[Sequence[int]]) -> np.ndarray:
    """Mean of the centroids of ``points`` restricted to each subset.

    The result lies in the convex hull of ``points``.
    """
    pts = np.asarray(points, dtype=float)
    if not subsets:
        raise InvalidInputError("at least one subset is required")
    centroids = []
    for subset in subsets:
        indices = list(subset)
        if not indices:
            raise InvalidInputError("subsets must be non-empty")
        if any(not 0 <= j < pts.shape[0] for j in indices):
            raise InvalidInputError("subset index out of range")
        centroids.append(pts[indices].mean(axis=0))
    return np.mean(centroids, axis=0)


@dataclass(frozen=True, eq=False)
class ContainmentReport:
    """Per-step follower positions, hull tracks and membership checks."""

    times: np.ndarray
    followers: np.ndarray
    centroid: np.ndarray
    plain_centroid: np.ndarray
    hulls: List[np.ndarray]
    distances: np.ndarray
    centroid_inside: np.ndarray
    followers_inside: np.ndarray
    d_bar: float
    largest_displacement: float
    trajectories: Tuple[Trajectory, ...] = field(repr=False)

    @property
    def error(self) -> np.ndarray:
        """Largest follower distance to the tracked hull point, per step."""
        return self.distances.max(axis=1)

    @property
    def max_error(self) -> float:
        return float(self.error.max())

    @property
    def membership_violations(self) -> int:
        return int(np.count_nonzero(~self.centroid_inside))

    def summary(self) -> Dict:
        return {
            "steps": int(self.times.size - 1),
            "max_error": self.max_error,
            "final_error": float(self.error[-1]),
            "centroid_membership_violations": self.membership_violations,
            "followers_outside_hull": int(np.count_nonzero(~self.followers_inside)),
            "max_centroid_offset": float(np.max(np.linalg.norm(self.centroid - self.plain_centroid, axis=1))),
            "d_bar": self.d_bar,
            "largest_leader_displacement": self.largest_displacement,
        }


def _observation_schedule(
    leaders: LeaderEnsemble,
    obs_map: ObservationMap,
    n: int,
    delta_s: float,
    horizon: float,
) -> Tuple[ModeSchedule, np.ndarray]:
    samples = int(math.floor(horizon / delta_s + TIME_EPS)) + 1
    references = np.zeros((samples, n, 2))
    weights = np.zeros((samples, n))
    for l in range(samples):
        for i in range(n):
            references[l, i], weights[l, i] = local_centroid(leaders, obs_map, l, i, delta_s)

    epochs = []
    for l in range(samples):
        if l == 0 or not np.array_equal(weights[l], weights[l - 1]):
            epochs.append((min(l * delta_s, horizon), weights[l]))
    return ModeSchedule(epochs, horizon), references


def run_containment(
    topology: Topology,
    obs_map: ObservationMap,
    leaders: LeaderEnsemble,
    delta_s: float,
    delta_c: float,
    steps: int,
    x0: Optional[np.ndarray] = None,
    tol: float = DEFAULT_TOLERANCE,
    allow_unstable: bool = False,
) -> ContainmentReport:
    """Run the follower network and measure how well it tracks the hull.

    Args:
        topology: Follower communication graph
        obs_map: Which leaders each follower observes over time
        leaders: Leader trajectories
        delta_s: Observation period in seconds
        delta_c: Communication period in seconds
        steps: Number of communication steps
        x0: Initial follower positions, shape ``(n, 2)`` (origin if None)
        tol: Hull membership tolerance
        allow_unstable: Run even if ``delta_c`` is not below ``d_bar``

    Returns:
        ContainmentReport
    """
    n = topology.n
    if obs_map.n_followers != n:
        raise InvalidInputError(f"observation map lists {obs_map.n_followers} followers for {n} agents")
    if obs_map.n_leaders != leaders.m:
        raise InvalidInputError("observation map and leader ensemble disagree on the leader count")
    if not delta_s > 0 or not delta_c > 0:
        raise InvalidInputError("sampling and communication periods must be positive")
    positions0 = np.zeros((n, 2)) if x0 is None else np.asarray(x0, dtype=float)
    if positions0.shape != (n, 2):
        raise InvalidInputError(f"initial follower positions must have shape ({n}, 2)")

    horizon = steps * delta_c
    largest = leaders.check_displacement(delta_s, horizon)
    schedule, references = _observation_schedule(leaders, obs_map, n, delta_s, horizon)

    scenarios = [
        DtScenario(
            topology,
            schedule,
            ReferenceEnsemble(ZohTrack(references[:, i, c], delta_s) for i in range(n)),
            delta_c,
            delta_s,
            steps,
        )
        for c in range(2)
    ]
    d_bar = scenarios[0].check_step(allow_unstable)
    trajectories = tuple(simulate(s, positions0[:, c]) for c, s in enumerate(scenarios))

    followers = np.stack([t.x for t in trajectories], axis=2)
    centroid = np.stack([t.avg for t in trajectories], axis=1)
    times = trajectories[0].times
    hulls: List[np.ndarray] = []
    plain = np.zeros_like(centroid)
    centroid_inside = np.zeros(times.size, dtype=bool)
    followers_inside = np.zeros((times.size, n), dtype=bool)
    for k, t in enumerate(times):
        instant = delta_s * math.floor(nudge(t) / delta_s)
        observed = sorted(obs_map.observed_union(nudge(instant)))
        points = leaders.positions(instant)[observed]
        hull = hull_2d(points)
        hulls.append(hull.vertices)
        plain[k] = points.mean(axis=0)
        centroid_inside[k] = contains(hull, centroid[k], tol)
        followers_inside[k] = [contains(hull, p, tol) for p in followers[k]]

    distances = np.linalg.norm(followers - centroid[:, None, :], axis=2)
    report = ContainmentReport(
        times=times,
        followers=followers,
        centroid=centroid,
        plain_centroid=plain,
        hulls=hulls,
        distances=distances,
        centroid_inside=centroid_inside,
        followers_inside=followers_inside,
        d_bar=d_bar,
        largest_displacement=largest,
        trajectories=trajectories,
    )
    if report.membership_violations:
        logger.warning("tracked point left the leader hull at %d steps", report.membership_violations)
    logger.info("containment run: %d steps, max error %.3g", steps, report.max_error)
    return report
