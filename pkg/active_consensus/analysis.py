"""Switched linear system analysis for the error dynamics.

Covers the subsystem matrices of the compact error form, Hurwitz and Schur
verdicts, the largest stable Euler step, empirical exponential envelopes of
the transition matrix and the tracking-error bounds built from them.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from active_consensus.errors import (
    CertificationError,
    ConvergenceError,
    InvalidInputError,
    UnstableStepError,
)
from active_consensus.graph import SpectralDecomposition
from active_consensus.schedule import TIME_EPS, DwellStats, ModeSchedule, nudge, verify_dwell
from active_consensus.signals import jumps_at, smooth_derivatives, weighted_disagreement

if TYPE_CHECKING:
    from active_consensus.ct_sim import CtScenario
    from active_consensus.dt_sim import DtScenario

logger = logging.getLogger(__name__)

MARGIN = 1e-10
RESIDUAL_TOL = 1e-8
EXPM_MAX_SIZE = 12
DEFAULT_SAFETY = 1.25
FIT_SEEDS = (1, 2, 3, 4, 5)
VERIFY_SEEDS = (6, 7, 8, 9, 10)
# Transition-matrix norms below this are rounding noise and are not fitted.
NORM_FLOOR = 1e-12
FIT_BINS = 40
DEFAULT_FIT_POINTS = 2000


class StabilityVerdict(str, Enum):
    STABLE = "stable"
    MARGINAL = "marginal"
    UNSTABLE = "unstable"


class CertificateMode(str, Enum):
    CONTINUOUS = "continuous"
    DISCRETE = "discrete"


def eigenvalues(matrix: np.ndarray) -> np.ndarray:
    """Eigenvalues of a dense real matrix with multiplicity.

    LAPACK ``geev`` balances the matrix, reduces it to Hessenberg form and
    runs the shifted QR iteration. Results are sorted by real part, then by
    imaginary part, and every eigenpair is checked against its residual.

    Args:
        matrix: Square matrix with finite entries

    Returns:
        Complex array of eigenvalues

    Raises:
        InvalidInputError: If the matrix is not square or has non-finite entries
        ConvergenceError: If the QR iteration fails or a residual is too large
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise InvalidInputError(f"eigenvalues need a non-empty square matrix, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("matrix has non-finite entries")
    try:
        mu, vectors = linalg.eig(a, right=True)
    except linalg.LinAlgError as exc:
        raise ConvergenceError(f"QR iteration did not converge for a {a.shape[0]}x{a.shape[0]} matrix") from exc

    scale = np.linalg.norm(a, 2)
    residuals = np.linalg.norm(a @ vectors - vectors * mu, axis=0)
    worst = int(np.argmax(residuals))
    if residuals[worst] > RESIDUAL_TOL * scale:
        raise ConvergenceError(
            f"eigenpair residual {residuals[worst]:.3e} exceeds {RESIDUAL_TOL:g} * ||A|| "
            f"({scale:.3e}) for eigenvalue {mu[worst]:.6g}"
        )
    order = np.lexsort((mu.imag, mu.real))
    return mu[order].astype(complex)


def spectral_abscissa(matrix: np.ndarray) -> float:
    """Largest real part of the eigenvalues of a square matrix.

    Args:
        matrix: Square matrix

    Returns:
        max Re(mu) over the spectrum
    """
    return float(np.max(eigenvalues(matrix).real))


def spectral_radius(matrix: np.ndarray) -> float:
    """Largest eigenvalue modulus of a square matrix.

    Args:
        matrix: Square matrix

    Returns:
        max |mu| over the spectrum
    """
    return float(np.max(np.abs(eigenvalues(matrix))))


def hurwitz_verdict(matrix: np.ndarray) -> StabilityVerdict:
    """Classify by the spectral abscissa with a ``1e-10`` margin."""
    abscissa = spectral_abscissa(matrix)
    if abscissa < -MARGIN:
        return StabilityVerdict.STABLE
    if abscissa <= MARGIN:
        return StabilityVerdict.MARGINAL
    return StabilityVerdict.UNSTABLE


def schur_verdict(matrix: np.ndarray) -> StabilityVerdict:
    """Classify by the spectral radius with a ``1e-10`` margin."""
    radius = spectral_radius(matrix)
    if radius < 1.0 - MARGIN:
        return StabilityVerdict.STABLE
    if radius <= 1.0 + MARGIN:
        return StabilityVerdict.MARGINAL
    return StabilityVerdict.UNSTABLE


def is_hurwitz(matrix: np.ndarray) -> bool:
    """Whether every eigenvalue lies left of ``-1e-10``.

    Args:
        matrix: Square matrix

    Returns:
        True only for a strictly stable verdict; marginal matrices are not Hurwitz
    """
    return hurwitz_verdict(matrix) is StabilityVerdict.STABLE


def is_schur(matrix: np.ndarray) -> bool:
    """Whether every eigenvalue lies inside the disc of radius ``1 - 1e-10``.

    Args:
        matrix: Square matrix

    Returns:
        True only for a strictly stable verdict
    """
    return schur_verdict(matrix) is StabilityVerdict.STABLE


@dataclass(frozen=True, eq=False)
class Subsystem:
    """One mode of the switched error dynamics ``s' = A s + B u``."""

    index: int
    weights: np.ndarray
    matrix: np.ndarray
    input_matrix: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def abscissa(self) -> float:
        """Spectral abscissa of ``matrix``."""
        return float(np.max(self.eigenvalues.real))

    def euler_matrix(self, delta_c: float) -> np.ndarray:
        """``I + delta_c A``, the one-step map of the discretized dynamics."""
        return np.eye(self.matrix.shape[0]) + delta_c * self.matrix


def _check_weights(weights: np.ndarray, n: int) -> np.ndarray:
    eta = np.asarray(weights, dtype=float)
    if eta.shape != (n,):
        raise InvalidInputError(f"weight vector must have length {n}")
    if not np.all(np.isfinite(eta)) or np.any(eta < 0):
        raise InvalidInputError("weights must be finite and non-negative")
    if not np.any(eta > 0):
        raise InvalidInputError("at least one agent must have a positive weight")
    return eta


def weighted_laplacian_matrix(decomposition: SpectralDecomposition, weights: np.ndarray) -> np.ndarray:
    """``-(E + L)``, Hurwitz for every connected graph and non-zero ``E``."""
    eta = _check_weights(weights, decomposition.n)
    return -(np.diag(eta) + decomposition.laplacian)


def subsystem_matrix(
    decomposition: SpectralDecomposition, weights: np.ndarray, index: int = 0
) -> Subsystem:
    """Assemble the compact-form matrix for the weight pattern ``weights``.

    The state is ``(e_bar, q_2..n)`` of size ``2n - 1``::

        A = [[-T^T (E + L) T, -[0; I]],
             [[0 | L+ L+],     0     ]]

    with input matrix ``B = blockdiag(T^T, N^T)``.
    """
    n = decomposition.n
    eta = _check_weights(weights, n)
    transform = decomposition.transform
    reduced = decomposition.reduced_laplacian

    top_left = -transform.T @ (np.diag(eta) + decomposition.laplacian) @ transform
    top_right = -np.vstack([np.zeros((1, n - 1)), np.eye(n - 1)])
    bottom_left = np.hstack([np.zeros((n - 1, 1)), reduced @ reduced])
    matrix = np.block([[top_left, top_right], [bottom_left, np.zeros((n - 1, n - 1))]])
    input_matrix = linalg.block_diag(transform.T, decomposition.complement.T)

    frozen_eta = eta.copy()
    frozen_eta.setflags(write=False)
    matrix.setflags(write=False)
    input_matrix.setflags(write=False)
    return Subsystem(index, frozen_eta, matrix, input_matrix, eigenvalues(matrix))


def subsystems(decomposition: SpectralDecomposition, weight_set: Sequence[np.ndarray]) -> List[Subsystem]:
    """Build one subsystem per weight pattern.

    Args:
        decomposition: Eigendecomposition of the Laplacian
        weight_set: Weight vectors, one per mode

    Returns:
        Subsystems indexed by their position in ``weight_set``

    Raises:
        InvalidInputError: If ``weight_set`` is empty or a pattern is malformed
    """
    if len(weight_set) == 0:
        raise InvalidInputError("the weight set is empty")
    return [subsystem_matrix(decomposition, eta, p) for p, eta in enumerate(weight_set)]


def euler_step_limit(mu: np.ndarray) -> float:
    """Largest ``delta`` with ``|1 + delta mu| < 1`` for all ``mu`` in the left half-plane."""
    mu = np.asarray(mu, dtype=complex)
    if np.any(mu.real >= 0):
        raise InvalidInputError("step limit needs eigenvalues with negative real part")
    return float(np.min(-2.0 * mu.real / np.abs(mu) ** 2))


@dataclass(frozen=True)
class StepLimit:
    value: float
    binding: int
    per_subsystem: Tuple[float, ...]


def step_limits(decomposition: SpectralDecomposition, weight_set: Sequence[np.ndarray]) -> StepLimit:
    """Per-subsystem Euler limits and their minimum, the global ``d_bar``."""
    limits = []
    for subsystem in subsystems(decomposition, weight_set):
        if subsystem.abscissa >= -MARGIN:
            raise ConvergenceError(
                f"subsystem {subsystem.index} (weights {subsystem.weights.tolist()}) is not Hurwitz: "
                f"spectral abscissa {subsystem.abscissa:.3e}"
            )
        limits.append(euler_step_limit(subsystem.eigenvalues))
    binding = int(np.argmin(limits))
    logger.debug("step limits %s, binding subsystem %d", limits, binding)
    return StepLimit(limits[binding], binding, tuple(limits))


def max_stable_step(decomposition: SpectralDecomposition, weight_set: Sequence[np.ndarray]) -> float:
    """``d_bar``: every ``I + delta_c A_p`` is Schur for ``delta_c`` in ``(0, d_bar)``."""
    return step_limits(decomposition, weight_set).value


def _complex_list(mu: np.ndarray) -> List[Dict[str, float]]:
    return [{"re": float(m.real), "im": float(m.imag)} for m in mu]


def stability_report(
    decomposition: SpectralDecomposition,
    weight_set: Sequence[np.ndarray],
    delta_c: Optional[float] = None,
) -> Dict:
    """JSON-ready summary of spectra, verdicts and step limits per subsystem."""
    entries = []
    limits: List[Optional[float]] = []
    for subsystem in subsystems(decomposition, weight_set):
        reduced = weighted_laplacian_matrix(decomposition, subsystem.weights)
        verdict = hurwitz_verdict(subsystem.matrix)
        limit = euler_step_limit(subsystem.eigenvalues) if verdict is StabilityVerdict.STABLE else None
        limits.append(limit)
        entry = {
            "index": subsystem.index,
            "weights": subsystem.weights.tolist(),
            "eigenvalues": _complex_list(subsystem.eigenvalues),
            "spectral_abscissa": subsystem.abscissa,
            "hurwitz": verdict.value,
            "weighted_laplacian_hurwitz": hurwitz_verdict(reduced).value,
            "step_limit": limit,
        }
        if delta_c is not None:
            euler = subsystem.euler_matrix(delta_c)
            entry["spectral_radius"] = spectral_radius(euler)
            entry["schur"] = schur_verdict(euler).value
        entries.append(entry)

    finite = [(value, p) for p, value in enumerate(limits) if value is not None]
    report: Dict = {
        "n": decomposition.n,
        "subsystems": entries,
        "reduced_laplacian_eigenvalues": np.linalg.eigvalsh(decomposition.reduced_laplacian).tolist(),
        "all_hurwitz": all(e["hurwitz"] == StabilityVerdict.STABLE.value for e in entries),
        "all_weighted_laplacian_hurwitz": all(
            e["weighted_laplacian_hurwitz"] == StabilityVerdict.STABLE.value for e in entries
        ),
        "max_stable_step": min(finite)[0] if len(finite) == len(limits) else None,
        "binding_subsystem": min(finite)[1] if len(finite) == len(limits) else None,
    }
    if delta_c is not None:
        report["delta_c"] = delta_c
        report["all_schur"] = all(e["schur"] == StabilityVerdict.STABLE.value for e in entries)
    return report


@dataclass(frozen=True)
class StabilityCertificate:
    """Exponential envelope ``kappa * exp(-rate * s)`` or ``kappa * rate ** k``.

    ``rate`` is the decay rate in 1/s for continuous certificates and the
    contraction factor per step for discrete ones.
    """

    mode: CertificateMode
    kappa: float
    rate: float
    safety: float
    seeds: Tuple[int, ...]
    sample_step: float
    samples: int
    fit_margin: float

    def envelope(self, elapsed: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """Evaluate the envelope.

        Args:
            elapsed: Seconds for continuous certificates, steps for discrete ones

        Returns:
            A float for scalar input, otherwise an array shaped like ``elapsed``
        """
        elapsed = np.asarray(elapsed, dtype=float)
        if self.mode is CertificateMode.CONTINUOUS:
            values = self.kappa * np.exp(-self.rate * elapsed)
        else:
            values = self.kappa * np.power(self.rate, elapsed)
        return float(values) if values.ndim == 0 else values

    def to_dict(self) -> Dict:
        return {
            "mode": self.mode.value,
            "kappa": self.kappa,
            "rate": self.rate,
            "safety": self.safety,
            "seeds": list(self.seeds),
            "sample_step": self.sample_step,
            "samples": self.samples,
            "fit_margin": self.fit_margin,
        }


@dataclass(frozen=True)
class CertificateCheck:
    worst_ratio: float
    samples: int
    seeds: Tuple[int, ...]

    @property
    def holds(self) -> bool:
        return self.worst_ratio <= 1.0 + 1e-12

    def to_dict(self) -> Dict:
        return {
            "worst_ratio": self.worst_ratio,
            "samples": self.samples,
            "seeds": list(self.seeds),
            "holds": self.holds,
        }


class _PropagatorGrid:
    """One-step transition matrices of the homogeneous error dynamics over a schedule."""

    def __init__(
        self,
        decomposition: SpectralDecomposition,
        schedule: ModeSchedule,
        mode: CertificateMode,
        step: float,
    ):
        if schedule.departures:
            raise InvalidInputError("certificates are only defined for schedules without departures")
        if schedule.n != decomposition.n:
            raise InvalidInputError("schedule and topology sizes differ")
        self._decomposition = decomposition
        self._cache: Dict[Tuple[bytes, float], np.ndarray] = {}
        self._subsystems: Dict[bytes, Subsystem] = {}
        times: List[float] = [0.0]
        propagators: List[np.ndarray] = []
        epoch_starts: List[int] = []

        if mode is CertificateMode.CONTINUOUS:
            for start, stop, epoch in schedule.epoch_bounds():
                epoch_starts.append(len(propagators))
                if stop <= start:
                    continue
                count = max(1, math.ceil((stop - start) / step - TIME_EPS))
                dt = (stop - start) / count
                matrix = self._propagator(epoch.weights, dt, continuous=True)
                for i in range(1, count + 1):
                    propagators.append(matrix)
                    times.append(start + i * dt if i < count else stop)
        else:
            count = int(math.floor(schedule.horizon_end / step + TIME_EPS))
            previous = None
            for k in range(count):
                t = min(nudge(k * step), schedule.horizon_end)
                eta = schedule.weights_at(t)
                if previous is None or not np.array_equal(eta, previous):
                    epoch_starts.append(k)
                previous = eta
                propagators.append(self._propagator(eta, step, continuous=False))
                times.append(float(k + 1))

        self.times = np.asarray(times)
        self.propagators = propagators
        self.epoch_starts = sorted(set(epoch_starts))

    def _subsystem(self, weights: np.ndarray) -> Subsystem:
        key = np.asarray(weights, dtype=float).tobytes()
        if key not in self._subsystems:
            self._subsystems[key] = subsystem_matrix(self._decomposition, weights, len(self._subsystems))
        return self._subsystems[key]

    def _propagator(self, weights: np.ndarray, step: float, continuous: bool) -> np.ndarray:
        key = (np.asarray(weights, dtype=float).tobytes(), step)
        if key not in self._cache:
            matrix = self._subsystem(weights).matrix
            if continuous:
                self._cache[key] = linalg.expm(matrix * step)
            else:
                self._cache[key] = np.eye(matrix.shape[0]) + step * matrix
        return self._cache[key]

    def start_indices(self, seeds: Iterable[int], per_seed: int, include_switches: bool) -> List[int]:
        steps = len(self.propagators)
        starts = set()
        if include_switches:
            starts.add(0)
            starts.update(s for s in self.epoch_starts if s < steps)
        for seed in seeds:
            rng = np.random.default_rng(seed)
            if steps > 0:
                starts.update(int(s) for s in rng.integers(0, steps, size=per_seed))
        return sorted(starts)

    def sample(self, starts: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
        """Elapsed times and ``||Phi(t_j, t_s)||_2`` for every start ``s`` and ``j >= s``."""
        dimension = 2 * self._decomposition.n - 1
        elapsed: List[np.ndarray] = []
        norms: List[np.ndarray] = []
        for s in starts:
            phi = np.eye(dimension)
            stack = np.empty((len(self.propagators) - s + 1, dimension, dimension))
            stack[0] = phi
            for offset, propagator in enumerate(self.propagators[s:], start=1):
                phi = propagator @ phi
                stack[offset] = phi
            if not np.all(np.isfinite(stack)):
                raise CertificationError(
                    f"transition matrix overflowed from start t={self.times[s]:.6g}; "
                    "the switched dynamics are unstable on this schedule"
                )
            elapsed.append(self.times[s:] - self.times[s])
            norms.append(np.linalg.norm(stack, ord=2, axis=(1, 2)))
        return np.concatenate(elapsed), np.concatenate(norms)


def _fit_envelope(elapsed: np.ndarray, norms: np.ndarray, mode: CertificateMode) -> Tuple[float, float]:
    """Regress the per-bin maxima of ``log ||Phi||`` on elapsed time."""
    usable = norms > NORM_FLOOR
    if usable.sum() < 3 or elapsed[usable].max() <= 0:
        raise CertificationError("too few transition-matrix samples to fit an envelope")
    x = elapsed[usable]
    y = np.log(norms[usable])
    edges = np.linspace(0.0, x.max(), FIT_BINS + 1)
    bins = np.clip(np.digitize(x, edges) - 1, 0, FIT_BINS - 1)
    points_x, points_y = [], []
    for b in np.unique(bins):
        members = np.flatnonzero(bins == b)
        top = members[np.argmax(y[members])]
        points_x.append(x[top])
        points_y.append(y[top])
    if len(points_x) < 2:
        raise CertificationError("transition-matrix samples cover a single elapsed time")
    slope, _ = np.polyfit(points_x, points_y, 1)
    if not slope < 0:
        raise CertificationError(
            f"transition-matrix norms do not decay (fitted log-slope {slope:.3e}); "
            "the dwell time is too short or the step is unstable"
        )
    if mode is CertificateMode.CONTINUOUS:
        rate = -slope
        scaled = norms[usable] * np.exp(rate * x)
    else:
        rate = math.exp(slope)
        scaled = norms[usable] * np.exp(-slope * x)
    return float(rate), float(max(1.0, scaled.max()))


def _as_schedules(schedule: Union[ModeSchedule, Sequence[ModeSchedule]]) -> List[ModeSchedule]:
    if isinstance(schedule, ModeSchedule):
        return [schedule]
    schedules = list(schedule)
    if not schedules:
        raise InvalidInputError("at least one schedule is required")
    return schedules


def _grid_step(schedules: Sequence[ModeSchedule], mode: CertificateMode, delta_c: Optional[float], sample_step: Optional[float]) -> float:
    if mode is CertificateMode.DISCRETE:
        if delta_c is None or not delta_c > 0:
            raise InvalidInputError("discrete certificates need a positive delta_c")
        return float(delta_c)
    if sample_step is not None:
        if not sample_step > 0:
            raise InvalidInputError("sample step must be positive")
        return float(sample_step)
    horizon = max(s.horizon_end for s in schedules)
    return max(horizon / DEFAULT_FIT_POINTS, 1e-3)


def fit_certificate(
    decomposition: SpectralDecomposition,
    weight_set: Optional[Sequence[np.ndarray]],
    schedule: Union[ModeSchedule, Sequence[ModeSchedule]],
    mode: CertificateMode,
    *,
    delta_c: Optional[float] = None,
    sample_step: Optional[float] = None,
    seeds: Sequence[int] = FIT_SEEDS,
    starts_per_seed: int = 4,
    safety: float = DEFAULT_SAFETY,
    dwell: Optional[DwellStats] = None,
    allow_unstable: bool = False,
) -> StabilityCertificate:
    """Fit an exponential envelope to sampled transition-matrix norms.

    Start times are ``t = 0``, every switch time and times drawn from
    ``seeds``. Each start is propagated to the horizon end with exact
    (continuous) or Euler (discrete) one-step matrices. The tightest
    exponential through the per-bin maxima of ``log ||Phi||`` gives the rate;
    ``kappa`` is the smallest factor dominating every sample, inflated by
    ``safety``.

    A discrete certificate is never issued for a step at or above ``d_bar``:
    ``allow_unstable`` lets the simulation run but turns the refusal into a
    failed certification.

    Raises:
        CertificationError: If the sampled norms do not decay, or if
            ``delta_c >= d_bar`` (or some ``I + delta_c A_p`` is not Schur)
            while ``allow_unstable`` is true
        UnstableStepError: If ``delta_c >= d_bar`` and ``allow_unstable`` is false
    """
    mode = CertificateMode(mode)
    schedules = _as_schedules(schedule)
    if safety < 1.0:
        raise InvalidInputError("safety factor must be at least 1")
    if dwell is not None:
        for item in schedules:
            verdict = verify_dwell(item, dwell)
            if not verdict.holds:
                raise CertificationError(
                    f"schedule violates the declared dwell time at t={verdict.first_violation:.6g}"
                )
    step = _grid_step(schedules, mode, delta_c, sample_step)
    if mode is CertificateMode.DISCRETE:
        patterns = list(weight_set) if weight_set else []
        for item in schedules:
            patterns.extend(item.weight_set())
        limit = step_limits(decomposition, patterns)
        d_bar = limit.value
        unstable = [s.index for s in subsystems(decomposition, patterns) if not is_schur(s.euler_matrix(step))]
        if step >= d_bar or unstable:
            if not allow_unstable:
                raise UnstableStepError(step, d_bar)
            raise CertificationError(
                f"no discrete certificate at delta_c={step:.6g} (d_bar={d_bar:.6g}): "
                f"I + delta_c A_p is not Schur for subsystems {unstable or [limit.binding]}"
            )

    elapsed_parts, norm_parts = [], []
    for item in schedules:
        grid = _PropagatorGrid(decomposition, item, mode, step)
        starts = grid.start_indices(seeds, starts_per_seed, include_switches=True)
        elapsed, norms = grid.sample(starts)
        elapsed_parts.append(elapsed)
        norm_parts.append(norms)
    elapsed = np.concatenate(elapsed_parts)
    norms = np.concatenate(norm_parts)

    rate, kappa = _fit_envelope(elapsed, norms, mode)
    kappa *= safety
    certificate = StabilityCertificate(
        mode=mode,
        kappa=kappa,
        rate=rate,
        safety=safety,
        seeds=tuple(seeds),
        sample_step=step,
        samples=int(norms.size),
        fit_margin=0.0,
    )
    margin = float(np.min(certificate.envelope(elapsed) - norms))
    if margin < 0:
        raise CertificationError(f"fitted envelope fails to dominate its own samples (margin {margin:.3e})")
    logger.info("fitted %s certificate kappa=%.6g rate=%.6g from %d samples", mode.value, kappa, rate, norms.size)
    return replace(certificate, fit_margin=margin)


def verify_certificate(
    certificate: StabilityCertificate,
    decomposition: SpectralDecomposition,
    schedule: Union[ModeSchedule, Sequence[ModeSchedule]],
    *,
    seeds: Sequence[int] = VERIFY_SEEDS,
    starts_per_seed: int = 4,
) -> CertificateCheck:
    """Re-sample ``||Phi||`` from held-out start times and compare with the envelope."""
    worst = 0.0
    total = 0
    for item in _as_schedules(schedule):
        grid = _PropagatorGrid(decomposition, item, certificate.mode, certificate.sample_step)
        starts = grid.start_indices(seeds, starts_per_seed, include_switches=False)
        if not starts:
            continue
        elapsed, norms = grid.sample(starts)
        ratios = norms / certificate.envelope(elapsed)
        worst = max(worst, float(ratios.max()))
        total += norms.size
    return CertificateCheck(worst, total, tuple(seeds))


def error_coordinates(
    decomposition: SpectralDecomposition,
    x: np.ndarray,
    v: np.ndarray,
    avg: float,
    w: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """``e_bar = T^T (x - avg 1)`` and ``q = T^T (L v - w)``."""
    transform = decomposition.transform
    e_bar = transform.T @ (np.asarray(x, dtype=float) - avg)
    q = transform.T @ (decomposition.laplacian @ np.asarray(v, dtype=float) - w)
    return e_bar, q


def initial_error_norm(laplacian: np.ndarray, x0: np.ndarray, v0: np.ndarray, weights: np.ndarray, references: np.ndarray) -> float:
    """``||[x0 - avg(0) 1; L v0 - w(0)]||``."""
    w0 = weighted_disagreement(weights, references)
    avg0 = float(np.sum(weights * references) / np.sum(weights))
    return float(np.linalg.norm(np.concatenate([x0 - avg0, laplacian @ v0 - w0])))


def _require(certificate: StabilityCertificate, mode: CertificateMode) -> None:
    if certificate.mode is not mode:
        raise InvalidInputError(f"a {mode.value} certificate is required, got {certificate.mode.value}")


def ct_bound_curve(
    certificate: StabilityCertificate,
    scenario: "CtScenario",
    x0: np.ndarray,
    v0: np.ndarray,
    times: Sequence[float],
) -> np.ndarray:
    """Continuous-time tracking-error bound at each of ``times``.

    The supremum of the smooth input is taken over the integration grid,
    excluding switch instants.
    """
    from active_consensus.ct_sim import time_grid

    _require(certificate, CertificateMode.CONTINUOUS)
    schedule, ensemble = scenario.schedule, scenario.ensemble
    if schedule.departures:
        raise InvalidInputError("error bounds are not defined across agent departures")
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        return times.copy()
    t_end = float(times.max())
    kappa, rate = certificate.kappa, certificate.rate

    init = initial_error_norm(
        scenario.topology.laplacian,
        np.asarray(x0, dtype=float),
        np.asarray(v0, dtype=float),
        schedule.weights_at(0.0),
        ensemble.values(0.0),
    )

    switches = schedule.switch_times
    switches = switches[switches <= t_end * (1 + TIME_EPS) + TIME_EPS]
    jumps = np.empty(switches.size)
    for k in range(1, switches.size + 1):
        delta_avg, delta_w = jumps_at(ensemble, schedule, k)
        jumps[k - 1] = np.linalg.norm(np.concatenate([np.full(schedule.n, delta_avg), delta_w]))

    grid = time_grid(schedule, ensemble, t_end, scenario.step)
    if switches.size:
        near = np.min(np.abs(grid[:, None] - switches[None, :]), axis=1)
        grid = grid[near > TIME_EPS * np.maximum(1.0, grid)]
    rates = np.array([np.linalg.norm(np.concatenate(smooth_derivatives(ensemble, schedule, t))) for t in grid])
    running = np.maximum.accumulate(rates) if rates.size else rates

    positions = np.searchsorted(grid, times * (1 + TIME_EPS) + TIME_EPS, side="right") - 1
    sup = np.where(positions >= 0, running[np.clip(positions, 0, None)] if rates.size else 0.0, 0.0)

    since = times[:, None] - switches[None, :]
    passed = since >= -TIME_EPS * np.maximum(1.0, times[:, None])
    decay = np.where(passed, np.exp(-rate * np.clip(since, 0.0, None)), 0.0)
    switching = kappa * decay @ jumps if switches.size else np.zeros_like(times)

    return kappa * np.exp(-rate * times) * init + switching + kappa / rate * sup


def ct_bound(
    certificate: StabilityCertificate,
    scenario: "CtScenario",
    x0: np.ndarray,
    v0: np.ndarray,
    t: float,
) -> float:
    """Continuous-time tracking-error bound at one instant.

    Args:
        certificate: Continuous certificate for the scenario's modes
        scenario: Scenario the bound is evaluated on
        x0: Initial states
        v0: Initial auxiliary states
        t: Time in seconds

    Returns:
        Upper bound on the error norm at ``t``
    """
    return float(ct_bound_curve(certificate, scenario, x0, v0, [t])[0])


def dt_bound_curve(
    certificate: StabilityCertificate,
    scenario: "DtScenario",
    x0: np.ndarray,
    v0: np.ndarray,
    steps: Sequence[int],
) -> np.ndarray:
    """Discrete-time tracking-error bound at each step index in ``steps``."""
    _require(certificate, CertificateMode.DISCRETE)
    steps = np.asarray(steps, dtype=int)
    if steps.size == 0:
        return np.zeros(0)
    if np.any(steps < 0) or np.any(steps > scenario.steps):
        raise InvalidInputError(f"step indices must lie in 0..{scenario.steps}")
    kappa, omega = certificate.kappa, certificate.rate

    init = initial_error_norm(
        scenario.topology.laplacian,
        np.asarray(x0, dtype=float),
        np.asarray(v0, dtype=float),
        scenario.weights(0),
        scenario.references(0),
    )
    last = int(steps.max())
    increments = np.array([np.linalg.norm(scenario.input_increment(l)) for l in range(last)])
    running = np.maximum.accumulate(increments) if increments.size else increments
    sup = np.array([running[k - 1] if k >= 1 else 0.0 for k in steps])

    power = np.power(omega, steps)
    return kappa * power * init + kappa * (1.0 - power) / (1.0 - omega) * sup


def dt_bound(
    certificate: StabilityCertificate,
    scenario: "DtScenario",
    x0: np.ndarray,
    v0: np.ndarray,
    k: int,
) -> float:
    """Discrete-time tracking-error bound at one step.

    Args:
        certificate: Discrete certificate fitted at the scenario's ``delta_c``
        scenario: Scenario the bound is evaluated on
        x0: Initial states
        v0: Initial auxiliary states
        k: Step index in ``0..scenario.steps``

    Returns:
        Upper bound on the error norm after ``k`` steps
    """
    return float(dt_bound_curve(certificate, scenario, x0, v0, [k])[0])


def expm_oracle(matrix: np.ndarray, t: float = 1.0) -> np.ndarray:
    """``exp(A t)`` by scaling and squaring, for small reference computations."""
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError("matrix exponential needs a square matrix")
    if a.shape[0] > EXPM_MAX_SIZE:
        raise InvalidInputError(f"matrix exponential oracle is limited to {EXPM_MAX_SIZE}x{EXPM_MAX_SIZE}")
    return linalg.expm(a * t)
