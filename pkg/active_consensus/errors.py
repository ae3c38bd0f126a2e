"""Exception hierarchy for the active consensus package."""

from typing import Optional


class ConsensusError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(ConsensusError, ValueError):
    """Input rejected by validation (shape, sign, range, symmetry)."""


class DisconnectedGraphError(InvalidInputError):
    """The communication graph is not connected."""


class HorizonError(InvalidInputError):
    """A time or step query falls outside the declared horizon."""


class ConfigError(InvalidInputError):
    """A scenario document failed to parse or validate."""


class NonFiniteStateError(ConsensusError, ArithmeticError):
    """A simulated state became NaN or infinite."""

    def __init__(self, message: str, time: Optional[float] = None, step: Optional[int] = None):
        """Initialize with the time (seconds) or step index of the failure.

        Args:
            message: Human-readable description
            time: Simulation time at which the state was found non-finite
            step: Discrete step index at which the state was found non-finite
        """
        details = []
        if time is not None:
            details.append(f"t={time:.6g}")
        if step is not None:
            details.append(f"k={step}")
        suffix = f" ({', '.join(details)})" if details else ""
        super().__init__(f"{message}{suffix}")
        self.time = time
        self.step = step


class ConvergenceError(ConsensusError):
    """The dense eigensolver failed to converge or produced a poor residual."""


class CertificationError(ConsensusError):
    """No decaying exponential envelope fits the sampled transition matrices."""


class UnstableStepError(ConsensusError):
    """The communication period is not below the maximum stable Euler step."""

    def __init__(self, delta_c: float, max_step: float):
        super().__init__(
            f"Communication period {delta_c:.6g} s is not below the maximum stable "
            f"step {max_step:.6g} s; pass --allow-unstable to run anyway."
        )
        self.delta_c = delta_c
        self.max_step = max_step
