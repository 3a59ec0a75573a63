"""
Exception hierarchy for the QPKE rewinding simulator.

Every failure the library signals derives from SimulationError so the CLI
can map it to an exit code. Decryption failure (⊥) is a return value, not
an exception.
"""


class SimulationError(Exception):
    """Base class for all simulator errors."""


class LayoutMismatchError(SimulationError):
    """Operands disagree on register layout or a segment is missing."""


class QubitBudgetError(SimulationError):
    """A construction would exceed the configured qubit budget."""


class NonUnitaryError(SimulationError):
    """A dense operator body failed the unitarity check."""


class MeasurementError(SimulationError):
    """The observed branch has (numerically) zero norm."""


class DomainTooLargeError(SimulationError):
    """A classical function table would be too large to tabulate."""


class KeyConsumedError(SimulationError):
    """A public-key component was measured a second time."""


class QueryBudgetExceededError(SimulationError):
    """An adversary exceeded its decryption-oracle query budget."""


class SpectralError(SimulationError):
    """Eigenanalysis of the success operator could not be carried out."""


class SpreadPreconditionError(SimulationError):
    """Eigenvalues on the probe subspace are not concentrated around q."""


class ConfigError(SimulationError):
    """Invalid experiment configuration (usage error)."""
