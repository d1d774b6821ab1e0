"""Exceptions raised by the laboratory.

Everything derives from ValueError so callers that only guard against bad
input keep working.
"""


class LabError(ValueError):
    """Base class for all laboratory errors."""


class DimensionError(LabError):
    """Operands live on different or unsupported Hilbert-space dimensions."""


class HermiticityError(LabError):
    """A matrix expected to be self-adjoint is not."""


class StateError(LabError):
    """A state vector or density operator violates its invariants."""


class DecompositionError(LabError):
    """An eigendecomposition failed or produced an inconsistent result."""


class InvalidScenarioError(LabError):
    """A Bell scenario violates dichotomy or cross-commutativity."""


class StructureError(LabError):
    """An operation needs tensor structure the scenario does not carry."""


class IncompatibleObservablesError(LabError):
    """Observables that must be jointly measured do not commute."""


class ClusterAmbiguityError(LabError):
    """Eigenvalues cannot be grouped unambiguously into outcomes."""


class AssignmentCapError(LabError):
    """Deterministic assignment enumeration exceeds the configured cap."""


class ConstructionError(LabError):
    """Preconditions of an eigenvector construction are not met."""


class CovarianceError(LabError):
    """A covariance operator is not positive semidefinite or has zero trace."""


class SamplingError(LabError):
    """A Monte Carlo run was requested with degenerate parameters."""


class FormatError(LabError):
    """A JSON document does not match the expected operator, state or config format."""
