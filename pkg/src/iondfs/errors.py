"""Exception types raised by the iondfs toolkit."""


class IonDfsError(Exception):
    """Base class for all toolkit errors."""


class NonPositiveModeError(IonDfsError):
    """A mode eigenvalue is not strictly positive (unstable configuration)."""


class QuadratureNotConvergedError(IonDfsError):
    """Grid-refinement check of a quadrature exceeded its tolerance."""


class GridResolutionError(IonDfsError):
    """Schedule grid step too coarse for the fastest mode."""


class AdiabaticityViolatedError(IonDfsError):
    """A designed pulse cannot satisfy the max|df/dt| / omega bound."""


class IncommensurateModesError(IonDfsError):
    """Refocusing cycle length is not a common period of the addressed modes."""


class DimensionMismatchError(IonDfsError):
    """Operator or state dimensions are inconsistent with the Hilbert space."""


class DimensionGuardError(IonDfsError):
    """Requested Hilbert space exceeds the hard dimension guard."""


class NotConvergedError(IonDfsError):
    """Step-doubling check of a propagator exceeded its tolerance."""


class FockCutoffError(IonDfsError):
    """Population in the top Fock levels exceeds the truncation guard."""


class ZeroTraceError(IonDfsError):
    """Fidelity projector has zero trace."""


class NotNormalizedError(IonDfsError):
    """Input amplitudes are not normalized."""


class LeakageAboveThresholdError(IonDfsError):
    """Extracted logical gate leaks more than the configured bound."""


class ModelMismatchError(IonDfsError):
    """Inputs violate the assumptions of the simplified noise model."""


class RefocusPremiseViolatedError(IonDfsError):
    """Second refocusing half-cycle is not the exact sign flip of the first."""


class ConfigError(IonDfsError):
    """Invalid or incomplete run configuration."""
