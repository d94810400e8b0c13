"""Exception and warning types raised across the package."""


class GPJetError(Exception):
    """Base class for all package errors."""


# physics_jet
class NoRealRoot(GPJetError):
    """The inlet-slope equation has no admissible root in the search bracket."""


class SingularAssembly(GPJetError):
    """The momentum balance cannot be solved for the axial acceleration."""


class IntegrationFailure(GPJetError):
    """An ODE integration stopped early or produced non-finite values."""


# sewing_machine
class PoleSingularity(GPJetError):
    """Contact point reached the r -> 0 pole of the polar equations."""


class NegativeRatio(GPJetError, ValueError):
    pass


class UnstableRegime(GPJetError):
    """Speed ratio below 1: no straight deposit, so no lag can be measured."""


class NonPositiveRatio(GPJetError, ValueError):
    pass


# gp_core / multi_fidelity
class NotPositiveDefinite(GPJetError):
    """Covariance matrix stayed indefinite after the full jitter ladder."""


class NestedDesignViolation(GPJetError, ValueError):
    """High-fidelity inputs are not a subset of the low-fidelity inputs."""


class DegenerateDataWarning(UserWarning):
    """Training targets are constant; the model falls back to its prior mean."""


# planner
class GridExhausted(GPJetError):
    """No admissible candidate is left on the acquisition grid."""


# metrology
class GeometryOverflow(GPJetError, ValueError):
    """Rendered jet does not fit inside the frame."""


class RowMismatch(GPJetError, ValueError):
    pass


class NoDeposition(GPJetError):
    """The scanned row closest to the collector contains no jet pixels."""


# virtual_machine
class OutOfDomain(GPJetError, ValueError):
    pass


# cli
class EmptyTrace(GPJetError, ValueError):
    pass


class ConfigError(GPJetError, ValueError):
    pass
