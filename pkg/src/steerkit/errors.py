"""Exception types shared across the package."""


class SteerkitError(Exception):
    """Base class for all steerkit errors."""


class GroupMismatchError(SteerkitError):
    """Elements from incompatible groups (or grids) were combined."""


class InvalidSubgroupError(SteerkitError):
    """A claimed subgroup is not closed under composition/inverse."""


class NotARepresentationError(SteerkitError):
    """Input matrices fail the homomorphism property (or character test)."""


class NumericalFailureError(SteerkitError):
    """A numerical cross-check failed (null-space dim, conditioning, ...)."""


class AdmissibilityError(SteerkitError):
    """A nonlinearity was applied to a capsule it is not admissible for."""


class TypeSystemError(SteerkitError):
    """Fiber types are incompatible (e.g. residual addition of unequal specs)."""


class UtilizationUndefinedError(SteerkitError):
    """Parameter utilization requested for a pair with zero intertwiners."""


class TrainingFailureError(SteerkitError):
    """Training diverged (non-finite loss)."""
