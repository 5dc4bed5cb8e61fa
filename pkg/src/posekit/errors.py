"""Exception types shared across the toolkit."""


class PosekitError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(PosekitError, ValueError):
    """Input violates a documented precondition."""


class EmptyForegroundError(InvalidInputError):
    """No valid foreground pixels to back-project."""


class InsufficientPointsError(InvalidInputError):
    """Fewer correspondences than the solver needs."""


class DegenerateConfigurationError(InvalidInputError):
    """Point configuration is rank-deficient (coincident or collinear)."""


class NoConsensusError(PosekitError):
    """RANSAC found no model with enough inliers."""


class RegistrationFailedError(PosekitError):
    """ICP lost correspondences and cannot continue."""


class NoOverlapError(PosekitError):
    """Initialization silhouette does not overlap the target mask."""
