"""Exception hierarchy shared by every sessionlens module."""


class SessionlensError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(SessionlensError):
    """Array dimensions are inconsistent with the declared parameter shapes."""


class InputError(SessionlensError):
    """An input value is outside its contract (non-finite, bad label, ...)."""


class FormatError(SessionlensError):
    """A file or stream does not match its documented record format."""


class SchemaError(SessionlensError):
    """Feature schema violated: unknown feature, fingerprint mismatch, ..."""


class ConfigError(SessionlensError):
    """An invalid configuration value (probabilities, counts, flags)."""


class SplitError(SessionlensError):
    """A dataset split request cannot be satisfied."""


class EvalError(SessionlensError):
    """Evaluation cannot proceed (e.g. empty effective eval set)."""


class ClusteringError(SessionlensError):
    """Clustering preconditions violated (fewer usable points than clusters)."""


class TrainingDiverged(SessionlensError):
    """Training aborted because the loss became non-finite."""


class IntegrityError(SessionlensError):
    """A persisted payload failed its checksum or structural validation."""


class VersionError(SessionlensError):
    """A persisted payload declares an unsupported format version."""


class ServiceError(SessionlensError):
    """The service cannot satisfy a request (model missing, exports absent)."""
