"""Exception hierarchy shared by all glab modules."""


class GlabError(Exception):
    """Base class for library errors."""


class InvalidDimensionError(GlabError, ValueError):
    pass


class InconsistentFlagError(GlabError, ValueError):
    """A direction does not lie in the subspace it is paired with."""


class CarrierViolationError(GlabError, ValueError):
    def __init__(self, message, index=None):
        super().__init__(message if index is None else f"{message} (sample {index})")
        self.index = index


class InvalidTransformError(GlabError, ValueError):
    pass


class UnsupportedBodyError(GlabError, NotImplementedError):
    """The requested functional is not implemented for this body type or dimension."""


class NoFitError(GlabError, ValueError):
    """Reference measure vanishes on every probe, so no constant can be fitted."""


class SchemaError(GlabError, ValueError):
    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
