class NHFError(Exception):
    """Base class for library errors."""


class EigenSolverError(NHFError):
    def __init__(self, message, **diagnostics):
        self.diagnostics = diagnostics
        detail = ", ".join(f"{k}={v}" for k, v in diagnostics.items())
        super().__init__(f"{message} ({detail})" if detail else message)


class DimensionError(NHFError):
    pass


class ConvergenceError(NHFError):
    pass


class ChannelError(NHFError, ValueError):
    pass


class TimeQuadratureWarning(UserWarning):
    pass


class AmbiguousSelectionWarning(UserWarning):
    pass


class DefectiveMatrixWarning(UserWarning):
    pass


class ConfigError(NHFError, ValueError):
    pass
