__all__ = [
    "ConfigError",
    "ConvergenceError",
    "Error",
    "InconsistencyError",
    "SingularFeedbackError",
]


class Error(Exception):
    """The base class of the errors raised by TurboLike.py.

    Contains the following attributes:

    .. attribute:: message

       The error message.
    """

    def __init__(self, message):
        super().__init__(message)
        self.message = message

    def __setattr__(self, name, value):
        if name == "message":
            super().__setattr__("message", value)
            super().__setattr__("args", (value,))
            return

        super().__setattr__(name, value)


class ConfigError(Error, ValueError):
    """An ensemble, generator, or run configuration is invalid.

    .. attribute:: key

       The name of the offending setting, if known.
    """

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class ConvergenceError(Error):
    """A knowledge-set chain did not reach its stationary distribution.

    .. attribute:: residual

       The stationarity residual at the moment the iteration gave up.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SingularFeedbackError(Error):
    """The feedback equations of an acausal encoder have no unique solution.

    .. attribute:: seed

       The seed that produced the offending permutations, or ``None`` if the
       permutations were given explicitly.

    .. attribute:: rank_deficiency

       The number of feedback bits left undetermined by the equations.
    """

    def __init__(self, message, seed=None, rank_deficiency=None):
        super().__init__(message)
        self.seed = seed
        self.rank_deficiency = rank_deficiency


class InconsistencyError(Error):
    """The erasure decoder received two different known values for one bit.

    Over the BEC this never happens for a correctly wired code, so the error
    is always fatal.

    .. attribute:: bit

       The global index of the bit.
    """

    def __init__(self, message, bit=None):
        super().__init__(message)
        self.bit = bit
