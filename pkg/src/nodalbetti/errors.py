"""Exception hierarchy shared by all modules."""


class NodalError(Exception):
    """Base class for all library errors."""


class ConfigError(NodalError):
    pass


class NumericError(NodalError):
    pass


class MomentOverflowError(NumericError):
    def __init__(self, msg="moment overflow"):
        super().__init__(msg)


class DegenerateFieldError(NumericError):
    def __init__(self, msg="nondegenerate axiom violated"):
        super().__init__(msg)


class EmbeddingError(NumericError):
    def __init__(self, msg="embedding not PSD"):
        super().__init__(msg)


class GridTooCoarseError(NumericError):
    def __init__(self, msg="grid too coarse"):
        super().__init__(msg)


class ChartRangeError(NumericError):
    def __init__(self, msg="chart out of range"):
        super().__init__(msg)


class DomainTooSmallError(NumericError):
    def __init__(self, msg="domain too small"):
        super().__init__(msg)


class NoEvaluatorError(NumericError):
    def __init__(self, msg="no analytic evaluator"):
        super().__init__(msg)


class DegenerateKacRiceError(NumericError):
    def __init__(self, msg="degenerate C_G"):
        super().__init__(msg)


class GridFormatError(NodalError):
    """Malformed NGRD payload (bad magic, unsupported version, truncation)."""


class ReplicateFailureError(NumericError):
    def __init__(self, msg="too many aborted replicates"):
        super().__init__(msg)
