"""Exception hierarchy shared by all moeload modules."""


class MoeLoadError(Exception):
    """Base class for all errors raised by this package."""


class UnknownLayer(MoeLoadError):
    def __init__(self, layer, known):
        super().__init__(f"layer {layer} not in trace layers {list(known)}")
        self.layer = layer


class ZeroRowSum(MoeLoadError):
    def __init__(self, iteration):
        super().__init__(f"token counts sum to zero at iteration {iteration}")
        self.iteration = iteration


class IndexOutOfRange(MoeLoadError, IndexError):
    pass


class RangeOutOfBounds(MoeLoadError):
    pass


class ParseError(MoeLoadError):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ValidationError(MoeLoadError):
    def __init__(self, iteration, layer, reason):
        super().__init__(f"iteration {iteration}, layer {layer}: {reason}")
        self.iteration = iteration
        self.layer = layer
        self.reason = reason


class NonContiguousIterations(MoeLoadError):
    pass


class IoError(MoeLoadError):
    pass


class InvalidConfig(MoeLoadError):
    pass


class NonStationaryCoefficients(MoeLoadError):
    pass


class SeriesTooShort(MoeLoadError):
    pass


class HistoryTooShort(MoeLoadError):
    pass


class ShapeMismatch(MoeLoadError):
    pass


class InsufficientData(MoeLoadError):
    pass


class DivergedLoss(MoeLoadError):
    pass


class NonFiniteForecast(MoeLoadError):
    pass


class LengthMismatch(MoeLoadError):
    pass


class TraceTooShort(MoeLoadError):
    pass


class CoverageMismatch(MoeLoadError):
    pass


class InfeasibleMinimum(MoeLoadError):
    pass
