"""Exception types raised across the package."""


class MotionFCError(Exception):
    """Base class for all package errors."""


class MissingReferenceState(MotionFCError):
    pass


class UnknownAgent(MotionFCError):
    pass


class DegenerateLane(MotionFCError):
    pass


class UnknownObjectType(MotionFCError):
    pass


class ShapeMismatch(MotionFCError, ValueError):
    pass


class NotScalarLoss(MotionFCError):
    pass


class MissingGradients(MotionFCError):
    pass


class NoValidFuture(MotionFCError):
    pass


class MixedHorizons(MotionFCError):
    pass


class EmptyDataset(MotionFCError):
    pass


class NonFiniteLoss(MotionFCError):
    def __init__(self, step: int, value: float):
        super().__init__(f"non-finite loss {value!r} at step {step}")
        self.step = step
        self.value = value


class CorruptCheckpoint(MotionFCError):
    pass


class TooFewPoints(MotionFCError):
    pass


class ParseError(MotionFCError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.field = field


class InvariantViolation(MotionFCError):
    def __init__(self, check: str, detail: str = ""):
        super().__init__(f"{check}: {detail}" if detail else check)
        self.check = check


class ConfigError(MotionFCError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
