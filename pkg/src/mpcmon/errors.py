"""Exception hierarchy shared by all mpcmon modules."""


class MonitorError(Exception):
    """Base class for every error raised by this package."""


class ModulusError(MonitorError):
    """Invalid modulus, or an operation mixing elements of different moduli."""


class SchemeError(MonitorError):
    """Operation applied to shares of an incompatible scheme or sharing type."""


class MaterialError(MonitorError):
    """Preprocessing material exhausted, malformed, or consumed twice."""


class TypeCheckError(MonitorError):
    """A program failed static type checking.

    Carries the structured diagnostics so callers can render them.
    """

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))


class ParseError(MonitorError):
    """Malformed program text or config file; records line and column."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}" + (f", col {column}" if column is not None else "") + f": {message}"
        super().__init__(message)


class CompileError(MonitorError):
    """Specification cannot be lowered (type error, range overflow, ...)."""


class ProtocolError(MonitorError):
    """Parties disagree on label, round counter, or message structure."""
