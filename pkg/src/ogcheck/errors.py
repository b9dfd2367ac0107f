"""Exception hierarchy shared by all ogcheck modules."""


class OgpError(Exception):
    """Base for all errors raised by this package."""


class ParseError(OgpError):
    """Syntax error with source position."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{line}:{column}: {message}" if line else message)
        self.line = line
        self.column = column


class ResolveError(OgpError):
    """Undeclared identifier, bad type, or missing domain in a parsed file."""


class LabelError(OgpError):
    """Labelling violation, e.g. a duplicated explicit label."""


class ContractError(OgpError):
    """An operation was called outside its contract (unlabelled input, DO
    where only loop-free statements are allowed, malformed proof node)."""


class EvalError(OgpError):
    """Expression evaluation failed (type mismatch at runtime)."""


class ResourceCapError(OgpError):
    """A configurable enumeration cap was exceeded."""

    def __init__(self, message: str, size: int = 0):
        super().__init__(message)
        self.size = size


class DomainEscapeError(OgpError):
    """A reachable transition wrote a value outside a variable's domain."""
