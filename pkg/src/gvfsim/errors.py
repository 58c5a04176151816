"""Exception hierarchy shared by the guidance, DSL and runner layers."""


class GvfError(Exception):
    pass


class ExprError(GvfError, ValueError):
    """Problem with a path expression; ``pos`` is a 0-based column in the source."""

    def __init__(self, message: str, pos: int | None = None):
        self.pos = pos
        if pos is not None:
            message = f"{message} (at column {pos})"
        super().__init__(message)


class ParseError(ExprError):
    pass


class DomainError(ExprError):
    pass


class GuidanceError(GvfError):
    pass


class SingularField(GuidanceError):
    pass


class DegenerateHorizontal(GuidanceError):
    pass


class StallSpeed(GuidanceError):
    pass


class ZeroGroundSpeed(GuidanceError):
    pass


class ConfigError(GvfError, ValueError):
    pass
