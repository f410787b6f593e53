"""Exception types raised by relayblock."""


class InvalidParameterError(ValueError):
    """A physical or model parameter is outside its valid range."""


class SingularGeometryError(ValueError):
    """Target and interferer positions make the path-loss ratio unbounded."""


class InvalidMomentsError(ValueError):
    """Moments cannot come from a lognormal variable (m2 < m1**2 or m1 <= 0)."""


class EmptyClassRangeError(ValueError):
    """No subcarrier demand reaches the probability threshold."""


class StateSpaceTooLargeError(RuntimeError):
    """Enumeration would exceed the state budget; use the occupancy recursion."""


class ConfigError(ValueError):
    """Malformed or inconsistent scenario file.

    ``line`` is the 1-based line number in the source file when known.
    """

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None and line is not None:
            where = f"{path}:{line}: "
        elif line is not None:
            where = f"line {line}: "
        elif path is not None:
            where = f"{path}: "
        super().__init__(where + message)
