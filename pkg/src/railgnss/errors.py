"""Exception hierarchy shared by every stage."""


class RailGnssError(Exception):
    """Base class for toolkit errors."""


class IngestError(RailGnssError, ValueError):
    """Malformed or inconsistent input file."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class NoEphemerisError(RailGnssError, LookupError):
    """No usable broadcast ephemeris for a satellite at a given time."""


class NumericalError(RailGnssError, ArithmeticError):
    """An iterative computation failed to converge or became degenerate."""


class ConfigError(RailGnssError, ValueError):
    """Invalid pipeline configuration."""
