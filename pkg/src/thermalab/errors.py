"""Exception types raised across thermalab."""


class ThermalabError(Exception):
    """Base class for every error raised by this package."""


class NumericFailure(ThermalabError):
    """A numerical routine could not produce a trustworthy result."""


class NonConvergence(NumericFailure):
    pass


class FitFailure(NumericFailure):
    pass


class DimensionMismatch(ThermalabError, ValueError):
    pass


class InvalidDensity(ThermalabError, ValueError):
    pass


class OutOfRange(ThermalabError, ValueError):
    pass


class DegenerateSupport(ThermalabError, ValueError):
    pass


class TooFewStates(ThermalabError, ValueError):
    pass


class TooFewSamples(ThermalabError, ValueError):
    pass


class TooFewLevels(ThermalabError, ValueError):
    pass


class TooFewRealizations(ThermalabError, ValueError):
    pass


class InsufficientSpan(ThermalabError, ValueError):
    pass


class SpanTooSmall(ThermalabError, ValueError):
    pass


class EmptyBin(ThermalabError, ValueError):
    pass


class DegenerateCoherent(ThermalabError, ValueError):
    pass


class ConfigError(ThermalabError, ValueError):
    """Bad experiment configuration; ``lineno`` points into the config file."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class MissingArtifacts(ThermalabError, FileNotFoundError):
    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__("missing artifacts: " + ", ".join(self.missing))
