"""Exception types raised across the emulator."""


class EmulatorError(Exception):
    """Base class for all errors raised by this package."""


class ZeroDistance(EmulatorError):
    """Two endpoints of a path coincide."""


class InvalidRho(EmulatorError):
    """Dilation factor outside the modulation-approximation regime."""


class RankDeficient(EmulatorError):
    """A least-squares system is too ill-conditioned to solve without regularization."""


class InsufficientData(EmulatorError):
    """Fewer samples than unknowns."""


class UnsupportedLength(EmulatorError):
    """Fractional-delay filter length other than 4 or 8 taps."""


class DelayOutOfRange(EmulatorError):
    """Requested delay falls outside the buffered history of a delay line."""


class BufferUnderrun(DelayOutOfRange):
    """The emulator needed samples older than any delay line retains."""


class CausalityViolation(EmulatorError):
    """A node output would depend on samples that have not been produced yet."""


class ConfigError(EmulatorError):
    """Scenario parameters are inconsistent."""


class SchemaError(ConfigError):
    """A scenario document failed validation; ``path`` names the offending field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class MissingRef(ConfigError):
    """A scenario references a file that does not exist."""

    def __init__(self, filename):
        super().__init__(f"referenced file not found: {filename}")
        self.filename = str(filename)


class BandExceeded(EmulatorError):
    """Waveform occupies more bandwidth than the oversampling margin allows."""


class EmptyTemplate(EmulatorError):
    """Matched filter template has no samples."""
