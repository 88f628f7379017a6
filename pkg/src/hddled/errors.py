"""Exception hierarchy shared by every layer of the link."""


class LinkError(Exception):
    """Base class for all errors raised by this package."""


class FramingError(LinkError, ValueError):
    pass


class PayloadSizeError(FramingError):
    pass


class PreambleMismatch(FramingError):
    pass


class CrcMismatch(FramingError):
    def __init__(self, expected: int, received: int):
        super().__init__(f"CRC mismatch: computed 0x{expected:04X}, received 0x{received:04X}")
        self.expected = expected
        self.received = received


class TruncatedFrame(FramingError):
    pass


class InvalidSymbol(LinkError, ValueError):
    """A slot pattern that the line code can never produce (e.g. Manchester 00/11)."""


class CalibrationRangeError(LinkError, ValueError):
    """Requested read size or on-time lies outside the calibrated LED range."""


class DegenerateTrace(LinkError, ValueError):
    """Trace has no usable ON/OFF contrast."""


class SyncNotFound(LinkError):
    pass


class ConfigError(LinkError, ValueError):
    pass


class InvalidAxis(ConfigError):
    pass
