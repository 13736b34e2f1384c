"""Exception types raised across the package.

Every error that callers are expected to catch derives from
:class:`CsiSentryError`; a few also derive from the matching builtin so
generic code (``except ValueError`` etc.) keeps working.
"""


class CsiSentryError(Exception):
    """Base class for all errors raised by this package."""


# --- wire codec ---

class Truncated(CsiSentryError):
    """Byte buffer too short for the header or the declared payload."""


class LengthMismatch(CsiSentryError, ValueError):
    """Header length field disagrees with 2 * 30 * ntx * nrx."""


class BadDims(CsiSentryError, ValueError):
    """Antenna/stream counts outside 1..3, or matrix shape/values invalid."""


class IndexOutOfRange(CsiSentryError, IndexError):
    """Subcarrier index outside 0..29."""


# --- transport ---

class BindFailure(CsiSentryError, OSError):
    """Server could not bind its endpoint."""


class ConnectFailure(CsiSentryError, OSError):
    """Client could not reach the server endpoint."""


class ConnectionLost(CsiSentryError, OSError):
    """Connection dropped mid-stream; ``sent`` holds the partial count."""

    def __init__(self, message: str, sent: int = 0):
        super().__init__(message)
        self.sent = sent


class Closed(CsiSentryError):
    """Queue operation after shutdown."""


# --- dsp ---

class InvalidScale(CsiSentryError, ValueError):
    """All RSSI fields are zero; packet cannot be scaled to absolute units."""


class ZeroPower(CsiSentryError, ValueError):
    """CSI matrix carries no power; scale factor undefined."""


class BadWindow(CsiSentryError, ValueError):
    """Variance window smaller than 2."""


# --- store ---

class OutOfOrder(CsiSentryError, ValueError):
    """Appended packet_id does not exceed the last persisted one."""


class IoFailure(CsiSentryError, OSError):
    """Underlying file operation failed or the log is corrupt mid-file."""


class BadRange(CsiSentryError, ValueError):
    """Query range with t0 > t1."""


# --- synth ---

class EventOutOfRange(CsiSentryError, ValueError):
    """Motion event not contained in [0, duration]."""


# --- anomaly ---

class TooShort(CsiSentryError, ValueError):
    """Series shorter than one segment (or one DWT cascade)."""


class TooFewSegments(CsiSentryError, ValueError):
    """Fewer training segments than clusters."""


class TooFew(CsiSentryError, ValueError):
    """Not enough samples to calibrate a threshold."""


# --- classify ---

class UnknownLabel(CsiSentryError, ValueError):
    """Label outside the six-class activity vocabulary."""


class MalformedLine(CsiSentryError, ValueError):
    """Unparseable dataset line; carries the 1-based line number."""

    def __init__(self, message: str, line_number: int = 0):
        super().__init__(message)
        self.line_number = line_number


class InconsistentF(CsiSentryError, ValueError):
    """Channel count differs across time steps or samples."""


class EmptyDataset(CsiSentryError, ValueError):
    """Operation requires at least one sample."""


class DimMismatch(CsiSentryError, ValueError):
    """Input dimensionality does not match the trained model."""
