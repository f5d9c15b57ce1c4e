"""
Exception hierarchy for the flowerbot inspection toolkit.

Library code raises these; only the CLI turns them into exit codes.
"""


class FlowerbotError(Exception):
    """Base class for every error raised by the toolkit."""


# ==================== Images ====================

class ImageError(FlowerbotError):
    """Problems decoding, encoding or reshaping a raster image."""


class UnknownFormat(ImageError):
    """The byte stream does not start with a PNG or P6 signature."""


class CorruptStream(ImageError):
    """The stream has a known signature but a truncated or invalid payload."""


class ZeroDimension(ImageError):
    """An image (or region of one) would have zero width or height."""


class ImageTooLarge(ImageError):
    """The header declares more pixels than the decoder will allocate."""


class ZeroFactor(ImageError, ValueError):
    """Resize factor below 1."""


class DimensionMismatch(ImageError, ValueError):
    """Two inputs that must share a pixel grid do not."""


# ==================== Kernels and masks ====================

class KernelError(FlowerbotError, ValueError):
    """Invalid filter kernel or structuring element."""


class EvenDimension(KernelError):
    """Kernel width or height is even (no center cell)."""


class EmptyKernel(KernelError):
    """Kernel has no active cell, or its center cell is inactive."""


class UnknownLabel(FlowerbotError, KeyError):
    """Requested label does not occur in the label map."""

    def __str__(self) -> str:
        return Exception.__str__(self)


# ==================== Reports, config, simulation ====================

class MalformedReport(FlowerbotError, ValueError):
    """JSON report cannot be parsed back into a QualityReport."""


class ConfigError(FlowerbotError, ValueError):
    """Config file or flag value is unknown, unparsable or out of range."""


class NonPositiveDt(FlowerbotError, ValueError):
    """Simulation time step must be strictly positive."""


class WorldFileError(FlowerbotError, ValueError):
    """World file line cannot be parsed."""


# ==================== Wire protocol ====================

class FrameError(FlowerbotError):
    """A frame on the wire violates the framing rules."""


class BadMagic(FrameError):
    """Frame does not start with the FLRV magic."""


class UnsupportedVersion(FrameError):
    """Frame version byte is not the supported protocol version."""


class UnknownType(FrameError):
    """Frame message type is outside the enumerated set."""


class Oversize(FrameError):
    """Declared payload length exceeds the 16 MiB cap."""


class Truncated(FrameError):
    """Stream ended before the frame was complete."""


class BadPayload(FrameError):
    """Payload size does not fit the message type (e.g. a CMD that is not 16 bytes)."""


class LinkError(FlowerbotError):
    """Client-side failure talking to an inspection server."""


class ConnectionFailed(LinkError):
    """Server could not be reached."""


class ProtocolError(LinkError):
    """Server sent frames in an unexpected order or shape."""


class ServerError(ProtocolError):
    """Server answered with an ERROR frame; the message is kept verbatim."""

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message
