"""
Wire module for the flowerbot inspection toolkit
Length-prefixed TCP framing between a robot (client) and an inspection host (server)

Header layout, big-endian:
    magic   4 bytes  b"FLRV"
    version 1 byte   1
    type    1 byte   1 HELLO, 2 IMAGE, 3 REPORT, 4 CMD, 5 ERROR
    length  4 bytes  payload size, at most 16 MiB
"""

import io
import socket
import socketserver
import struct
import threading
from dataclasses import dataclass
from enum import IntEnum
from typing import BinaryIO, Optional, Tuple, Union

from .config import PilotSettings, PipelineConfig, Settings
from .diagnose import QualityReport, inspect, report_from_json, report_to_json
from .errors import (
    BadMagic, BadPayload, ConfigError, ConnectionFailed, FrameError, ImageError,
    MalformedReport, Oversize, ProtocolError, ServerError, Truncated,
    UnknownType, UnsupportedVersion,
)
from .logger import get_logger
from .pilot import CameraModel, MotionCommand, bearing_from_centroid, steer
from .raster import ImageFormat, RasterImage, decode_image, encode_image

logger = get_logger(__name__)

MAGIC = b"FLRV"
VERSION = 1
HEADER = struct.Struct(">4sBBI")
HEADER_SIZE = HEADER.size
MAX_PAYLOAD = 16 * 1024 * 1024
COMMAND = struct.Struct(">dd")

DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 5757

Endpoint = Tuple[str, int]


class MsgType(IntEnum):
    HELLO = 1
    IMAGE = 2
    REPORT = 3
    CMD = 4
    ERROR = 5


@dataclass(frozen=True)
class Frame:
    msg_type: MsgType
    payload: bytes = b""

    def __post_init__(self):
        object.__setattr__(self, "msg_type", MsgType(self.msg_type))
        object.__setattr__(self, "payload", bytes(self.payload))

    @property
    def length(self) -> int:
        return len(self.payload)


def _check_payload(msg_type: MsgType, size: int) -> None:
    if msg_type is MsgType.CMD and size != COMMAND.size:
        raise BadPayload(f"CMD payload must be {COMMAND.size} bytes, got {size}")
    if msg_type in (MsgType.IMAGE, MsgType.REPORT, MsgType.ERROR) and size == 0:
        raise BadPayload(f"{msg_type.name} payload must not be empty")


def encode_frame(frame: Frame) -> bytes:
    """
    Serialize a frame to header + payload.

    Raises:
        Oversize: payload larger than 16 MiB
        BadPayload: payload size invalid for the message type
    """
    if frame.length > MAX_PAYLOAD:
        raise Oversize(f"payload of {frame.length} bytes exceeds {MAX_PAYLOAD}")
    _check_payload(frame.msg_type, frame.length)
    return HEADER.pack(MAGIC, VERSION, int(frame.msg_type), frame.length) + frame.payload


def _read_exact(stream: BinaryIO, size: int, what: str) -> bytes:
    data = bytearray()
    while len(data) < size:
        chunk = stream.read(size - len(data))
        if not chunk:
            raise Truncated(f"stream ended after {len(data)} of {size} {what} bytes")
        data.extend(chunk)
    return bytes(data)


def _decode_after_first(stream: BinaryIO, first: bytes) -> Frame:
    magic = first + _read_exact(stream, len(MAGIC) - len(first), "magic")
    if magic != MAGIC:
        raise BadMagic(f"expected magic {MAGIC!r}, got {magic!r}")
    version = _read_exact(stream, 1, "version")[0]
    if version != VERSION:
        raise UnsupportedVersion(f"unsupported protocol version {version}")
    raw_type = _read_exact(stream, 1, "type")[0]
    try:
        msg_type = MsgType(raw_type)
    except ValueError:
        raise UnknownType(f"unknown message type {raw_type}") from None
    (length,) = struct.unpack(">I", _read_exact(stream, 4, "length"))
    if length > MAX_PAYLOAD:
        raise Oversize(f"declared payload of {length} bytes exceeds {MAX_PAYLOAD}")
    _check_payload(msg_type, length)
    return Frame(msg_type, _read_exact(stream, length, "payload"))


def decode_frame(stream: Union[bytes, bytearray, BinaryIO]) -> Frame:
    """
    Read exactly one frame (10 + length bytes) from a stream or byte string.

    Raises:
        BadMagic, UnsupportedVersion, UnknownType, Oversize, BadPayload, Truncated
    """
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    return _decode_after_first(stream, b"")


def read_frame(stream: BinaryIO) -> Optional[Frame]:
    """Like ``decode_frame`` but returns None when the stream is already at EOF."""
    first = stream.read(1)
    if not first:
        return None
    return _decode_after_first(stream, first)


def encode_command(cmd: MotionCommand) -> bytes:
    return COMMAND.pack(cmd.v_left, cmd.v_right)


def decode_command(payload: bytes) -> MotionCommand:
    if len(payload) != COMMAND.size:
        raise BadPayload(f"CMD payload must be {COMMAND.size} bytes, got {len(payload)}")
    return MotionCommand(*COMMAND.unpack(payload))


def command_for(report: QualityReport, settings: PilotSettings) -> MotionCommand:
    """Steering command for a report; standing still when nothing was detected."""
    if not report.detected:
        return MotionCommand(0.0, 0.0)
    cam = CameraModel(report.source_width, report.source_height, settings.fov, settings.mount_height)
    return steer(bearing_from_centroid(report.blob.centroid[0], cam), report.area_fraction, settings)


def parse_endpoint(text: str, default_host: str = DEFAULT_HOST) -> Endpoint:
    """Parse ``host:port`` or a bare port number."""
    host, sep, port = text.strip().rpartition(":")
    if not sep:
        host = default_host
    try:
        number = int(port)
    except ValueError:
        raise ConfigError(f"invalid endpoint {text!r}, expected host:port") from None
    if not 0 <= number <= 65535:
        raise ConfigError(f"port out of range in {text!r}")
    return host or default_host, number


# ==================== SERVER ====================

class InspectionHandler(socketserver.StreamRequestHandler):
    """One connection: HELLO handshake, then REPORT + CMD for every IMAGE."""

    def _send(self, msg_type: MsgType, payload: bytes = b"") -> None:
        self.wfile.write(encode_frame(Frame(msg_type, payload)))
        self.wfile.flush()

    def _fail(self, message: str) -> None:
        logger.warning("closing %s: %s", self.client_address, message)
        self._send(MsgType.ERROR, message.encode("utf-8"))

    def handle(self):
        settings: Settings = self.server.settings
        try:
            hello = read_frame(self.rfile)
            if hello is None:
                return
            if hello.msg_type is not MsgType.HELLO:
                self._fail(f"expected HELLO, got {hello.msg_type.name}")
                return
            self._send(MsgType.HELLO)

            while True:
                frame = read_frame(self.rfile)
                if frame is None:
                    return
                if frame.msg_type is not MsgType.IMAGE:
                    self._fail(f"expected IMAGE, got {frame.msg_type.name}")
                    return
                try:
                    img = decode_image(frame.payload)
                except ImageError as exc:
                    self._fail(f"bad image: {exc}")
                    return
                report = inspect(img, settings.pipeline)
                self._send(MsgType.REPORT, report_to_json(report))
                self._send(MsgType.CMD, encode_command(command_for(report, settings.pilot)))
        except FrameError as exc:
            try:
                self._fail(f"malformed frame: {exc}")
            except OSError:
                pass
        except OSError as exc:
            logger.info("connection %s dropped: %s", self.client_address, exc)


class InspectionServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, endpoint: Endpoint, settings: Optional[Settings] = None):
        self.settings = settings or Settings()
        super().__init__(endpoint, InspectionHandler)

    @property
    def endpoint(self) -> Endpoint:
        host, port = self.server_address[:2]
        return host, port


def _as_settings(cfg: Union[PipelineConfig, Settings, None]) -> Settings:
    if isinstance(cfg, PipelineConfig):
        return Settings(pipeline=cfg)
    return cfg or Settings()


def start_server(endpoint: Endpoint, cfg: Union[PipelineConfig, Settings, None] = None) -> InspectionServer:
    """
    Bind and serve on a background thread; port 0 picks a free port.
    Call ``shutdown()`` and ``server_close()`` when done.
    """
    server = InspectionServer(endpoint, _as_settings(cfg))
    threading.Thread(target=server.serve_forever, name="flowerbot-server", daemon=True).start()
    logger.info("serving inspections on %s:%d", *server.endpoint)
    return server


def serve(endpoint: Endpoint, cfg: Union[PipelineConfig, Settings, None] = None) -> None:
    """Serve in the foreground until interrupted."""
    with InspectionServer(endpoint, _as_settings(cfg)) as server:
        logger.info("serving inspections on %s:%d", *server.endpoint)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            logger.info("shutting down")


# ==================== CLIENT ====================

def _expect(stream: BinaryIO, wanted: MsgType) -> Frame:
    try:
        frame = read_frame(stream)
    except FrameError as exc:
        raise ProtocolError(f"malformed reply: {exc}") from exc
    if frame is None:
        raise ProtocolError(f"connection closed while waiting for {wanted.name}")
    if frame.msg_type is MsgType.ERROR:
        raise ServerError(frame.payload.decode("utf-8", errors="replace"))
    if frame.msg_type is not wanted:
        raise ProtocolError(f"expected {wanted.name}, got {frame.msg_type.name}")
    return frame


def send_image(endpoint: Endpoint, img: RasterImage, timeout: float = 30.0) -> Tuple[QualityReport, MotionCommand]:
    """
    Handshake, send one image, and return the server's report and command.

    Raises:
        ConnectionFailed: server unreachable or link dropped
        ProtocolError: unexpected or malformed reply
        ServerError: server answered with an ERROR frame
    """
    try:
        sock = socket.create_connection(endpoint, timeout=timeout)
    except OSError as exc:
        raise ConnectionFailed(f"cannot reach {endpoint[0]}:{endpoint[1]}: {exc}") from exc

    with sock, sock.makefile("rb") as stream:
        try:
            sock.sendall(encode_frame(Frame(MsgType.HELLO)))
            _expect(stream, MsgType.HELLO)
            sock.sendall(encode_frame(Frame(MsgType.IMAGE, encode_image(img, ImageFormat.PNG))))
            report_frame = _expect(stream, MsgType.REPORT)
            cmd_frame = _expect(stream, MsgType.CMD)
        except OSError as exc:
            raise ConnectionFailed(f"link to {endpoint[0]}:{endpoint[1]} failed: {exc}") from exc

    try:
        report = report_from_json(report_frame.payload)
    except MalformedReport as exc:
        raise ProtocolError(str(exc)) from exc
    return report, decode_command(cmd_frame.payload)
