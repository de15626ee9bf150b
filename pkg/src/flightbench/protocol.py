"""Framed binary serial protocol.

Frame layout (all multi-byte fields little-endian)::

    0xFE | msg_id | payload_len | seq | payload ... | crc16

The CRC is CRC-16/CCITT-FALSE over ``msg_id .. payload``. Overhead is 6 bytes,
so an offboard command (six float32, 24 bytes) travels as a 30-byte frame.
"""

from __future__ import annotations

import binascii
import math
import struct
from dataclasses import dataclass, field
from typing import ClassVar, Union

MAGIC = 0xFE
HEADER_LEN = 4
CRC_LEN = 2
OVERHEAD = HEADER_LEN + CRC_LEN
MAX_PAYLOAD = 255
PARAM_NAME_LEN = 24

_F6 = struct.Struct("<6f")
_IMU = struct.Struct("<d3f3f")
_NUM = struct.Struct("<d")


class ProtocolError(ValueError):
    pass


def crc16(data: bytes) -> int:
    """CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF)."""
    return binascii.crc_hqx(data, 0xFFFF)


def _f32(values) -> tuple[float, ...]:
    # canonicalise through float32 so decode(encode(m)) == m
    return _F6.unpack(_F6.pack(*values))


@dataclass(frozen=True)
class OffboardCommand:
    u: tuple[float, ...]
    mode: str = "passthrough"  # or "setpoint"

    MSG_IDS: ClassVar[dict[str, int]] = {"passthrough": 0x10, "setpoint": 0x11}

    def __post_init__(self):
        if len(self.u) != 6:
            raise ProtocolError("offboard command carries exactly 6 values")
        if self.mode not in self.MSG_IDS:
            raise ProtocolError(f"unknown offboard mode {self.mode!r}")
        object.__setattr__(self, "u", _f32(self.u))

    @property
    def msg_id(self) -> int:
        return self.MSG_IDS[self.mode]

    def payload(self) -> bytes:
        return _F6.pack(*self.u)


@dataclass(frozen=True)
class Heartbeat:
    msg_id: ClassVar[int] = 0x01

    def payload(self) -> bytes:
        return b""


@dataclass(frozen=True)
class ParamRequest:
    name: str
    msg_id: ClassVar[int] = 0x20

    def payload(self) -> bytes:
        return _pack_name(self.name)


@dataclass(frozen=True)
class ParamValue:
    """Parameter value; sent by the firmware as a reply, by the companion as a write."""

    name: str
    value: Union[int, float, str]
    msg_id: ClassVar[int] = 0x21

    def payload(self) -> bytes:
        head = _pack_name(self.name)
        v = self.value
        if isinstance(v, bool) or isinstance(v, int):
            return head + b"\x00" + struct.pack("<q", int(v))
        if isinstance(v, float):
            return head + b"\x01" + _NUM.pack(v)
        if isinstance(v, str):
            raw = v.encode("ascii")
            if len(raw) > MAX_PAYLOAD - PARAM_NAME_LEN - 1:
                raise ProtocolError("string parameter value too long")
            return head + b"\x02" + raw
        raise ProtocolError(f"unsupported parameter value type {type(v).__name__}")


@dataclass(frozen=True)
class ImuData:
    t: float
    accel: tuple[float, float, float]
    gyro: tuple[float, float, float]
    msg_id: ClassVar[int] = 0x30

    def __post_init__(self):
        _, *rest = _IMU.unpack(_IMU.pack(self.t, *self.accel, *self.gyro))
        object.__setattr__(self, "accel", tuple(rest[:3]))
        object.__setattr__(self, "gyro", tuple(rest[3:]))

    def payload(self) -> bytes:
        return _IMU.pack(self.t, *self.accel, *self.gyro)


@dataclass(frozen=True)
class EchoRequest:
    data: bytes = b""
    msg_id: ClassVar[int] = 0x40

    def payload(self) -> bytes:
        return bytes(self.data)


@dataclass(frozen=True)
class EchoReply:
    data: bytes = b""
    msg_id: ClassVar[int] = 0x41

    def payload(self) -> bytes:
        return bytes(self.data)


@dataclass(frozen=True)
class Ack:
    acked_id: int
    status: int = 0  # 0 ok, nonzero error code
    msg_id: ClassVar[int] = 0x7F

    def payload(self) -> bytes:
        return bytes([self.acked_id & 0xFF, self.status & 0xFF])


Message = Union[OffboardCommand, Heartbeat, ParamRequest, ParamValue, ImuData, EchoRequest, EchoReply, Ack]

ACK_OK = 0
ACK_UNKNOWN_PARAM = 1
ACK_BAD_VALUE = 2


def _pack_name(name: str) -> bytes:
    raw = name.encode("ascii")
    if len(raw) > PARAM_NAME_LEN:
        raise ProtocolError(f"parameter name longer than {PARAM_NAME_LEN} bytes: {name}")
    return raw.ljust(PARAM_NAME_LEN, b"\x00")


def _unpack_name(raw: bytes) -> str:
    return raw.rstrip(b"\x00").decode("ascii")


def _parse_payload(msg_id: int, p: bytes) -> Message:
    """Payload bytes -> message; raises ProtocolError on a layout mismatch."""
    try:
        if msg_id in (0x10, 0x11):
            if len(p) != _F6.size:
                raise ProtocolError("bad offboard payload length")
            return OffboardCommand(_F6.unpack(p), "passthrough" if msg_id == 0x10 else "setpoint")
        if msg_id == Heartbeat.msg_id:
            if p:
                raise ProtocolError("heartbeat has no payload")
            return Heartbeat()
        if msg_id == ParamRequest.msg_id:
            if len(p) != PARAM_NAME_LEN:
                raise ProtocolError("bad param request length")
            return ParamRequest(_unpack_name(p))
        if msg_id == ParamValue.msg_id:
            if len(p) < PARAM_NAME_LEN + 1:
                raise ProtocolError("short param value")
            name, kind, rest = _unpack_name(p[:PARAM_NAME_LEN]), p[PARAM_NAME_LEN], p[PARAM_NAME_LEN + 1:]
            if kind == 0 and len(rest) == 8:
                return ParamValue(name, struct.unpack("<q", rest)[0])
            if kind == 1 and len(rest) == 8:
                return ParamValue(name, _NUM.unpack(rest)[0])
            if kind == 2:
                return ParamValue(name, rest.decode("ascii"))
            raise ProtocolError("bad param value encoding")
        if msg_id == ImuData.msg_id:
            if len(p) != _IMU.size:
                raise ProtocolError("bad imu payload length")
            t, *rest = _IMU.unpack(p)
            return ImuData(t, tuple(rest[:3]), tuple(rest[3:]))
        if msg_id == EchoRequest.msg_id:
            return EchoRequest(bytes(p))
        if msg_id == EchoReply.msg_id:
            return EchoReply(bytes(p))
        if msg_id == Ack.msg_id:
            if len(p) != 2:
                raise ProtocolError("bad ack length")
            return Ack(p[0], p[1])
    except (UnicodeDecodeError, struct.error) as exc:
        raise ProtocolError(str(exc)) from exc
    raise ProtocolError(f"unknown msg_id 0x{msg_id:02x}")


def encode(msg: Message, seq: int = 0) -> bytes:
    payload = msg.payload()
    if len(payload) > MAX_PAYLOAD:
        raise ProtocolError(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    body = bytes([msg.msg_id, len(payload), seq & 0xFF]) + payload
    return bytes([MAGIC]) + body + crc16(body).to_bytes(2, "little")


@dataclass
class StreamDecoder:
    """Resynchronising frame parser.

    Feed arbitrary chunks; complete valid frames come out as messages. Bytes
    skipped while hunting for a magic byte are counted in ``garbage``; frames
    whose CRC fails are counted in ``crc_fail`` and parsing resumes one byte
    after the rejected magic byte. Never raises on input data.
    """

    buffer: bytearray = field(default_factory=bytearray)
    garbage: int = 0
    crc_fail: int = 0
    malformed: int = 0
    frames: int = 0
    last_seq: int | None = None

    def feed(self, data: bytes) -> list[Message]:
        self.buffer += data
        out: list[Message] = []
        buf = self.buffer
        pos = 0
        n = len(buf)
        while pos < n:
            if buf[pos] != MAGIC:
                nxt = buf.find(MAGIC, pos)
                stop = n if nxt < 0 else nxt
                self.garbage += stop - pos
                pos = stop
                continue
            if n - pos < HEADER_LEN:
                break
            plen = buf[pos + 2]
            end = pos + HEADER_LEN + plen + CRC_LEN
            if end > n:
                break
            body = bytes(buf[pos + 1: end - CRC_LEN])
            if crc16(body) != int.from_bytes(buf[end - CRC_LEN: end], "little"):
                self.crc_fail += 1
                self.garbage += 1
                pos += 1
                continue
            try:
                msg = _parse_payload(body[0], body[3:])
            except ProtocolError:
                self.malformed += 1
                pos = end
                continue
            self.frames += 1
            self.last_seq = body[2]
            out.append(msg)
            pos = end
        del buf[:pos]
        return out


def decode_stream(data: bytes, residual: bytes = b""):
    """One-shot decode: returns ``(messages, residual_bytes, decoder)``."""
    dec = StreamDecoder(bytearray(residual))
    msgs = dec.feed(data)
    return msgs, bytes(dec.buffer), dec


def is_finite_command(cmd: OffboardCommand) -> bool:
    return all(math.isfinite(x) for x in cmd.u)
