"""
Binary wire format shared by every socket-based channel.

Frame::

    u32  length        bytes that follow this field
    u8   msg_type      MessageType
    u64  request_id    correlation id, echoed by the responder
    ...  payload       one canonically encoded value

All integers are big-endian. Values are encoded as tag-length-value so that
equal values always produce byte-identical encodings (dict keys are sorted,
-0.0 is normalized). See docs/WIRE-FORMAT.md.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import IntEnum

from app.errors import MalformedFrame, TransportFailure

HEADER = struct.Struct(">IBQ")
LENGTH = struct.Struct(">I")
MAX_FRAME = 64 * 1024 * 1024

_U32 = struct.Struct(">I")
_I64 = struct.Struct(">q")
_U64 = struct.Struct(">Q")
_F64 = struct.Struct(">d")
_TYPE_ID = struct.Struct(">BQ")

T_NONE = 0x00
T_FALSE = 0x01
T_TRUE = 0x02
T_INT = 0x03
T_UINT = 0x04
T_FLOAT = 0x05
T_STR = 0x06
T_BYTES = 0x07
T_LIST = 0x08
T_DICT = 0x09


class MessageType(IntEnum):
    REQUEST = 1
    DECISION = 2
    ADMIN = 3
    INVALIDATION = 4
    CONTEXT_PUSH = 5
    EVENT = 6
    CALL = 7
    RESULT = 8
    ERROR = 9
    ACK = 10
    SUBSCRIBE = 11
    HELLO = 12
    BASELINE = 13
    STATS = 14
    ECHO = 15
    QUEUE_ATTACH = 16


@dataclass(frozen=True)
class WireMessage:
    msg_type: MessageType
    request_id: int
    payload: object = None


def _encode(value, out: bytearray):
    if value is None:
        out.append(T_NONE)
    elif value is True:
        out.append(T_TRUE)
    elif value is False:
        out.append(T_FALSE)
    elif isinstance(value, int):
        if -(1 << 63) <= value < (1 << 63):
            out.append(T_INT)
            out += _I64.pack(value)
        elif 0 <= value < (1 << 64):
            out.append(T_UINT)
            out += _U64.pack(value)
        else:
            raise MalformedFrame(f"Integer out of 64-bit range: {value}")
    elif isinstance(value, float):
        out.append(T_FLOAT)
        out += _F64.pack(0.0 if value == 0.0 else (math.nan if math.isnan(value) else value))
    elif isinstance(value, str):
        raw = value.encode("utf-8")
        out.append(T_STR)
        out += _U32.pack(len(raw))
        out += raw
    elif isinstance(value, (bytes, bytearray, memoryview)):
        raw = bytes(value)
        out.append(T_BYTES)
        out += _U32.pack(len(raw))
        out += raw
    elif isinstance(value, (list, tuple)):
        out.append(T_LIST)
        out += _U32.pack(len(value))
        for item in value:
            _encode(item, out)
    elif isinstance(value, dict):
        out.append(T_DICT)
        out += _U32.pack(len(value))
        for key in sorted(value):
            if not isinstance(key, str):
                raise MalformedFrame(f"Dict keys must be strings, got {type(key).__name__}")
            _encode(key, out)
            _encode(value[key], out)
    else:
        raise MalformedFrame(f"Cannot encode {type(value).__name__}")


def encode_value(value) -> bytes:
    out = bytearray()
    _encode(value, out)
    return bytes(out)


def _need(data, offset, size):
    if offset + size > len(data):
        raise MalformedFrame("Truncated value")


def _decode(data, offset):
    _need(data, offset, 1)
    tag = data[offset]
    offset += 1
    if tag == T_NONE:
        return None, offset
    if tag == T_FALSE:
        return False, offset
    if tag == T_TRUE:
        return True, offset
    if tag == T_INT:
        _need(data, offset, 8)
        return _I64.unpack_from(data, offset)[0], offset + 8
    if tag == T_UINT:
        _need(data, offset, 8)
        return _U64.unpack_from(data, offset)[0], offset + 8
    if tag == T_FLOAT:
        _need(data, offset, 8)
        return _F64.unpack_from(data, offset)[0], offset + 8
    if tag in (T_STR, T_BYTES):
        _need(data, offset, 4)
        size = _U32.unpack_from(data, offset)[0]
        offset += 4
        _need(data, offset, size)
        raw = bytes(data[offset:offset + size])
        if tag == T_BYTES:
            return raw, offset + size
        try:
            return raw.decode("utf-8"), offset + size
        except UnicodeDecodeError as e:
            raise MalformedFrame(f"Invalid UTF-8 string: {e}") from e
    if tag == T_LIST:
        _need(data, offset, 4)
        count = _U32.unpack_from(data, offset)[0]
        offset += 4
        items = []
        for _ in range(count):
            item, offset = _decode(data, offset)
            items.append(item)
        return items, offset
    if tag == T_DICT:
        _need(data, offset, 4)
        count = _U32.unpack_from(data, offset)[0]
        offset += 4
        result = {}
        for _ in range(count):
            key, offset = _decode(data, offset)
            if not isinstance(key, str):
                raise MalformedFrame("Dict key is not a string")
            result[key], offset = _decode(data, offset)
        return result, offset
    raise MalformedFrame(f"Unknown value tag {tag:#x}")


def decode_value(data) -> object:
    value, offset = _decode(data, 0)
    if offset != len(data):
        raise MalformedFrame(f"{len(data) - offset} trailing bytes after value")
    return value


def encode_body(msg: WireMessage) -> bytes:
    """Encode a frame without its length prefix."""
    return _TYPE_ID.pack(int(msg.msg_type), msg.request_id) + encode_value(msg.payload)


def encode_frame(msg: WireMessage) -> bytes:
    body = encode_body(msg)
    return LENGTH.pack(len(body)) + body


def decode_body(body) -> WireMessage:
    """Decode a frame without its length prefix."""
    fixed = HEADER.size - LENGTH.size
    if len(body) < fixed:
        raise MalformedFrame("Frame shorter than its header")
    msg_type, request_id = _TYPE_ID.unpack_from(body, 0)
    try:
        msg_type = MessageType(msg_type)
    except ValueError:
        raise MalformedFrame(f"Unknown message type {msg_type}") from None
    return WireMessage(msg_type, request_id, decode_value(memoryview(body)[fixed:]))


def decode_frame(data) -> WireMessage:
    if len(data) < LENGTH.size:
        raise MalformedFrame("Frame shorter than its length prefix")
    (length,) = LENGTH.unpack_from(data, 0)
    if length != len(data) - LENGTH.size:
        raise MalformedFrame(f"Length prefix {length} does not match {len(data) - LENGTH.size} bytes")
    return decode_body(memoryview(data)[LENGTH.size:])


def recv_exact(sock, size: int) -> bytearray:
    buf = bytearray(size)
    view = memoryview(buf)
    got = 0
    while got < size:
        n = sock.recv_into(view[got:], size - got)
        if n == 0:
            raise TransportFailure("Peer closed the connection")
        got += n
    return buf


def read_packet(sock) -> bytearray:
    """Read one length-prefixed packet and return the bytes after the prefix."""
    (length,) = LENGTH.unpack(recv_exact(sock, LENGTH.size))
    if length > MAX_FRAME:
        raise MalformedFrame(f"Frame of {length} bytes exceeds the limit")
    return recv_exact(sock, length)

