"""Length-prefixed binary wire format for protocol messages.

Every message is one frame::

    length   4 octets, little-endian, length of the rest of the frame
    round    4 octets, big-endian round counter
    tag      1 octet
    count    2 octets, big-endian number of payload elements
    payload  count fixed-width elements, each big-endian

The element width is fixed per message by the session modulus and the
tag's domain (Boolean openings carry 1-octet Z_2 elements); both sides
run the same deterministic protocol, so the expected width is always
known to the receiver.
"""

from __future__ import annotations

import struct

from .errors import ProtocolError

OBS_SHARE = 1
MASKED_OPEN = 2
FLAG_SHARE = 3
SYNC = 4
ABORT = 5

TAG_NAMES = {OBS_SHARE: "OBS_SHARE", MASKED_OPEN: "MASKED_OPEN",
             FLAG_SHARE: "FLAG_SHARE", SYNC: "SYNC", ABORT: "ABORT"}

_HEADER = struct.Struct(">IBH")  # round, tag, count
HEADER_BYTES = 4 + _HEADER.size  # incl. length prefix


def message_size(count: int, octets: int) -> int:
    return HEADER_BYTES + count * octets


def encode_message(round_: int, tag: int, values, octets: int) -> bytes:
    if len(values) > 0xFFFF:
        raise ProtocolError(f"payload of {len(values)} elements exceeds the 16-bit count")
    body = _HEADER.pack(round_, tag, len(values))
    payload = b"".join(v.to_bytes(octets, "big") for v in values)
    frame = body + payload
    return struct.pack("<I", len(frame)) + frame


def decode_message(frame: bytes, octets: int):
    """Decode one frame body (without the length prefix) into
    (round, tag, values)."""
    if len(frame) < _HEADER.size:
        raise ProtocolError("truncated message header")
    round_, tag, count = _HEADER.unpack_from(frame)
    payload = frame[_HEADER.size:]
    if tag in (SYNC, ABORT):
        octets = octets or 1
    if len(payload) != count * octets:
        raise ProtocolError(
            f"payload length {len(payload)} != count {count} x width {octets}")
    values = [int.from_bytes(payload[i * octets:(i + 1) * octets], "big")
              for i in range(count)]
    return round_, tag, values


def read_frame(sock) -> bytes:
    """Read one length-prefixed frame from a blocking socket."""
    head = _read_exact(sock, 4)
    (length,) = struct.unpack("<I", head)
    return _read_exact(sock, length)


def _read_exact(sock, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ProtocolError("peer closed the connection")
        buf += chunk
    return buf
