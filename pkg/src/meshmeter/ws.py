"""Minimal RFC 6455 WebSocket framing for the signaling server.

Supports the subset browsers need for envelope exchange: the opening
handshake, text frames with 7/16/64-bit lengths, client masking,
fragmentation reassembly, ping/pong, and close. No extensions, no
subprotocols.
"""

from __future__ import annotations

import base64
import hashlib
import os
import struct
from typing import BinaryIO, Optional

ACCEPT_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_CONT = 0x0
OP_TEXT = 0x1
OP_BINARY = 0x2
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


class WsError(Exception):
    pass


class WsClosed(WsError):
    """Peer sent a close frame or the stream ended."""


def accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + ACCEPT_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def handshake_response(client_key: str) -> bytes:
    return (
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Accept: {accept_key(client_key)}\r\n"
        "\r\n"
    ).encode("ascii")


def encode_frame(opcode: int, payload: bytes, mask: bool = False) -> bytes:
    """Encode one final frame; mask=True for the client-to-server direction."""
    head = bytes([0x80 | opcode])
    length = len(payload)
    mask_bit = 0x80 if mask else 0
    if length < 126:
        head += bytes([mask_bit | length])
    elif length < 1 << 16:
        head += bytes([mask_bit | 126]) + struct.pack(">H", length)
    else:
        head += bytes([mask_bit | 127]) + struct.pack(">Q", length)
    if mask:
        key = os.urandom(4)
        masked = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
        return head + key + masked
    return head + payload


def _read_exact(stream: BinaryIO, n: int) -> bytes:
    data = b""
    while len(data) < n:
        chunk = stream.read(n - len(data))
        if not chunk:
            raise WsClosed("stream ended mid-frame")
        data += chunk
    return data


def read_frame(stream: BinaryIO) -> tuple[int, bytes, bool]:
    """Read one frame; returns (opcode, payload, fin)."""
    header = _read_exact(stream, 2)
    fin = bool(header[0] & 0x80)
    opcode = header[0] & 0x0F
    masked = bool(header[1] & 0x80)
    length = header[1] & 0x7F
    if length == 126:
        (length,) = struct.unpack(">H", _read_exact(stream, 2))
    elif length == 127:
        (length,) = struct.unpack(">Q", _read_exact(stream, 8))
    key = _read_exact(stream, 4) if masked else None
    payload = _read_exact(stream, length) if length else b""
    if key:
        payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
    return opcode, payload, fin


def read_message(stream: BinaryIO) -> tuple[int, bytes]:
    """Read one complete message, reassembling fragments.

    Control frames interleaved inside a fragmented message are returned
    to the caller as-is before the message completes, so callers must
    handle OP_PING/OP_CLOSE whenever they appear.
    """
    opcode, payload, fin = read_frame(stream)
    if opcode in (OP_CLOSE, OP_PING, OP_PONG):
        return opcode, payload
    buffer = bytearray(payload)
    first_opcode = opcode
    while not fin:
        opcode, payload, fin = read_frame(stream)
        if opcode in (OP_CLOSE, OP_PING, OP_PONG):
            return opcode, payload
        if opcode != OP_CONT:
            raise WsError(f"expected continuation frame, got opcode {opcode}")
        buffer.extend(payload)
    return first_opcode, bytes(buffer)


def parse_upgrade_headers(stream: BinaryIO) -> dict[str, str]:
    """Read HTTP headers (after the request line) up to the blank line."""
    headers: dict[str, str] = {}
    while True:
        line = stream.readline()
        if not line or line in (b"\r\n", b"\n"):
            break
        name, _, value = line.decode("latin-1").partition(":")
        headers[name.strip().lower()] = value.strip()
    return headers


def websocket_key(headers: dict[str, str]) -> Optional[str]:
    if headers.get("upgrade", "").lower() != "websocket":
        return None
    return headers.get("sec-websocket-key")
