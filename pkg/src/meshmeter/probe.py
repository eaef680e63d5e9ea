"""Datagram probe wire format, RTT sampling, and jitter estimation.

Every agent measures round-trip time with an explicit request/response
echo over plain datagrams. Messages are big-endian at fixed offsets and
padded with zeros to a configured payload size (default 100 octets).

Request layout (21-octet header)::

    offset  size  field
    0       4     magic "PMM1"
    4       1     version (1)
    5       1     kind (1 = request)
    6       4     seq, uint32
    10      8     send_ts_us, uint64, sender monotonic clock
    18      3     reserved (zero)
    21      -     zero padding up to payload_size

Response layout (37-octet header)::

    offset  size  field
    0       4     magic "PMM1"
    4       1     version (1)
    5       1     kind (2 = response)
    6       4     seq (echoed)
    10      8     echo_send_ts_us (echoed request timestamp)
    18      8     resp_recv_ts_us, responder monotonic clock
    26      8     resp_send_ts_us, responder monotonic clock
    34      3     reserved (zero)
    37      -     zero padding up to payload_size

RTT arithmetic uses the sender's monotonic clock only; wall clock is
used solely to stamp when a sample was taken.
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass, replace
from typing import Optional, Union

MAGIC = b"PMM1"
VERSION = 1
KIND_REQUEST = 1
KIND_RESPONSE = 2

REQUEST_FMT = ">4sBBIQ3x"
RESPONSE_FMT = ">4sBBIQQQ3x"
REQUEST_HEADER_LEN = struct.calcsize(REQUEST_FMT)    # 21
RESPONSE_HEADER_LEN = struct.calcsize(RESPONSE_FMT)  # 37

DEFAULT_PAYLOAD_SIZE = 100

JITTER_GAIN = 1.0 / 16.0


class ProbeError(Exception):
    """Base class for probe codec and sampling failures."""


class PayloadTooSmall(ProbeError):
    """Requested payload size cannot hold the message header."""


class DecodeError(ProbeError):
    """Base class for message decode failures."""


class BadMagic(DecodeError):
    pass


class UnsupportedVersion(DecodeError):
    pass


class Truncated(DecodeError):
    pass


class BadKind(DecodeError):
    pass


class ClockViolation(ProbeError):
    """Receive timestamp precedes the echoed send timestamp (mixed clocks)."""


def monotonic_us() -> int:
    """Monotonic clock in microseconds; the basis for all RTT math."""
    return time.monotonic_ns() // 1000


def unix_ms() -> int:
    """Wall clock in Unix milliseconds; used only for record timestamps."""
    return time.time_ns() // 1_000_000


@dataclass(frozen=True)
class ProbeRequest:
    seq: int
    send_ts_us: int


@dataclass(frozen=True)
class ProbeResponse:
    seq: int
    echo_send_ts_us: int
    resp_recv_ts_us: int
    resp_send_ts_us: int

    def __post_init__(self) -> None:
        if self.resp_send_ts_us < self.resp_recv_ts_us:
            raise ValueError("resp_send_ts_us must be >= resp_recv_ts_us")


@dataclass(frozen=True)
class RttSample:
    peer_id: str
    rtt_ms: float
    seq: int
    sampled_at_ms: int

    def __post_init__(self) -> None:
        if self.rtt_ms < 0:
            raise ValueError("rtt_ms must be non-negative")


@dataclass(frozen=True)
class JitterState:
    """Running interarrival-jitter estimate for one peer.

    Updated as J <- J + (|D| - J)/16 where D is half the RTT delta
    between consecutive samples (transit-time difference).
    """

    j_ms: float = 0.0
    last_transit_ms: Optional[float] = None


class SequenceCounter:
    """Per-pair probe sequence generator; strictly increasing from 1."""

    def __init__(self) -> None:
        self._next = 1

    def next(self) -> int:
        seq = self._next
        self._next += 1
        return seq

    @property
    def last(self) -> int:
        return self._next - 1


def encode_request(req: ProbeRequest, payload_size: int = DEFAULT_PAYLOAD_SIZE) -> bytes:
    """Encode a probe request, zero-padded to exactly payload_size octets."""
    if payload_size < REQUEST_HEADER_LEN:
        raise PayloadTooSmall(
            f"payload_size {payload_size} below request header length {REQUEST_HEADER_LEN}"
        )
    header = struct.pack(REQUEST_FMT, MAGIC, VERSION, KIND_REQUEST, req.seq, req.send_ts_us)
    return header + b"\x00" * (payload_size - REQUEST_HEADER_LEN)


def encode_response(resp: ProbeResponse, payload_size: int = 0) -> bytes:
    """Encode a probe response, padded to max(header length, payload_size)."""
    header = struct.pack(
        RESPONSE_FMT,
        MAGIC,
        VERSION,
        KIND_RESPONSE,
        resp.seq,
        resp.echo_send_ts_us,
        resp.resp_recv_ts_us,
        resp.resp_send_ts_us,
    )
    if payload_size > RESPONSE_HEADER_LEN:
        return header + b"\x00" * (payload_size - RESPONSE_HEADER_LEN)
    return header


def decode(message: bytes) -> Union[ProbeRequest, ProbeResponse]:
    """Decode a datagram into a typed probe message.

    Raises Truncated / BadMagic / UnsupportedVersion / BadKind, each
    naming the failing check.
    """
    if len(message) < REQUEST_HEADER_LEN:
        raise Truncated(f"message length {len(message)} below header length {REQUEST_HEADER_LEN}")
    magic = message[:4]
    if magic != MAGIC:
        raise BadMagic(f"expected magic {MAGIC!r}, got {magic!r}")
    version = message[4]
    if version != VERSION:
        raise UnsupportedVersion(f"version {version} not supported (expected {VERSION})")
    kind = message[5]
    if kind == KIND_REQUEST:
        _, _, _, seq, send_ts_us = struct.unpack_from(REQUEST_FMT, message)
        return ProbeRequest(seq=seq, send_ts_us=send_ts_us)
    if kind == KIND_RESPONSE:
        if len(message) < RESPONSE_HEADER_LEN:
            raise Truncated(
                f"response length {len(message)} below header length {RESPONSE_HEADER_LEN}"
            )
        _, _, _, seq, echo, recv, send = struct.unpack_from(RESPONSE_FMT, message)
        return ProbeResponse(
            seq=seq, echo_send_ts_us=echo, resp_recv_ts_us=recv, resp_send_ts_us=send
        )
    raise BadKind(f"unknown message kind {kind}")


def respond_to(req: ProbeRequest, recv_ts_us: int, send_ts_us: Optional[int] = None) -> ProbeResponse:
    """Build the echo response for a received request."""
    if send_ts_us is None:
        send_ts_us = recv_ts_us
    return ProbeResponse(
        seq=req.seq,
        echo_send_ts_us=req.send_ts_us,
        resp_recv_ts_us=recv_ts_us,
        resp_send_ts_us=send_ts_us,
    )


def rtt_from_response(
    resp: ProbeResponse,
    recv_ts_us: int,
    peer_id: str = "",
    sampled_at_ms: Optional[int] = None,
) -> RttSample:
    """Turn a received response into an RTT sample.

    recv_ts_us must come from the same monotonic clock that stamped the
    original request; a violation signals mixed clocks.
    """
    if recv_ts_us < resp.echo_send_ts_us:
        raise ClockViolation(
            f"recv_ts_us {recv_ts_us} precedes echoed send_ts_us {resp.echo_send_ts_us}"
        )
    if sampled_at_ms is None:
        sampled_at_ms = unix_ms()
    return RttSample(
        peer_id=peer_id,
        rtt_ms=(recv_ts_us - resp.echo_send_ts_us) / 1000.0,
        seq=resp.seq,
        sampled_at_ms=sampled_at_ms,
    )


def update_jitter(
    state: JitterState,
    sample: RttSample,
    prev_sample: Optional[RttSample] = None,
) -> JitterState:
    """Advance the interarrival-jitter estimate with one sample.

    The first sample (absent prev) records the transit baseline and
    leaves j_ms unchanged.
    """
    transit_ms = sample.rtt_ms / 2.0
    if prev_sample is None:
        return replace(state, last_transit_ms=transit_ms)
    d = (sample.rtt_ms - prev_sample.rtt_ms) / 2.0
    j = state.j_ms + (abs(d) - state.j_ms) * JITTER_GAIN
    return JitterState(j_ms=j, last_transit_ms=transit_ms)
