"""Measurement record schema: validation shared by agents and the collector.

A record is a flat JSON object with the fields below; unknown extra keys
are allowed and preserved end to end.

    Date               Unix milliseconds, client wall clock
    yourIsp            reporter ISP name (may be empty)
    yourIp             reporter global IP (may be empty)
    candidatePair_RTT  measured RTT of the peer connection, milliseconds
    yourID             reporter client id
    peerID             measured peer's client id
"""

from __future__ import annotations

from typing import Any, Mapping

REQUIRED_FIELDS = ("Date", "yourIsp", "yourIp", "candidatePair_RTT", "yourID", "peerID")


class RecordError(Exception):
    """Base class for record ingestion failures."""


class Malformed(RecordError):
    """Body is not a JSON object."""


class SchemaViolation(RecordError):
    """A required field is missing or mistyped; `field` names it."""

    def __init__(self, field: str, reason: str) -> None:
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


def make_record(
    your_id: str,
    peer_id: str,
    rtt_ms: float,
    date_ms: int,
    your_isp: str = "",
    your_ip: str = "",
    **extra: Any,
) -> dict:
    """Assemble a schema-valid record dict; extra keys pass through."""
    record = {
        "Date": date_ms,
        "yourIsp": your_isp,
        "yourIp": your_ip,
        "candidatePair_RTT": float(rtt_ms),
        "yourID": your_id,
        "peerID": peer_id,
    }
    record.update(extra)
    return record


def validate_record(obj: Any) -> Mapping[str, Any]:
    """Check a parsed JSON value against the record schema.

    Returns the object unchanged on success. Raises Malformed when the
    value is not an object, SchemaViolation naming the offending field
    otherwise.
    """
    if not isinstance(obj, Mapping):
        raise Malformed(f"expected a JSON object, got {type(obj).__name__}")
    for field in REQUIRED_FIELDS:
        if field not in obj:
            raise SchemaViolation(field, "missing")
    date = obj["Date"]
    if isinstance(date, bool) or not isinstance(date, int):
        raise SchemaViolation("Date", "must be an integer (Unix ms)")
    if date <= 0:
        raise SchemaViolation("Date", "must be positive")
    for field in ("yourIsp", "yourIp", "yourID", "peerID"):
        if not isinstance(obj[field], str):
            raise SchemaViolation(field, "must be a string")
    rtt = obj["candidatePair_RTT"]
    if isinstance(rtt, bool) or not isinstance(rtt, (int, float)):
        raise SchemaViolation("candidatePair_RTT", "must be a number (ms)")
    if rtt < 0:
        raise SchemaViolation("candidatePair_RTT", "must be non-negative")
    if not obj["yourID"]:
        raise SchemaViolation("yourID", "must be nonempty")
    if not obj["peerID"]:
        raise SchemaViolation("peerID", "must be nonempty")
    if obj["yourID"] == obj["peerID"]:
        raise SchemaViolation("peerID", "must differ from yourID")
    return obj
