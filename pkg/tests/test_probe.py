"""Tests for the probe wire format, RTT sampling, and jitter recursion."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meshmeter import probe
from meshmeter.probe import (
    BadKind,
    BadMagic,
    ClockViolation,
    JitterState,
    PayloadTooSmall,
    ProbeRequest,
    ProbeResponse,
    RttSample,
    SequenceCounter,
    Truncated,
    UnsupportedVersion,
    decode,
    encode_request,
    encode_response,
    respond_to,
    rtt_from_response,
    update_jitter,
)

seqs = st.integers(min_value=0, max_value=2**32 - 1)
timestamps = st.integers(min_value=0, max_value=2**64 - 1)


def jitter_reference(rtts: list[float], j0: float = 0.0) -> float:
    """Independent brute-force recursion used as the jitter oracle."""
    j = j0
    for prev, cur in zip(rtts, rtts[1:]):
        d = (cur - prev) / 2.0
        j = j + (abs(d) - j) / 16.0
    return j


class TestEncodeRequest:
    def test_exact_payload_size(self) -> None:
        data = encode_request(ProbeRequest(seq=7, send_ts_us=123456), payload_size=100)
        assert len(data) == 100

    def test_header_only_bytes_match_layout_table(self) -> None:
        # Hand-assembled from the documented layout: magic, version,
        # kind, seq=1 big-endian, zero timestamp, three reserved octets.
        expected = b"PMM1" + b"\x01" + b"\x01" + b"\x00\x00\x00\x01" + b"\x00" * 8 + b"\x00" * 3
        assert encode_request(ProbeRequest(seq=1, send_ts_us=0), payload_size=21) == expected

    def test_padding_is_zero_filled(self) -> None:
        data = encode_request(ProbeRequest(seq=1, send_ts_us=2), payload_size=60)
        assert data[probe.REQUEST_HEADER_LEN :] == b"\x00" * (60 - probe.REQUEST_HEADER_LEN)

    def test_payload_too_small(self) -> None:
        with pytest.raises(PayloadTooSmall):
            encode_request(ProbeRequest(seq=1, send_ts_us=0), payload_size=20)

    @given(seq=seqs, ts=timestamps, size=st.integers(min_value=21, max_value=400))
    def test_round_trip_and_length(self, seq: int, ts: int, size: int) -> None:
        req = ProbeRequest(seq=seq, send_ts_us=ts)
        data = encode_request(req, payload_size=size)
        assert len(data) == size
        assert decode(data) == req


class TestDecode:
    def test_twenty_octets_is_truncated(self) -> None:
        with pytest.raises(Truncated):
            decode(b"\x00" * 20)

    def test_bad_magic(self) -> None:
        data = b"XXXX" + encode_request(ProbeRequest(1, 0), 21)[4:]
        with pytest.raises(BadMagic):
            decode(data)

    def test_unsupported_version(self) -> None:
        data = bytearray(encode_request(ProbeRequest(1, 0), 21))
        data[4] = 9
        with pytest.raises(UnsupportedVersion):
            decode(bytes(data))

    def test_bad_kind(self) -> None:
        data = bytearray(encode_request(ProbeRequest(1, 0), 21))
        data[5] = 7
        with pytest.raises(BadKind):
            decode(bytes(data))

    def test_response_built_by_hand_decodes_with_echoed_fields(self) -> None:
        raw = (
            b"PMM1" + b"\x01" + b"\x02"
            + (42).to_bytes(4, "big")
            + (1000).to_bytes(8, "big")
            + (2000).to_bytes(8, "big")
            + (2100).to_bytes(8, "big")
            + b"\x00" * 3
        )
        msg = decode(raw)
        assert msg == ProbeResponse(seq=42, echo_send_ts_us=1000, resp_recv_ts_us=2000, resp_send_ts_us=2100)

    def test_short_response_is_truncated(self) -> None:
        resp = respond_to(ProbeRequest(seq=3, send_ts_us=10), recv_ts_us=20)
        data = encode_response(resp)
        with pytest.raises(Truncated):
            decode(data[:36])

    @given(
        seq=seqs,
        echo=st.integers(min_value=0, max_value=2**64 - 1 - 10**6),
        extra=st.integers(min_value=0, max_value=10**6),
    )
    def test_response_round_trip(self, seq: int, echo: int, extra: int) -> None:
        resp = ProbeResponse(
            seq=seq, echo_send_ts_us=echo, resp_recv_ts_us=echo, resp_send_ts_us=echo + extra
        )
        assert decode(encode_response(resp)) == resp

    def test_response_padded_to_payload_size(self) -> None:
        resp = respond_to(ProbeRequest(seq=3, send_ts_us=10), recv_ts_us=20)
        assert len(encode_response(resp, payload_size=100)) == 100
        assert len(encode_response(resp)) == probe.RESPONSE_HEADER_LEN


class TestRttFromResponse:
    def _resp(self, echo: int) -> ProbeResponse:
        return ProbeResponse(seq=1, echo_send_ts_us=echo, resp_recv_ts_us=echo, resp_send_ts_us=echo)

    def test_zero_rtt(self) -> None:
        sample = rtt_from_response(self._resp(0), recv_ts_us=0, peer_id="p", sampled_at_ms=1)
        assert sample.rtt_ms == 0.0

    def test_microsecond_subtraction(self) -> None:
        sample = rtt_from_response(
            self._resp(1_000_000), recv_ts_us=1_010_329, peer_id="p", sampled_at_ms=1
        )
        assert sample.rtt_ms == pytest.approx(10.329)

    def test_clock_violation(self) -> None:
        with pytest.raises(ClockViolation):
            rtt_from_response(self._resp(100), recv_ts_us=99)

    @given(echo=timestamps, delta=st.integers(min_value=0, max_value=10**9))
    def test_non_negative_for_ordered_clocks(self, echo: int, delta: int) -> None:
        sample = rtt_from_response(self._resp(echo), recv_ts_us=echo + delta, sampled_at_ms=1)
        assert sample.rtt_ms >= 0.0


class TestJitter:
    def _sample(self, rtt: float, seq: int = 1, at: int = 1) -> RttSample:
        return RttSample(peer_id="p", rtt_ms=rtt, seq=seq, sampled_at_ms=at)

    def test_first_sample_leaves_j_unchanged(self) -> None:
        state = update_jitter(JitterState(j_ms=3.0), self._sample(10.0))
        assert state.j_ms == 3.0
        assert state.last_transit_ms == 5.0

    def test_zero_delta_keeps_zero(self) -> None:
        state = update_jitter(JitterState(), self._sample(10.0, seq=2, at=2), self._sample(10.0))
        assert state.j_ms == 0.0

    def test_fixed_point(self) -> None:
        # |D| = (42 - 10)/2 = 16 equals j, so j stays 16.
        state = update_jitter(JitterState(j_ms=16.0), self._sample(42.0, seq=2, at=2), self._sample(10.0))
        assert state.j_ms == pytest.approx(16.0)

    def test_alternating_sequence_matches_reference_loop(self) -> None:
        rtts = [10.0, 14.0] * 10
        state = JitterState()
        prev = None
        for i, rtt in enumerate(rtts):
            sample = self._sample(rtt, seq=i + 1, at=i + 1)
            state = update_jitter(state, sample, prev)
            prev = sample
        assert state.j_ms == pytest.approx(jitter_reference(rtts), abs=1e-12)
        assert state.j_ms == pytest.approx(2.0 * (1 - (15 / 16) ** 19), abs=1e-12)

    @given(st.lists(st.floats(min_value=0.0, max_value=1000.0, allow_nan=False), min_size=1, max_size=60))
    @settings(max_examples=200)
    def test_matches_reference_loop_and_stays_non_negative(self, rtts: list[float]) -> None:
        state = JitterState()
        prev = None
        for i, rtt in enumerate(rtts):
            sample = self._sample(rtt, seq=i + 1, at=i + 1)
            state = update_jitter(state, sample, prev)
            assert state.j_ms >= 0.0
            prev = sample
        assert state.j_ms == pytest.approx(jitter_reference(rtts), abs=1e-9)

    def test_converges_to_zero_on_equal_rtts(self) -> None:
        initial = 8.0
        state = JitterState(j_ms=initial, last_transit_ms=5.0)
        prev = self._sample(10.0)
        for i in range(200):
            sample = self._sample(10.0, seq=i + 2, at=i + 2)
            state = update_jitter(state, sample, prev)
            prev = sample
        assert state.j_ms < 1e-3 * initial


class TestSequenceCounter:
    def test_strictly_increasing_from_one(self) -> None:
        counter = SequenceCounter()
        values = [counter.next() for _ in range(1000)]
        assert values[0] == 1
        assert all(b == a + 1 for a, b in zip(values, values[1:]))
        assert len(set(values)) == len(values)
