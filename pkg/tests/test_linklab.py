"""Tests for the link emulator, validation harness, and wall-clock shaping."""

from __future__ import annotations

import socket
import time

import pytest

from meshmeter.linklab import (
    FORWARD,
    REVERSE,
    DelayScheduler,
    GroundTruthEntry,
    LinkEmulator,
    LinkSpec,
    ShapedSocket,
    render_validation,
    run_validation,
)


class TestLinkSpec:
    def test_rejects_negative_delay(self) -> None:
        with pytest.raises(ValueError):
            LinkSpec(forward_delay_ms=-1.0)

    def test_rejects_bad_loss(self) -> None:
        with pytest.raises(ValueError):
            LinkSpec(loss_prob=1.5)

    def test_from_json(self) -> None:
        spec = LinkSpec.from_json({"forward_delay_ms": 10, "seed": 3})
        assert spec.forward_delay_ms == 10
        assert spec.seed == 3


class TestLinkEmulator:
    def test_zero_link_delivers_immediately(self) -> None:
        emu = LinkEmulator(LinkSpec())
        assert emu.send(FORWARD, now_ms=5.0, seq=1) == 5.0
        entry = emu.log.entries[0]
        assert entry == GroundTruthEntry(seq=1, direction=FORWARD, injected_delay_ms=0.0, dropped=False)

    def test_constant_forward_delay_logged_exactly(self) -> None:
        emu = LinkEmulator(LinkSpec(forward_delay_ms=10.0))
        for i in range(100):
            emu.send(FORWARD, now_ms=i * 1000.0, seq=i + 1)
            emu.send(REVERSE, now_ms=i * 1000.0 + 10.0, seq=i + 1)
        forward = [e for e in emu.log.entries if e.direction == FORWARD]
        assert all(e.injected_delay_ms == 10.0 for e in forward)
        reverse = [e for e in emu.log.entries if e.direction == REVERSE]
        assert all(e.injected_delay_ms == 0.0 for e in reverse)

    def test_same_seed_same_log(self) -> None:
        spec = LinkSpec(forward_delay_ms=30.0, forward_jitter_ms=30.0, loss_prob=0.1, seed=99)
        logs = []
        for _ in range(2):
            emu = LinkEmulator(spec)
            for i in range(1000):
                emu.send(FORWARD, now_ms=i * 100.0, seq=i + 1)
            logs.append(emu.log.entries)
        assert logs[0] == logs[1]

    def test_full_loss_drops_everything(self) -> None:
        emu = LinkEmulator(LinkSpec(loss_prob=1.0))
        assert emu.send(FORWARD, now_ms=0.0, seq=1) is None
        assert emu.log.entries[0].dropped is True

    def test_fifo_clamp_without_reorder(self) -> None:
        # closely spaced sends with large jitter would reorder freely
        emu = LinkEmulator(LinkSpec(forward_delay_ms=5.0, forward_jitter_ms=50.0, seed=7))
        deliveries = [emu.send(FORWARD, now_ms=float(i), seq=i + 1) for i in range(200)]
        assert all(b >= a for a, b in zip(deliveries, deliveries[1:]))

    def test_reorder_allows_decreasing_delivery(self) -> None:
        emu = LinkEmulator(
            LinkSpec(forward_delay_ms=5.0, forward_jitter_ms=50.0, seed=7, reorder=True)
        )
        deliveries = [emu.send(FORWARD, now_ms=float(i), seq=i + 1) for i in range(200)]
        assert any(b < a for a, b in zip(deliveries, deliveries[1:]))

    def test_rtt_by_seq_sums_both_directions(self) -> None:
        emu = LinkEmulator(LinkSpec(forward_delay_ms=7.0, reverse_delay_ms=3.0))
        emu.send(FORWARD, now_ms=0.0, seq=1)
        emu.send(REVERSE, now_ms=7.0, seq=1)
        assert emu.log.rtt_by_seq() == {1: 10.0}


class TestRunValidationVirtual:
    def test_constant_ten_ms_mean(self) -> None:
        report = run_validation(LinkSpec(forward_delay_ms=10.0, seed=1), n_probes=500)
        assert report.n_samples == 500
        assert report.mean_measured() == pytest.approx(10.0, abs=1.0)
        assert report.mean_truth() == pytest.approx(10.0, abs=1e-9)

    def test_measured_never_below_truth(self) -> None:
        report = run_validation(
            LinkSpec(forward_delay_ms=30.0, forward_jitter_ms=30.0, seed=5), n_probes=500
        )
        assert all(d >= 0.0 for d in report.deltas())
        assert max(report.deltas()) < 0.01  # quantization only

    def test_jitter_scenario_quartiles_track_truth(self) -> None:
        report = run_validation(
            LinkSpec(forward_delay_ms=30.0, forward_jitter_ms=30.0, seed=11), n_probes=500
        )
        for measured, truth in zip(report.quartiles("measured"), report.quartiles("truth")):
            assert measured == pytest.approx(truth, abs=2.0)
        assert 0.0 < report.final_jitter_ms < 30.0

    def test_constant_delay_keeps_jitter_estimate_low(self) -> None:
        report = run_validation(LinkSpec(forward_delay_ms=50.0, seed=2), n_probes=300)
        assert report.final_jitter_ms < 0.5

    def test_full_loss_flags_no_samples(self) -> None:
        report = run_validation(LinkSpec(loss_prob=1.0, seed=3), n_probes=50)
        assert report.no_samples
        assert report.n_samples == 0

    def test_partial_loss_drops_some(self) -> None:
        report = run_validation(LinkSpec(loss_prob=0.3, seed=4), n_probes=400)
        assert 0 < report.n_samples < 400

    def test_virtual_run_is_fast_despite_interval(self) -> None:
        started = time.monotonic()
        run_validation(LinkSpec(forward_delay_ms=100.0, seed=6), n_probes=500, interval_ms=1000.0)
        assert time.monotonic() - started < 5.0


class TestRunValidationWall:
    def test_wall_clock_overhead_is_small(self) -> None:
        report = run_validation(
            LinkSpec(forward_delay_ms=5.0, seed=8), n_probes=20, interval_ms=20.0, clock="wall"
        )
        assert report.n_samples == 20
        deltas = report.deltas()
        assert all(d >= -0.001 for d in deltas)
        assert report.mean_measured() == pytest.approx(5.0, abs=3.0)


class TestRenderValidation:
    def test_single_sample_has_identical_quartiles(self) -> None:
        report = run_validation(LinkSpec(forward_delay_ms=4.0, seed=9), n_probes=1)
        text, csv_text, svg = render_validation([report])
        assert "1" in text
        row = dict(zip(csv_text.splitlines()[0].split(","), csv_text.splitlines()[1].split(",")))
        assert row["n_samples"] == "1"
        assert row["q25_measured"] == row["q50_measured"] == row["q100_measured"]

    def test_three_scenarios_in_order(self) -> None:
        reports = [
            run_validation(LinkSpec(forward_delay_ms=d, seed=10), n_probes=5, label=f"{d:g}ms")
            for d in (0.0, 10.0, 100.0)
        ]
        text, csv_text, _ = render_validation(reports)
        lines = csv_text.splitlines()
        assert [line.split(",")[0] for line in lines[1:]] == ["0ms", "10ms", "100ms"]
        assert text.index("0ms") < text.index("10ms") < text.index("100ms")

    def test_csv_round_trips_report_fields_exactly(self) -> None:
        report = run_validation(
            LinkSpec(forward_delay_ms=30.0, forward_jitter_ms=30.0, seed=12),
            n_probes=50,
            label="jitter",
        )
        _, csv_text, _ = render_validation([report])
        header, row = csv_text.splitlines()
        fields = dict(zip(header.split(","), row.split(",")))
        assert float(fields["mean_measured_ms"]) == report.mean_measured()
        assert float(fields["mean_truth_ms"]) == report.mean_truth()
        assert float(fields["q100_measured"]) == report.quartiles("measured")[3]
        assert float(fields["final_jitter_ms"]) == report.final_jitter_ms

    def test_no_samples_notice(self) -> None:
        report = run_validation(LinkSpec(loss_prob=1.0, seed=13), n_probes=5)
        text, csv_text, svg = render_validation([report])
        assert "NoSamples" in text
        assert "no samples" in svg


class TestShapedSocket:
    def test_delay_plan_applies_to_destination(self) -> None:
        scheduler = DelayScheduler()
        receiver = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        receiver.bind(("127.0.0.1", 0))
        receiver.settimeout(2.0)
        port = receiver.getsockname()[1]
        shaped = ShapedSocket(scheduler, delay_plan={port: 50.0})
        shaped.bind(("127.0.0.1", 0))
        try:
            started = time.monotonic()
            shaped.sendto(b"delayed", ("127.0.0.1", port))
            data, _ = receiver.recvfrom(100)
            elapsed_ms = (time.monotonic() - started) * 1000.0
            assert data == b"delayed"
            assert 45.0 <= elapsed_ms <= 120.0
            assert shaped.shaped_sent == 1
        finally:
            shaped.close()
            receiver.close()
            scheduler.stop()

    def test_unplanned_destination_passes_through(self) -> None:
        scheduler = DelayScheduler()
        receiver = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        receiver.bind(("127.0.0.1", 0))
        receiver.settimeout(2.0)
        shaped = ShapedSocket(scheduler)
        shaped.bind(("127.0.0.1", 0))
        try:
            shaped.sendto(b"direct", receiver.getsockname())
            data, _ = receiver.recvfrom(100)
            assert data == b"direct"
            assert shaped.shaped_sent == 0
        finally:
            shaped.close()
            receiver.close()
            scheduler.stop()

    def test_probe_responses_bypass_the_delay(self) -> None:
        from meshmeter import probe

        scheduler = DelayScheduler()
        receiver = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        receiver.bind(("127.0.0.1", 0))
        receiver.settimeout(2.0)
        port = receiver.getsockname()[1]
        shaped = ShapedSocket(scheduler, delay_plan={port: 200.0})
        shaped.bind(("127.0.0.1", 0))
        try:
            resp = probe.respond_to(probe.ProbeRequest(seq=1, send_ts_us=5), recv_ts_us=9)
            started = time.monotonic()
            shaped.sendto(probe.encode_response(resp, 100), ("127.0.0.1", port))
            receiver.recvfrom(200)
            elapsed_ms = (time.monotonic() - started) * 1000.0
            assert elapsed_ms < 50.0
            assert shaped.shaped_sent == 0
        finally:
            shaped.close()
            receiver.close()
            scheduler.stop()

    def test_blackhole_swallows_datagrams(self) -> None:
        scheduler = DelayScheduler()
        receiver = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        receiver.bind(("127.0.0.1", 0))
        receiver.settimeout(0.3)
        port = receiver.getsockname()[1]
        shaped = ShapedSocket(scheduler, blackholes={port})
        shaped.bind(("127.0.0.1", 0))
        try:
            shaped.sendto(b"gone", ("127.0.0.1", port))
            with pytest.raises((TimeoutError, socket.timeout)):
                receiver.recvfrom(100)
        finally:
            shaped.close()
            receiver.close()
            scheduler.stop()

    def test_scheduler_preserves_order_per_delay(self) -> None:
        scheduler = DelayScheduler()
        fired: list[int] = []
        for i in range(10):
            scheduler.call_later(0.02 + i * 0.005, lambda i=i: fired.append(i))
        time.sleep(0.2)
        scheduler.stop()
        assert fired == list(range(10))
