"""Link emulation and measurement validation.

Two complementary pieces:

* ``LinkEmulator`` - a deterministic per-datagram delay/loss model
  (seeded, per-direction constant delay plus bounded uniform jitter)
  that logs every decision to a ground-truth log. ``run_validation``
  drives two probe endpoints across it, under a virtual clock by
  default, and compares measured RTT against the injected truth.

* ``ShapedSocket`` - a wall-clock UDP socket wrapper that delays (or
  blackholes) outbound datagrams per destination, used to give live
  agent meshes known per-pair latencies on loopback.

The emulator stands in for an external kernel-level latency setup so
validation runs unprivileged and reproducibly; scenarios model the
injected latency as forward-path delay, matching how a single enforced
latency shows up once per round trip.
"""

from __future__ import annotations

import argparse
import heapq
import json
import math
import random
import socket
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

from . import probe
from .analysis import percentile

FORWARD = "forward"
REVERSE = "reverse"

QUARTILE_POINTS = (25, 50, 75, 100)


@dataclass(frozen=True)
class LinkSpec:
    """Emulated link parameters; identical seed gives identical delays."""

    forward_delay_ms: float = 0.0
    forward_jitter_ms: float = 0.0
    reverse_delay_ms: float = 0.0
    reverse_jitter_ms: float = 0.0
    loss_prob: float = 0.0
    reorder: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("forward_delay_ms", "forward_jitter_ms", "reverse_delay_ms", "reverse_jitter_ms"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {value}")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError(f"loss_prob must be in [0, 1], got {self.loss_prob}")

    @classmethod
    def from_json(cls, obj: dict) -> "LinkSpec":
        return cls(**obj)


@dataclass(frozen=True)
class GroundTruthEntry:
    seq: int
    direction: str
    injected_delay_ms: float
    dropped: bool

    def to_json(self) -> dict:
        return {
            "seq": self.seq,
            "direction": self.direction,
            "injected_delay_ms": self.injected_delay_ms,
            "dropped": self.dropped,
        }


class GroundTruthLog:
    """One entry per emulated datagram; the oracle for measured RTT."""

    def __init__(self) -> None:
        self.entries: list[GroundTruthEntry] = []

    def append(self, entry: GroundTruthEntry) -> None:
        self.entries.append(entry)

    def rtt_by_seq(self) -> dict[int, float]:
        """Truth RTT per seq: sum of both directions' delivered delays."""
        forward: dict[int, float] = {}
        out: dict[int, float] = {}
        for e in self.entries:
            if e.dropped:
                continue
            if e.direction == FORWARD:
                forward[e.seq] = e.injected_delay_ms
            elif e.seq in forward:
                out[e.seq] = forward[e.seq] + e.injected_delay_ms
        return out

    def to_ndjson(self) -> str:
        return "".join(json.dumps(e.to_json(), separators=(",", ":")) + "\n" for e in self.entries)


class LinkEmulator:
    """Deterministic delay/loss decisions for one bidirectional link.

    ``send`` returns the scheduled delivery time (caller-supplied time
    base) or None when the datagram is dropped. Without reorder,
    per-direction delivery times are clamped non-decreasing (FIFO); the
    logged delay is the effective one after clamping.
    """

    def __init__(self, spec: LinkSpec) -> None:
        self.spec = spec
        self.log = GroundTruthLog()
        self._rng = random.Random(spec.seed)
        self._last_delivery = {FORWARD: -math.inf, REVERSE: -math.inf}
        self._auto_seq = {FORWARD: 0, REVERSE: 0}

    def _params(self, direction: str) -> tuple[float, float]:
        if direction == FORWARD:
            return self.spec.forward_delay_ms, self.spec.forward_jitter_ms
        if direction == REVERSE:
            return self.spec.reverse_delay_ms, self.spec.reverse_jitter_ms
        raise ValueError(f"unknown direction {direction!r}")

    def send(self, direction: str, now_ms: float, seq: Optional[int] = None) -> Optional[float]:
        constant, jitter = self._params(direction)
        if seq is None:
            self._auto_seq[direction] += 1
            seq = self._auto_seq[direction]
        delay = constant + (self._rng.uniform(0.0, jitter) if jitter > 0 else 0.0)
        dropped = self.spec.loss_prob > 0 and self._rng.random() < self.spec.loss_prob
        if dropped:
            self.log.append(GroundTruthEntry(seq, direction, delay, True))
            return None
        deliver_at = now_ms + delay
        if not self.spec.reorder:
            deliver_at = max(deliver_at, self._last_delivery[direction])
            self._last_delivery[direction] = deliver_at
        self.log.append(GroundTruthEntry(seq, direction, deliver_at - now_ms, False))
        return deliver_at


@dataclass
class ValidationReport:
    """Measured-vs-truth comparison for one scenario run."""

    label: str
    spec: LinkSpec
    n_probes: int
    interval_ms: float
    measured: dict[int, float]
    truth: dict[int, float]
    final_jitter_ms: float
    log: GroundTruthLog = field(repr=False)

    @property
    def no_samples(self) -> bool:
        return not self.measured

    @property
    def n_samples(self) -> int:
        return len(self.measured)

    def measured_values(self) -> list[float]:
        return [self.measured[s] for s in sorted(self.measured)]

    def truth_values(self) -> list[float]:
        return [self.truth[s] for s in sorted(self.truth)]

    def deltas(self) -> list[float]:
        """measured - truth per seq observed on both sides."""
        return [self.measured[s] - self.truth[s] for s in sorted(self.measured) if s in self.truth]

    def mean_measured(self) -> float:
        values = self.measured_values()
        return sum(values) / len(values)

    def mean_truth(self) -> float:
        values = self.truth_values()
        return sum(values) / len(values)

    def quartiles(self, which: str) -> tuple[float, ...]:
        values = self.measured_values() if which == "measured" else self.truth_values()
        return tuple(percentile(values, p) for p in QUARTILE_POINTS)


def _to_us(t_ms: float) -> int:
    return math.ceil(t_ms * 1000.0 - 1e-9)


def run_validation(
    link: LinkSpec,
    n_probes: int,
    interval_ms: float = 1000.0,
    payload_size: int = probe.DEFAULT_PAYLOAD_SIZE,
    clock: str = "virtual",
    label: str = "",
) -> ValidationReport:
    """Run two probe endpoints across the emulated link.

    Under the virtual clock the run is event-driven and completes
    immediately regardless of interval; the wall clock mode replays the
    same schedule in real time (sequential per probe) so real codec and
    scheduling overhead shows up in the measured series.
    """
    if n_probes < 1:
        raise ValueError("n_probes must be >= 1")
    if clock == "virtual":
        return _run_virtual(link, n_probes, interval_ms, payload_size, label)
    if clock == "wall":
        return _run_wall(link, n_probes, interval_ms, payload_size, label)
    raise ValueError(f"clock must be 'virtual' or 'wall', got {clock!r}")


def _run_virtual(
    link: LinkSpec, n_probes: int, interval_ms: float, payload_size: int, label: str
) -> ValidationReport:
    emulator = LinkEmulator(link)
    measured: dict[int, float] = {}
    jitter = probe.JitterState()
    prev_sample: Optional[probe.RttSample] = None

    events: list[tuple[float, int, str, bytes]] = []
    counter = 0
    for i in range(n_probes):
        t = i * interval_ms
        seq = i + 1
        req = probe.ProbeRequest(seq=seq, send_ts_us=_to_us(t))
        heapq.heappush(events, (t, counter, "send", probe.encode_request(req, payload_size)))
        counter += 1

    while events:
        t, _, kind, data = heapq.heappop(events)
        if kind == "send":
            msg = probe.decode(data)
            deliver_at = emulator.send(FORWARD, t, seq=msg.seq)
            if deliver_at is not None:
                heapq.heappush(events, (deliver_at, counter, "fwd-arrive", data))
                counter += 1
        elif kind == "fwd-arrive":
            req = probe.decode(data)
            assert isinstance(req, probe.ProbeRequest)
            resp = probe.respond_to(req, recv_ts_us=_to_us(t))
            deliver_at = emulator.send(REVERSE, t, seq=req.seq)
            if deliver_at is not None:
                heapq.heappush(
                    events,
                    (deliver_at, counter, "rev-arrive", probe.encode_response(resp, payload_size)),
                )
                counter += 1
        else:
            resp = probe.decode(data)
            assert isinstance(resp, probe.ProbeResponse)
            sample = probe.rtt_from_response(resp, _to_us(t), peer_id="responder", sampled_at_ms=int(t))
            measured[sample.seq] = sample.rtt_ms
            jitter = probe.update_jitter(jitter, sample, prev_sample)
            prev_sample = sample

    return ValidationReport(
        label=label,
        spec=link,
        n_probes=n_probes,
        interval_ms=interval_ms,
        measured=measured,
        truth=emulator.log.rtt_by_seq(),
        final_jitter_ms=jitter.j_ms,
        log=emulator.log,
    )


def _run_wall(
    link: LinkSpec, n_probes: int, interval_ms: float, payload_size: int, label: str
) -> ValidationReport:
    emulator = LinkEmulator(link)
    measured: dict[int, float] = {}
    jitter = probe.JitterState()
    prev_sample: Optional[probe.RttSample] = None
    start_us = probe.monotonic_us()

    def now_ms() -> float:
        return (probe.monotonic_us() - start_us) / 1000.0

    def sleep_until(t_ms: float) -> None:
        remaining = t_ms - now_ms()
        if remaining > 0:
            time.sleep(remaining / 1000.0)

    for i in range(n_probes):
        sleep_until(i * interval_ms)
        seq = i + 1
        send_us = probe.monotonic_us()
        data = probe.encode_request(probe.ProbeRequest(seq=seq, send_ts_us=send_us), payload_size)
        t = now_ms()
        fwd_at = emulator.send(FORWARD, t, seq=seq)
        if fwd_at is None:
            continue
        sleep_until(fwd_at)
        req = probe.decode(data)
        assert isinstance(req, probe.ProbeRequest)
        resp = probe.respond_to(req, recv_ts_us=probe.monotonic_us())
        rdata = probe.encode_response(resp, payload_size)
        rev_at = emulator.send(REVERSE, now_ms(), seq=seq)
        if rev_at is None:
            continue
        sleep_until(rev_at)
        decoded = probe.decode(rdata)
        assert isinstance(decoded, probe.ProbeResponse)
        sample = probe.rtt_from_response(decoded, probe.monotonic_us(), peer_id="responder")
        measured[sample.seq] = sample.rtt_ms
        jitter = probe.update_jitter(jitter, sample, prev_sample)
        prev_sample = sample

    return ValidationReport(
        label=label,
        spec=link,
        n_probes=n_probes,
        interval_ms=interval_ms,
        measured=measured,
        truth=emulator.log.rtt_by_seq(),
        final_jitter_ms=jitter.j_ms,
        log=emulator.log,
    )


# --- report rendering ------------------------------------------------------

_CSV_COLUMNS = (
    "scenario", "n_probes", "n_samples", "mean_truth_ms", "mean_measured_ms", "mean_delta_ms",
    "q25_truth", "q25_measured", "q50_truth", "q50_measured",
    "q75_truth", "q75_measured", "q100_truth", "q100_measured", "final_jitter_ms",
)


def render_validation(reports: Sequence[ValidationReport]) -> tuple[str, str, str]:
    """Render scenario reports as (text table, CSV, boxplot SVG)."""
    from .render import boxplot_svg

    rows: list[dict[str, object]] = []
    for r in reports:
        if r.no_samples:
            rows.append({"scenario": r.label, "n_probes": r.n_probes, "n_samples": 0})
            continue
        qm = r.quartiles("measured")
        qt = r.quartiles("truth")
        deltas = r.deltas()
        rows.append({
            "scenario": r.label,
            "n_probes": r.n_probes,
            "n_samples": r.n_samples,
            "mean_truth_ms": r.mean_truth(),
            "mean_measured_ms": r.mean_measured(),
            "mean_delta_ms": sum(deltas) / len(deltas) if deltas else 0.0,
            "q25_truth": qt[0], "q25_measured": qm[0],
            "q50_truth": qt[1], "q50_measured": qm[1],
            "q75_truth": qt[2], "q75_measured": qm[2],
            "q100_truth": qt[3], "q100_measured": qm[3],
            "final_jitter_ms": r.final_jitter_ms,
        })

    csv_lines = [",".join(_CSV_COLUMNS)]
    for row in rows:
        cells = []
        for col in _CSV_COLUMNS:
            value = row.get(col, "")
            cells.append(repr(value) if isinstance(value, float) else str(value))
        csv_lines.append(",".join(cells))
    csv_text = "\n".join(csv_lines) + "\n"

    width = max((len(str(r["scenario"])) for r in rows), default=8)
    width = max(width, len("scenario"))
    text_lines = [
        f"{'scenario':<{width}}  {'n':>5}  {'truth mean':>10}  {'measured mean':>13}  {'delta':>7}  {'jitter':>7}"
    ]
    for row in rows:
        if row["n_samples"] == 0:
            text_lines.append(f"{row['scenario']:<{width}}  {0:>5}  NoSamples")
            continue
        text_lines.append(
            f"{row['scenario']:<{width}}  {row['n_samples']:>5}  "
            f"{row['mean_truth_ms']:>10.3f}  {row['mean_measured_ms']:>13.3f}  "
            f"{row['mean_delta_ms']:>7.3f}  {row['final_jitter_ms']:>7.3f}"
        )
    text = "\n".join(text_lines) + "\n"

    groups: list[tuple[str, Sequence[float]]] = []
    for r in reports:
        groups.append((f"{r.label} measured", r.measured_values()))
        groups.append((f"{r.label} truth", r.truth_values()))
    svg = boxplot_svg(groups)
    return text, csv_text, svg


# --- wall-clock shaping for live agents -------------------------------------


class DelayScheduler:
    """Single worker firing callbacks at monotonic-clock deadlines.

    Sleeps until shortly before the next deadline, then spins the last
    stretch; condition-variable wakeups alone overshoot by ~0.5 ms,
    which is visible against millisecond-scale injected delays.
    """

    SPIN_WINDOW_S = 0.0015

    def __init__(self) -> None:
        self._heap: list[tuple[float, int, Callable[[], None]]] = []
        self._counter = 0
        self._cond = threading.Condition()
        self._stopped = False
        self._thread = threading.Thread(target=self._loop, name="delay-scheduler", daemon=True)
        self._thread.start()

    def call_later(self, delay_s: float, fn: Callable[[], None]) -> None:
        with self._cond:
            heapq.heappush(self._heap, (time.monotonic() + delay_s, self._counter, fn))
            self._counter += 1
            self._cond.notify()

    def _loop(self) -> None:
        while True:
            with self._cond:
                while not self._stopped:
                    if not self._heap:
                        self._cond.wait()
                        continue
                    lead = self._heap[0][0] - time.monotonic()
                    if lead > self.SPIN_WINDOW_S:
                        self._cond.wait(timeout=lead - self.SPIN_WINDOW_S)
                        continue
                    break
                if self._stopped:
                    return
                due, _, fn = heapq.heappop(self._heap)
            while time.monotonic() < due:
                time.sleep(0)  # yield the GIL; a hard spin starves the agent threads
            try:
                fn()
            except Exception:
                pass

    def stop(self) -> None:
        with self._cond:
            self._stopped = True
            self._cond.notify()
        self._thread.join(timeout=2)


class ShapedSocket:
    """UDP socket that delays or blackholes outbound datagrams per peer.

    ``delay_plan`` maps a destination port to a delay in milliseconds
    (loopback meshes distinguish agents by port). Probe responses pass
    through undelayed: the injected latency models a forward-path
    delay, so a configured value shows up once per round trip. Ports in
    ``blackholes`` are silently dropped. Inbound traffic is untouched.
    """

    def __init__(
        self,
        scheduler: DelayScheduler,
        delay_plan: Optional[dict[int, float]] = None,
        blackholes: Optional[set[int]] = None,
    ) -> None:
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._scheduler = scheduler
        self.delay_plan = dict(delay_plan or {})
        self.blackholes = set(blackholes or ())
        self.shaped_sent = 0

    def bind(self, addr: tuple[str, int]) -> None:
        self._sock.bind(addr)

    def getsockname(self) -> tuple[str, int]:
        return self._sock.getsockname()

    def settimeout(self, timeout: Optional[float]) -> None:
        self._sock.settimeout(timeout)

    def recvfrom(self, bufsize: int) -> tuple[bytes, tuple]:
        return self._sock.recvfrom(bufsize)

    def sendto(self, data: bytes, addr: tuple[str, int]) -> int:
        port = addr[1]
        if port in self.blackholes:
            return len(data)
        delay_ms = self.delay_plan.get(port, 0.0)
        if delay_ms <= 0 or self._is_probe_response(data):
            return self._sock.sendto(data, addr)
        self.shaped_sent += 1
        self._scheduler.call_later(delay_ms / 1000.0, lambda: self._send_now(data, addr))
        return len(data)

    @staticmethod
    def _is_probe_response(data: bytes) -> bool:
        return data[:4] == probe.MAGIC and len(data) > 5 and data[5] == probe.KIND_RESPONSE

    def _send_now(self, data: bytes, addr: tuple[str, int]) -> None:
        try:
            self._sock.sendto(data, addr)
        except OSError:
            pass

    def close(self) -> None:
        self._sock.close()


# --- scenario CLI ------------------------------------------------------------


def run_scenarios(scenarios: Sequence[dict], clock: str = "virtual") -> list[ValidationReport]:
    reports = []
    for sc in scenarios:
        link = LinkSpec.from_json(sc["link"])
        reports.append(
            run_validation(
                link,
                n_probes=int(sc.get("n_probes", 500)),
                interval_ms=float(sc.get("interval_ms", 1000.0)),
                payload_size=int(sc.get("payload_size", probe.DEFAULT_PAYLOAD_SIZE)),
                clock=sc.get("clock", clock),
                label=str(sc.get("name", "")),
            )
        )
    return reports


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="meshmeter-linklab",
        description="Run emulated-link validation scenarios and render the comparison report.",
    )
    parser.add_argument("--scenario", required=True, help="JSON file: array of scenario objects")
    parser.add_argument("--out", required=True, help="output directory")
    args = parser.parse_args(argv)

    scenarios = json.loads(Path(args.scenario).read_text(encoding="utf-8"))
    reports = run_scenarios(scenarios)
    text, csv_text, svg = render_validation(reports)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "validation.txt").write_text(text, encoding="utf-8")
    (out_dir / "validation.csv").write_text(csv_text, encoding="utf-8")
    (out_dir / "boxplot.svg").write_text(svg, encoding="utf-8")
    with (out_dir / "groundtruth.ndjson").open("w", encoding="utf-8") as fh:
        for report in reports:
            for entry in report.log.entries:
                obj = entry.to_json()
                obj["scenario"] = report.label
                fh.write(json.dumps(obj, separators=(",", ":")) + "\n")
    print(text, end="")
    print(f"wrote validation outputs to {out_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
