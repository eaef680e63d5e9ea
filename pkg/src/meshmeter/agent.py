"""Headless measurement agent.

Joins a signaling session, exchanges datagram endpoints with every
roster peer, and keeps a directed probe stream to each of them: one
probe request per second per peer, one measurement record per stats
tick per peer with a fresh sample. Records go to the collector over
HTTP and to a local newline-JSON log.

Connection establishment is a three-way datagram handshake
(hello / hello-ack / ack) with retransmits, bounded by a deadline;
peers that never complete it are marked failed and simply produce no
records. Lost probe responses produce no sample for that sequence
number; nothing is extrapolated.

Handshake and endpoint-descriptor datagrams are small JSON objects,
distinguishable from probe messages by their first byte (probe
messages start with the fixed magic tag).
"""

from __future__ import annotations

import argparse
import http.client
import json
import logging
import socket
import threading
import time
import urllib.request
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence
from urllib.parse import urlsplit

from . import probe
from .records import make_record, validate_record
from .signaling import RosterEntry, SignalingClient, SignalingUnreachable

log = logging.getLogger("meshmeter.agent")

MIN_INTERVAL_MS = 100
HELLO_RESEND_S = 2.0

STUB_LOOKUP = {"ip": "203.0.113.7", "isp": "ExampleNet"}
BYTES_SENT_KEY = "ext_bytes_sent"  # interpretive: per-interval bytes toward this peer


class AgentError(Exception):
    pass


class AllPeersFailed(AgentError):
    """Roster had peers but no datagram path could be established."""


class LookupFailed(AgentError):
    pass


class DatagramTransport(Protocol):
    def bind(self, addr: tuple[str, int]) -> None: ...
    def getsockname(self) -> tuple[str, int]: ...
    def settimeout(self, timeout: Optional[float]) -> None: ...
    def recvfrom(self, bufsize: int) -> tuple[bytes, tuple]: ...
    def sendto(self, data: bytes, addr: tuple[str, int]) -> int: ...
    def close(self) -> None: ...


@dataclass
class AgentConfig:
    signaling_url: str
    session_id: str
    client_id: str
    collector_url: str
    payload_size: int = probe.DEFAULT_PAYLOAD_SIZE
    send_interval_ms: int = 1000
    stats_interval_ms: int = 1000
    duration_s: Optional[float] = None
    ip_lookup: str = "off"  # live | stub | off
    ip_lookup_url: str = "https://ipinfo.io/json"
    log_path: Optional[str] = None
    bind_host: str = "0.0.0.0"
    bind_port: int = 0
    handshake_deadline_s: float = 10.0
    handshake_retransmits: int = 5
    retry_queue_limit: int = 10_000

    def __post_init__(self) -> None:
        if self.payload_size < probe.REQUEST_HEADER_LEN:
            raise ValueError(f"payload_size must be >= {probe.REQUEST_HEADER_LEN}")
        if self.send_interval_ms < MIN_INTERVAL_MS or self.stats_interval_ms < MIN_INTERVAL_MS:
            raise ValueError(f"intervals must be >= {MIN_INTERVAL_MS} ms")
        if self.ip_lookup not in ("live", "stub", "off"):
            raise ValueError("ip_lookup must be live, stub, or off")


def parse_hostport(url: str, default_port: int) -> tuple[str, int]:
    text = url
    for prefix in ("tcp://", "ws://"):
        if text.startswith(prefix):
            text = text[len(prefix):]
    text = text.rstrip("/")
    if ":" in text:
        host, _, port = text.rpartition(":")
        return host, int(port)
    return text, default_port


def lookup_self(mode: str, url: str = "https://ipinfo.io/json", timeout_s: float = 5.0) -> dict:
    """Resolve the agent's public ip/isp once, per the configured mode.

    Live-mode failures degrade to empty strings with a warning; the
    measurement run must not abort over an unreachable lookup service.
    """
    if mode == "off":
        return {"ip": "", "isp": ""}
    if mode == "stub":
        return dict(STUB_LOOKUP)
    try:
        with urllib.request.urlopen(url, timeout=timeout_s) as resp:
            body = json.loads(resp.read().decode("utf-8"))
        return {"ip": str(body.get("ip", "")), "isp": str(body.get("org") or body.get("isp") or "")}
    except (OSError, ValueError) as exc:
        log.warning("ip lookup failed, continuing with empty ip/isp: %s", exc)
        return {"ip": "", "isp": ""}


class CollectorClient:
    """Keep-alive HTTP client for record posts; reconnects on failure.

    Used from the report thread only. A new connection per record would
    spawn a fresh collector handler thread each second per agent, which
    shows up as scheduling noise in the measurement path.
    """

    def __init__(self, base_url: str, timeout_s: float = 5.0) -> None:
        parts = urlsplit(base_url if "//" in base_url else f"http://{base_url}")
        self._host = parts.hostname or "127.0.0.1"
        self._port = parts.port or (443 if parts.scheme == "https" else 80)
        self._https = parts.scheme == "https"
        self._path = parts.path.rstrip("/") + "/api/v1/records"
        self._timeout_s = timeout_s
        self._conn: Optional[http.client.HTTPConnection] = None

    def post(self, record: dict) -> bool:
        body = json.dumps(record).encode("utf-8")
        for attempt in (0, 1):  # one retry on a stale keep-alive connection
            try:
                if self._conn is None:
                    conn_type = http.client.HTTPSConnection if self._https else http.client.HTTPConnection
                    self._conn = conn_type(self._host, self._port, timeout=self._timeout_s)
                self._conn.request(
                    "POST", self._path, body=body, headers={"Content-Type": "application/json"}
                )
                resp = self._conn.getresponse()
                resp.read()
                return resp.status == 201
            except (OSError, http.client.HTTPException):
                self.close()
                if attempt == 1:
                    return False
        return False

    def close(self) -> None:
        if self._conn is not None:
            try:
                self._conn.close()
            except OSError:
                pass
            self._conn = None


@dataclass
class PeerLink:
    """Directed measurement state toward one peer."""

    peer_id: str
    remote_addr: Optional[tuple[str, int]] = None
    state: str = "connecting"  # connecting | established | failed
    seq: probe.SequenceCounter = field(default_factory=probe.SequenceCounter)
    jitter: probe.JitterState = field(default_factory=probe.JitterState)
    latest_sample: Optional[probe.RttSample] = None
    prev_sample: Optional[probe.RttSample] = None
    reported_seq: int = 0
    created_at: float = field(default_factory=time.monotonic)
    last_hello_at: float = 0.0
    hellos_sent: int = 0
    probes_sent: int = 0
    bytes_sent_interval: int = 0


class Agent:
    """One measurement participant; safe to run many per process."""

    def __init__(
        self,
        config: AgentConfig,
        socket_factory: Optional[Callable[[], DatagramTransport]] = None,
        capture_records: bool = False,
    ) -> None:
        self.config = config
        self._socket_factory = socket_factory
        self.links: dict[str, PeerLink] = {}
        self._addr_to_peer: dict[tuple[str, int], str] = {}
        self._lock = threading.RLock()
        self._running = threading.Event()
        self._threads: list[threading.Thread] = []
        self._retry_queue: deque[dict] = deque()
        # serializes posting between the report loop and stop()
        self._post_lock = threading.Lock()
        self.capture_records = capture_records
        self.captured_records: list[dict] = []
        self.records_logged = 0
        self.records_posted = 0
        self.records_dropped = 0
        self.ip_info = {"ip": "", "isp": ""}
        self.sock: Optional[DatagramTransport] = None
        self.signaling: Optional[SignalingClient] = None
        self._collector = CollectorClient(config.collector_url)
        self._log_fh = None

    # --- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        cfg = self.config
        self.ip_info = lookup_self(cfg.ip_lookup, cfg.ip_lookup_url)
        self.sock = self._socket_factory() if self._socket_factory else socket.socket(
            socket.AF_INET, socket.SOCK_DGRAM
        )
        if self.sock.getsockname()[1] == 0:
            self.sock.bind((cfg.bind_host, cfg.bind_port))
        self.sock.settimeout(0.2)
        if cfg.log_path:
            self._log_fh = open(cfg.log_path, "a", encoding="utf-8")

        host, port = parse_hostport(cfg.signaling_url, 7401)
        self.signaling = SignalingClient(host, port)
        self.signaling.on_peer_joined = self._on_peer_joined
        self.signaling.on_peer_left = self._on_peer_left
        self.signaling.on_relay = self._on_relay
        roster = self.signaling.join(cfg.session_id, cfg.client_id)

        self._running.set()
        for entry in roster.members:
            if entry.client_id != cfg.client_id:
                self._ensure_link(entry.client_id)
                self._send_descriptor(entry.client_id)
        for target, name in (
            (self._receive_loop, "agent-recv"),
            (self._send_loop, "agent-send"),
            (self._report_loop, "agent-report"),
        ):
            t = threading.Thread(target=target, name=f"{name}-{cfg.client_id}", daemon=True)
            t.start()
            self._threads.append(t)

    def run(self) -> None:
        """Block until duration_s elapses (or forever), then stop."""
        if self.config.duration_s is None:
            while self._running.is_set():
                time.sleep(0.5)
        else:
            deadline = time.monotonic() + self.config.duration_s
            while self._running.is_set() and time.monotonic() < deadline:
                time.sleep(min(0.5, max(deadline - time.monotonic(), 0)))
        self.stop()

    def stop(self) -> None:
        if not self._running.is_set():
            return
        self._running.clear()
        self._flush_retry_queue()
        if self.signaling:
            self.signaling.close()
        if self.sock:
            self.sock.close()
        for t in self._threads:
            t.join(timeout=3)
        if self._log_fh:
            self._log_fh.close()
            self._log_fh = None

    def establish_mesh(self, timeout_s: Optional[float] = None) -> dict[str, PeerLink]:
        """Wait until every known peer link left the connecting state.

        Raises AllPeersFailed when peers existed but none established.
        An empty roster (self only) is success with an empty link set.
        """
        if timeout_s is None:
            timeout_s = self.config.handshake_deadline_s + 2.0
        deadline = time.monotonic() + timeout_s
        while time.monotonic() < deadline:
            with self._lock:
                if self.links and all(l.state != "connecting" for l in self.links.values()):
                    break
                if not self.links:
                    break
            time.sleep(0.05)
        with self._lock:
            links = dict(self.links)
        if links and not any(l.state == "established" for l in links.values()):
            raise AllPeersFailed(f"none of {len(links)} peer links established")
        return links

    # --- signaling callbacks -------------------------------------------------

    def _on_peer_joined(self, entry: RosterEntry) -> None:
        if entry.client_id == self.config.client_id:
            return
        self._ensure_link(entry.client_id)
        self._send_descriptor(entry.client_id)

    def _on_peer_left(self, client_id: str) -> None:
        with self._lock:
            link = self.links.pop(client_id, None)
            if link and link.remote_addr:
                self._addr_to_peer.pop(link.remote_addr, None)

    def _on_relay(self, from_id: str, payload: str) -> None:
        try:
            msg = json.loads(payload)
        except json.JSONDecodeError:
            return
        if msg.get("type") != "descriptor":
            return
        host = msg.get("host") or self._peer_host(from_id)
        port = msg.get("udp_port")
        if host is None or not isinstance(port, int):
            return
        link = self._ensure_link(from_id)
        with self._lock:
            link.remote_addr = (host, port)
            self._addr_to_peer[(host, port)] = from_id

    def _peer_host(self, peer_id: str) -> Optional[str]:
        if not self.signaling:
            return None
        entry = self.signaling.roster_snapshot().get(peer_id)
        if entry is None:
            return None
        return entry.observed_addr.rsplit(":", 1)[0]

    def _ensure_link(self, peer_id: str) -> PeerLink:
        with self._lock:
            link = self.links.get(peer_id)
            if link is None:
                link = PeerLink(peer_id=peer_id)
                self.links[peer_id] = link
            return link

    def _send_descriptor(self, peer_id: str) -> None:
        assert self.sock is not None and self.signaling is not None
        payload = json.dumps({"type": "descriptor", "udp_port": self.sock.getsockname()[1]})
        try:
            self.signaling.relay(peer_id, payload)
        except OSError:
            pass

    # --- datagram handling ---------------------------------------------------

    def _receive_loop(self) -> None:
        assert self.sock is not None
        while self._running.is_set():
            try:
                data, addr = self.sock.recvfrom(65535)
            except (TimeoutError, socket.timeout):
                continue
            except OSError:
                return
            if data[:4] == probe.MAGIC:
                self._on_probe_datagram(data, addr)
            elif data[:1] == b"{":
                self._on_control_datagram(data, addr)

    def _on_probe_datagram(self, data: bytes, addr: tuple) -> None:
        recv_us = probe.monotonic_us()
        try:
            msg = probe.decode(data)
        except probe.DecodeError:
            return
        if isinstance(msg, probe.ProbeRequest):
            resp = probe.respond_to(msg, recv_ts_us=recv_us, send_ts_us=probe.monotonic_us())
            try:
                self.sock.sendto(probe.encode_response(resp, self.config.payload_size), addr)
            except OSError:
                pass
            return
        with self._lock:
            peer_id = self._addr_to_peer.get((addr[0], addr[1]))
            link = self.links.get(peer_id) if peer_id else None
            if link is None or link.state != "established":
                return
            # clamp against wall-clock steps: sampled_at_ms never regresses per peer
            sampled_at = probe.unix_ms()
            if link.latest_sample is not None:
                sampled_at = max(sampled_at, link.latest_sample.sampled_at_ms)
            try:
                sample = probe.rtt_from_response(
                    msg, recv_us, peer_id=link.peer_id, sampled_at_ms=sampled_at
                )
            except probe.ClockViolation:
                return
            link.jitter = probe.update_jitter(link.jitter, sample, link.latest_sample)
            link.prev_sample = link.latest_sample
            link.latest_sample = sample

    def _on_control_datagram(self, data: bytes, addr: tuple) -> None:
        try:
            msg = json.loads(data.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            return
        if msg.get("mm") != "hs":
            return
        peer_id = msg.get("from", "")
        kind = msg.get("t", "")
        if not peer_id or peer_id == self.config.client_id:
            return
        link = self._ensure_link(peer_id)
        with self._lock:
            if link.remote_addr != (addr[0], addr[1]):
                if link.remote_addr:
                    self._addr_to_peer.pop(link.remote_addr, None)
                link.remote_addr = (addr[0], addr[1])
                self._addr_to_peer[link.remote_addr] = peer_id
        if kind == "hello":
            self._send_control(link, "hello-ack")
        elif kind == "hello-ack":
            self._send_control(link, "ack")
            self._mark_established(link)
        elif kind == "ack":
            self._mark_established(link)

    def _mark_established(self, link: PeerLink) -> None:
        with self._lock:
            if link.state != "established":
                link.state = "established"

    def _send_control(self, link: PeerLink, kind: str) -> None:
        if link.remote_addr is None or self.sock is None:
            return
        data = json.dumps({"mm": "hs", "t": kind, "from": self.config.client_id}).encode("utf-8")
        try:
            self.sock.sendto(data, link.remote_addr)
        except OSError:
            pass

    # --- periodic loops --------------------------------------------------------

    def _send_loop(self) -> None:
        interval_s = self.config.send_interval_ms / 1000.0
        next_probe = time.monotonic()
        while self._running.is_set():
            now = time.monotonic()
            self._handshake_maintenance(now)
            if now >= next_probe:
                self._send_probes()
                while next_probe <= now:
                    next_probe += interval_s
            time.sleep(min(0.05, max(next_probe - time.monotonic(), 0.001)))

    def _handshake_maintenance(self, now: float) -> None:
        with self._lock:
            links = list(self.links.values())
        for link in links:
            if link.state != "connecting":
                continue
            if now - link.created_at > self.config.handshake_deadline_s:
                with self._lock:
                    if link.state == "connecting":
                        link.state = "failed"
                continue
            if link.remote_addr and now - link.last_hello_at >= HELLO_RESEND_S:
                if link.hellos_sent < self.config.handshake_retransmits:
                    link.last_hello_at = now
                    link.hellos_sent += 1
                    self._send_control(link, "hello")

    def _send_probes(self) -> None:
        with self._lock:
            targets = [
                link for link in self.links.values()
                if link.state == "established" and link.remote_addr
            ]
        for link in targets:
            seq = link.seq.next()
            data = probe.encode_request(
                probe.ProbeRequest(seq=seq, send_ts_us=probe.monotonic_us()),
                self.config.payload_size,
            )
            try:
                self.sock.sendto(data, link.remote_addr)
            except OSError:
                continue
            with self._lock:
                link.probes_sent += 1
                link.bytes_sent_interval += len(data)

    def _report_loop(self) -> None:
        # ticks run half an interval out of phase with the probe
        # schedule, so a tick never races the sample its probe produced
        interval_s = self.config.stats_interval_ms / 1000.0
        next_tick = time.monotonic() + 1.5 * interval_s
        while self._running.is_set():
            now = time.monotonic()
            if now >= next_tick:
                records = self.measurement_tick()
                self._enqueue_and_post(records)
                while next_tick <= now:
                    next_tick += interval_s
            time.sleep(min(0.05, max(next_tick - time.monotonic(), 0.001)))

    def measurement_tick(self, now_ms: Optional[int] = None) -> list[dict]:
        """Build one record per established link with a fresh sample."""
        if now_ms is None:
            now_ms = probe.unix_ms()
        records: list[dict] = []
        with self._lock:
            for link in self.links.values():
                if link.state != "established" or link.latest_sample is None:
                    continue
                if link.latest_sample.seq <= link.reported_seq:
                    continue
                record = make_record(
                    your_id=self.config.client_id,
                    peer_id=link.peer_id,
                    rtt_ms=link.latest_sample.rtt_ms,
                    date_ms=now_ms,
                    your_isp=self.ip_info["isp"],
                    your_ip=self.ip_info["ip"],
                    **{BYTES_SENT_KEY: link.bytes_sent_interval},
                )
                validate_record(record)
                records.append(record)
                link.reported_seq = link.latest_sample.seq
                link.bytes_sent_interval = 0
        for record in records:
            self._append_local_log(record)
        return records

    def _append_local_log(self, record: dict) -> None:
        self.records_logged += 1
        if self.capture_records:
            self.captured_records.append(record)
        if self._log_fh:
            self._log_fh.write(json.dumps(record, separators=(",", ":")) + "\n")
            self._log_fh.flush()

    def _enqueue_and_post(self, records: list[dict]) -> None:
        for record in records:
            if len(self._retry_queue) >= self.config.retry_queue_limit:
                self._retry_queue.popleft()
                self.records_dropped += 1
            self._retry_queue.append(record)
        self._drain_retry_queue()

    def _drain_retry_queue(self) -> None:
        with self._post_lock:
            while self._retry_queue:
                if not self._post_record(self._retry_queue[0]):
                    return
                self._retry_queue.popleft()
                self.records_posted += 1

    def _flush_retry_queue(self) -> None:
        self._drain_retry_queue()
        self._collector.close()

    def _post_record(self, record: dict) -> bool:
        return self._collector.post(record)


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="meshmeter-agent",
        description="Headless mesh measurement agent (1 Hz probe/report loops).",
    )
    parser.add_argument("--signaling", required=True, help="signaling server host:port")
    parser.add_argument("--session", required=True)
    parser.add_argument("--id", required=True, help="client id")
    parser.add_argument("--collector", required=True, help="collector base URL")
    parser.add_argument("--payload-size", type=int, default=probe.DEFAULT_PAYLOAD_SIZE)
    parser.add_argument("--send-interval-ms", type=int, default=1000)
    parser.add_argument("--stats-interval-ms", type=int, default=1000)
    parser.add_argument("--duration-s", type=float, default=None)
    parser.add_argument("--ip-lookup", choices=("live", "stub", "off"), default="off")
    parser.add_argument("--log-path", default=None)
    parser.add_argument("--bind-host", default="0.0.0.0")
    parser.add_argument("--bind-port", type=int, default=0)
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")
    config = AgentConfig(
        signaling_url=args.signaling,
        session_id=args.session,
        client_id=args.id,
        collector_url=args.collector,
        payload_size=args.payload_size,
        send_interval_ms=args.send_interval_ms,
        stats_interval_ms=args.stats_interval_ms,
        duration_s=args.duration_s,
        ip_lookup=args.ip_lookup,
        log_path=args.log_path,
        bind_host=args.bind_host,
        bind_port=args.bind_port,
    )
    agent = Agent(config)
    try:
        agent.start()
    except SignalingUnreachable as exc:
        print(f"error: {exc}")
        return 1
    links = agent.establish_mesh()
    established = sum(1 for l in links.values() if l.state == "established")
    print(f"{config.client_id}: {established}/{len(links)} peer links established")
    try:
        agent.run()
    except KeyboardInterrupt:
        agent.stop()
    print(
        f"{config.client_id}: posted {agent.records_posted} records "
        f"(logged {agent.records_logged}, dropped {agent.records_dropped})"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
