"""Desk-scale mesh experiment: live agents on loopback with shaped links.

Brings up a signaling server, a collector, and N agents in one process,
gives every undirected pair a configured round-trip delay (injected on
the probe-request path; responses return undelayed, so the full value
shows up once per round trip), runs the mesh for a fixed duration, and
returns the collected records together with the expected per-pair RTT
table, which serves as the oracle for the analysis outputs.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .agent import Agent, AgentConfig
from .collector import CollectorServer
from .linklab import DelayScheduler, ShapedSocket
from .signaling import SignalingServer

DEFAULT_PAIR_DELAYS_MS = (5.0, 15.0, 25.0, 35.0, 65.0)


def pair_delay_table(
    node_ids: Sequence[str], delays_ms: Sequence[float] = DEFAULT_PAIR_DELAYS_MS
) -> dict[tuple[str, str], float]:
    """Assign each undirected pair (lexicographic order) a delay, cycling."""
    ids = sorted(node_ids)
    table: dict[tuple[str, str], float] = {}
    k = 0
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            table[(a, b)] = float(delays_ms[k % len(delays_ms)])
            k += 1
    return table


def directed_expectations(table: dict[tuple[str, str], float]) -> dict[tuple[str, str], float]:
    out: dict[tuple[str, str], float] = {}
    for (a, b), rtt in table.items():
        out[(a, b)] = rtt
        out[(b, a)] = rtt
    return out


@dataclass
class DeskMeshResult:
    records: list[dict]
    expected_rtt_ms: dict[tuple[str, str], float]
    established_links: dict[str, int]
    duration_s: float


def run_desk_mesh(
    node_ids: Sequence[str],
    pair_delays_ms: dict[tuple[str, str], float],
    duration_s: float,
    data_dir: str | Path,
    send_interval_ms: int = 1000,
    stats_interval_ms: int = 1000,
    session_id: str = "deskmesh",
    blackhole_pairs: Optional[set[tuple[str, str]]] = None,
    handshake_deadline_s: float = 10.0,
) -> DeskMeshResult:
    """Run the loopback mesh and export everything the collector stored.

    pair_delays_ms maps undirected pairs (a, b) with a < b to the target
    round-trip delay. blackhole_pairs lists directed (from, to) pairs
    whose outbound datagrams are silently dropped.
    """
    node_ids = sorted(node_ids)
    signaling = SignalingServer(host="127.0.0.1", port=0)
    signaling.start()
    collector = CollectorServer(data_dir, host="127.0.0.1", port=0)
    collector.start()
    scheduler = DelayScheduler()
    agents: list[Agent] = []
    # many loops share one interpreter here; the default 5 ms GIL switch
    # interval adds visible tail latency to millisecond-scale delays
    old_switch_interval = sys.getswitchinterval()
    sys.setswitchinterval(0.001)
    try:
        sockets = {nid: ShapedSocket(scheduler) for nid in node_ids}
        for sock in sockets.values():
            sock.bind(("127.0.0.1", 0))
        ports = {nid: sockets[nid].getsockname()[1] for nid in node_ids}
        for (a, b), rtt in pair_delays_ms.items():
            sockets[a].delay_plan[ports[b]] = rtt
            sockets[b].delay_plan[ports[a]] = rtt
        for a, b in blackhole_pairs or ():
            sockets[a].blackholes.add(ports[b])

        for nid in node_ids:
            config = AgentConfig(
                signaling_url=f"127.0.0.1:{signaling.port}",
                session_id=session_id,
                client_id=nid,
                collector_url=collector.url,
                send_interval_ms=send_interval_ms,
                stats_interval_ms=stats_interval_ms,
                handshake_deadline_s=handshake_deadline_s,
            )
            agent = Agent(config, socket_factory=lambda s=sockets[nid]: s)
            agents.append(agent)
            agent.start()

        established: dict[str, int] = {}
        for agent in agents:
            links = agent.establish_mesh(timeout_s=handshake_deadline_s + 2.0)
            established[agent.config.client_id] = sum(
                1 for l in links.values() if l.state == "established"
            )

        started = time.monotonic()
        time.sleep(duration_s)
        elapsed = time.monotonic() - started
    finally:
        sys.setswitchinterval(old_switch_interval)
        for agent in agents:
            agent.stop()
        scheduler.stop()
        signaling.stop()
        records = list(collector.store.export())
        collector.stop()

    return DeskMeshResult(
        records=records,
        expected_rtt_ms=directed_expectations(pair_delays_ms),
        established_links=established,
        duration_s=elapsed,
    )
