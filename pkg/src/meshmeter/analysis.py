"""Offline aggregation of measurement records.

Per-pair statistics are always directed: the (reporter, peer) stream and
its reverse are separate series and are never averaged together. The
percentile is nearest-rank (sorted sample at rank ceil(p/100 * n)),
which is exactly reproducible across implementations.
"""

from __future__ import annotations

import json
import math
import sys
import urllib.request
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

DEFAULT_THRESHOLD_MS = 60.0

# Coarse distribution bins, lower-inclusive: [0,60), [60,100), [100,inf)
COARSE_BIN_EDGES = (60.0, 100.0)
COARSE_BIN_LABELS = ("0-60", "60-100", "100+")


class EmptyInput(ValueError):
    """Percentile of an empty sample list is undefined."""


class UnknownNode(KeyError):
    """Stats reference a node id missing from the requested node order."""


def percentile(samples: Sequence[float], p: float) -> float:
    """Nearest-rank percentile: sorted sample at rank ceil(p/100 * n), 1-based.

    The rank is computed with exact rational arithmetic so that e.g.
    p=55, n=20 yields rank 11, not 12 via binary rounding of 0.55*20.
    """
    if not samples:
        raise EmptyInput("percentile of empty sample list")
    ordered = sorted(samples)
    rank = math.ceil(Fraction(p) * len(ordered) / 100)
    rank = min(max(rank, 1), len(ordered))
    return ordered[rank - 1]


@dataclass(frozen=True)
class Histogram:
    """RTT distribution: coarse report bins plus 1 ms bins for plotting."""

    total: int
    coarse_counts: tuple[int, int, int]
    fine_counts: dict[int, int]  # bin i covers [i, i+1) ms

    @property
    def fractions(self) -> tuple[float, float, float]:
        if self.total == 0:
            return (0.0, 0.0, 0.0)
        return tuple(c / self.total for c in self.coarse_counts)  # type: ignore[return-value]


def histogram(records: Iterable[Mapping]) -> Histogram:
    coarse = [0, 0, 0]
    fine: dict[int, int] = {}
    total = 0
    for rec in records:
        rtt = float(rec["candidatePair_RTT"])
        total += 1
        if rtt < COARSE_BIN_EDGES[0]:
            coarse[0] += 1
        elif rtt < COARSE_BIN_EDGES[1]:
            coarse[1] += 1
        else:
            coarse[2] += 1
        b = int(rtt)
        fine[b] = fine.get(b, 0) + 1
    return Histogram(total=total, coarse_counts=tuple(coarse), fine_counts=fine)  # type: ignore[arg-type]


@dataclass(frozen=True)
class PairStats:
    reporter_id: str
    peer_id: str
    n: int
    mean_ms: float
    p99_ms: float
    min_ms: float
    max_ms: float
    over_threshold_mean: bool
    over_threshold_p99: bool


def pair_stats(
    records: Iterable[Mapping],
    threshold_ms: float = DEFAULT_THRESHOLD_MS,
) -> dict[tuple[str, str], PairStats]:
    """Aggregate records into directed (reporter, peer) statistics.

    Output iteration order is deterministic: sorted by (reporter, peer).
    """
    groups: dict[tuple[str, str], list[float]] = {}
    for rec in records:
        key = (rec["yourID"], rec["peerID"])
        groups.setdefault(key, []).append(float(rec["candidatePair_RTT"]))
    out: dict[tuple[str, str], PairStats] = {}
    for key in sorted(groups):
        # summed in sorted order so results are independent of record order
        values = sorted(groups[key])
        mean = sum(values) / len(values)
        p99 = percentile(values, 99)
        out[key] = PairStats(
            reporter_id=key[0],
            peer_id=key[1],
            n=len(values),
            mean_ms=mean,
            p99_ms=p99,
            min_ms=values[0],
            max_ms=values[-1],
            over_threshold_mean=mean > threshold_ms,
            over_threshold_p99=p99 > threshold_ms,
        )
    return out


@dataclass
class MeshReport:
    """Directed-pair completeness audit over an expected node list."""

    nodes: list[str]
    expected_directed_pairs: int
    observed_pairs: int
    missing_pairs: list[tuple[str, str]]
    asymmetric_pairs: list[tuple[str, str]]
    pairs_under_threshold_mean: int
    pairs_under_threshold_p99: int
    threshold_ms: float = DEFAULT_THRESHOLD_MS

    def to_json(self) -> dict:
        return {
            "nodes": self.nodes,
            "expected_directed_pairs": self.expected_directed_pairs,
            "observed_pairs": self.observed_pairs,
            "missing_pairs": [list(p) for p in self.missing_pairs],
            "asymmetric_pairs": [list(p) for p in self.asymmetric_pairs],
            "pairs_under_threshold_mean": self.pairs_under_threshold_mean,
            "pairs_under_threshold_p99": self.pairs_under_threshold_p99,
            "threshold_ms": self.threshold_ms,
        }


def mesh_report(
    records: Iterable[Mapping],
    expected_nodes: Sequence[str],
    threshold_ms: float = DEFAULT_THRESHOLD_MS,
) -> MeshReport:
    """Classify the N(N-1) directed pairs as observed or missing.

    Asymmetric pairs are those where (a, b) was observed but (b, a) was
    not. Also counts observed pairs whose mean (and p99) stay under the
    threshold, since either reading of "capable pairs" may be wanted.
    """
    if len(expected_nodes) < 2:
        raise ValueError("expected node list must have at least 2 nodes")
    nodes = list(expected_nodes)
    node_set = set(nodes)
    stats = pair_stats(records, threshold_ms=threshold_ms)
    observed = {k for k in stats if k[0] in node_set and k[1] in node_set}
    expected = [(a, b) for a in nodes for b in nodes if a != b]
    missing = [p for p in expected if p not in observed]
    asymmetric = sorted((a, b) for (a, b) in observed if (b, a) not in observed)
    under_mean = sum(1 for k in observed if not stats[k].over_threshold_mean)
    under_p99 = sum(1 for k in observed if not stats[k].over_threshold_p99)
    return MeshReport(
        nodes=nodes,
        expected_directed_pairs=len(expected),
        observed_pairs=len(observed),
        missing_pairs=missing,
        asymmetric_pairs=asymmetric,
        pairs_under_threshold_mean=under_mean,
        pairs_under_threshold_p99=under_p99,
        threshold_ms=threshold_ms,
    )


def load_records(source: str) -> list[dict]:
    """Read newline-delimited JSON records from a file path or collector URL."""
    if source.startswith("http://") or source.startswith("https://"):
        url = source
        if "/api/" not in url:
            url = url.rstrip("/") + "/api/v1/records"
        with urllib.request.urlopen(url, timeout=30) as resp:
            text = resp.read().decode("utf-8")
    else:
        text = Path(source).read_text(encoding="utf-8")
    records = []
    for line in text.splitlines():
        line = line.strip()
        if line:
            records.append(json.loads(line))
    return records


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point for meshmeter-report: render all analysis artifacts."""
    import argparse

    from . import render

    parser = argparse.ArgumentParser(
        prog="meshmeter-report",
        description="Aggregate measurement records into histogram, heatmaps, and a mesh report.",
    )
    parser.add_argument("--input", required=True, help="export file (NDJSON) or collector URL")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--threshold-ms", type=float, default=DEFAULT_THRESHOLD_MS)
    parser.add_argument("--order", help="file with one node id per line (heatmap ordering)")
    args = parser.parse_args(argv)

    records = load_records(args.input)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.order:
        node_order = [ln.strip() for ln in Path(args.order).read_text().splitlines() if ln.strip()]
    else:
        ids = {r["yourID"] for r in records} | {r["peerID"] for r in records}
        node_order = sorted(ids)

    stats = pair_stats(records, threshold_ms=args.threshold_ms)
    hist = histogram(records)

    (out_dir / "histogram.csv").write_text(render.histogram_csv(hist), encoding="utf-8")
    (out_dir / "histogram.svg").write_text(render.histogram_svg(hist), encoding="utf-8")
    for metric in ("mean", "p99"):
        svg, csv_text = render.render_heatmap(
            stats, metric, node_order, threshold_ms=args.threshold_ms
        )
        (out_dir / f"heatmap_{metric}.svg").write_text(svg, encoding="utf-8")
        (out_dir / f"heatmap_{metric}.csv").write_text(csv_text, encoding="utf-8")

    if len(node_order) >= 2:
        report = mesh_report(records, node_order, threshold_ms=args.threshold_ms)
        (out_dir / "mesh_report.json").write_text(
            json.dumps(report.to_json(), indent=2) + "\n", encoding="utf-8"
        )
    else:
        print("mesh_report skipped: fewer than 2 nodes", file=sys.stderr)

    print(f"wrote analysis artifacts for {len(records)} records to {out_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
