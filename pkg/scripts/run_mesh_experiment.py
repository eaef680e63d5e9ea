#!/usr/bin/env python3
"""Run the desk-scale mesh experiment and render its analysis artifacts.

Brings up signaling, collector, and N loopback agents with shaped
per-pair delays, runs for the requested duration at 1 Hz, then writes
the record export, heatmaps, histogram, and mesh report to --out.
"""

from __future__ import annotations

import argparse
import json
import string
from pathlib import Path

from meshmeter import analysis, render
from meshmeter.deskmesh import DEFAULT_PAIR_DELAYS_MS, pair_delay_table, run_desk_mesh


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--nodes", type=int, default=5)
    parser.add_argument("--duration-s", type=float, default=120.0)
    parser.add_argument(
        "--delays",
        default=",".join(f"{d:g}" for d in DEFAULT_PAIR_DELAYS_MS),
        help="comma-separated per-pair RTT delays in ms, cycled over pairs",
    )
    parser.add_argument("--out", default="meshlab-out")
    args = parser.parse_args()

    node_ids = list(string.ascii_lowercase[: args.nodes])
    delays = [float(v) for v in args.delays.split(",")]
    table = pair_delay_table(node_ids, delays)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    print(f"running {args.nodes}-agent mesh for {args.duration_s:g} s ...")
    result = run_desk_mesh(
        node_ids=node_ids,
        pair_delays_ms=table,
        duration_s=args.duration_s,
        data_dir=out_dir / "collector-data",
    )
    print(f"collected {len(result.records)} records; links {result.established_links}")

    with (out_dir / "records.ndjson").open("w", encoding="utf-8") as fh:
        for record in result.records:
            fh.write(json.dumps(record) + "\n")

    stats = analysis.pair_stats(result.records)
    hist = analysis.histogram(result.records)
    (out_dir / "histogram.csv").write_text(render.histogram_csv(hist), encoding="utf-8")
    (out_dir / "histogram.svg").write_text(render.histogram_svg(hist), encoding="utf-8")
    for metric in ("mean", "p99"):
        svg, csv_text = render.render_heatmap(stats, metric, node_ids)
        (out_dir / f"heatmap_{metric}.svg").write_text(svg, encoding="utf-8")
        (out_dir / f"heatmap_{metric}.csv").write_text(csv_text, encoding="utf-8")
    report = analysis.mesh_report(result.records, node_ids)
    (out_dir / "mesh_report.json").write_text(
        json.dumps(report.to_json(), indent=2) + "\n", encoding="utf-8"
    )

    for pair, target in sorted(result.expected_rtt_ms.items()):
        mean = stats[pair].mean_ms if pair in stats else float("nan")
        print(f"  {pair[0]}->{pair[1]}: configured {target:5.1f} ms, measured mean {mean:6.2f} ms")
    print(f"artifacts in {out_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
