#!/usr/bin/env python3
"""Run the standard link-validation scenarios and render the report.

Covers constant forward delays of 0, 10, and 100 ms plus the 30 ms
constant + 30 ms bounded-jitter case, 500 probes each under the
virtual clock. Pass --out to choose the output directory.
"""

from __future__ import annotations

import argparse
import json
import tempfile
from pathlib import Path

from meshmeter import linklab

SCENARIOS = [
    {"name": "0ms", "link": {"forward_delay_ms": 0.0, "seed": 101}, "n_probes": 500},
    {"name": "10ms", "link": {"forward_delay_ms": 10.0, "seed": 102}, "n_probes": 500},
    {"name": "100ms", "link": {"forward_delay_ms": 100.0, "seed": 103}, "n_probes": 500},
    {
        "name": "30ms+jitter30",
        "link": {"forward_delay_ms": 30.0, "forward_jitter_ms": 30.0, "seed": 104},
        "n_probes": 500,
    },
]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="validation-out")
    args = parser.parse_args()

    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
        json.dump(SCENARIOS, fh)
        scenario_path = fh.name
    rc = linklab.main(["--scenario", scenario_path, "--out", args.out])
    Path(scenario_path).unlink(missing_ok=True)
    return rc


if __name__ == "__main__":
    raise SystemExit(main())
