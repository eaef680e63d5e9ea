"""End-to-end tests for the report and linklab command lines."""

from __future__ import annotations

import json

import pytest

from meshmeter import analysis, linklab
from meshmeter.collector import CollectorServer
from meshmeter.records import make_record
from meshmeter.render import parse_heatmap_csv


def write_records(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r) + "\n")


@pytest.fixture()
def sample_records():
    records = []
    for i in range(20):
        records.append(make_record("a", "b", 10.0 + i * 0.1, 1_700_000_000_000 + i))
        records.append(make_record("b", "a", 70.0, 1_700_000_000_000 + i))
        records.append(make_record("a", "c", 30.0, 1_700_000_000_000 + i))
    return records


class TestReportCli:
    EXPECTED_FILES = (
        "histogram.csv",
        "histogram.svg",
        "heatmap_mean.svg",
        "heatmap_mean.csv",
        "heatmap_p99.svg",
        "heatmap_p99.csv",
        "mesh_report.json",
    )

    def test_file_input_produces_all_artifacts(self, tmp_path, sample_records) -> None:
        src = tmp_path / "export.ndjson"
        write_records(src, sample_records)
        out = tmp_path / "out"
        rc = analysis.main(["--input", str(src), "--out", str(out)])
        assert rc == 0
        for name in self.EXPECTED_FILES:
            assert (out / name).is_file(), name
        matrix = parse_heatmap_csv((out / "heatmap_mean.csv").read_text())
        assert matrix[("b", "a")] == 70.0
        report = json.loads((out / "mesh_report.json").read_text())
        assert report["expected_directed_pairs"] == 6
        assert report["observed_pairs"] == 3
        assert ["a", "c"] in report["asymmetric_pairs"]

    def test_collector_url_input(self, tmp_path, sample_records) -> None:
        server = CollectorServer(tmp_path / "data", host="127.0.0.1", port=0)
        server.start()
        try:
            for r in sample_records:
                server.store.ingest(r)
            out = tmp_path / "out"
            rc = analysis.main(["--input", server.url, "--out", str(out)])
            assert rc == 0
            assert (out / "histogram.csv").is_file()
        finally:
            server.stop()

    def test_node_order_file(self, tmp_path, sample_records) -> None:
        src = tmp_path / "export.ndjson"
        write_records(src, sample_records)
        order = tmp_path / "order.txt"
        order.write_text("c\nb\na\n")
        out = tmp_path / "out"
        analysis.main(["--input", str(src), "--out", str(out), "--order", str(order)])
        header = (out / "heatmap_mean.csv").read_text().splitlines()[0]
        assert header == ",c,b,a"

    def test_custom_threshold(self, tmp_path, sample_records) -> None:
        src = tmp_path / "export.ndjson"
        write_records(src, sample_records)
        out = tmp_path / "out"
        analysis.main(["--input", str(src), "--out", str(out), "--threshold-ms", "25"])
        svg = (out / "heatmap_mean.svg").read_text()
        from meshmeter.render import RED

        # 30 ms and 70 ms pairs both exceed a 25 ms threshold
        assert svg.count(f'fill="{RED}"') == 2


class TestLinklabCli:
    def test_scenario_file_outputs(self, tmp_path) -> None:
        scenario = [
            {"name": "0ms", "link": {"seed": 1}, "n_probes": 50},
            {"name": "10ms", "link": {"forward_delay_ms": 10.0, "seed": 2}, "n_probes": 50},
            {
                "name": "jitter",
                "link": {"forward_delay_ms": 30.0, "forward_jitter_ms": 30.0, "seed": 3},
                "n_probes": 50,
            },
        ]
        scenario_path = tmp_path / "scenario.json"
        scenario_path.write_text(json.dumps(scenario))
        out = tmp_path / "out"
        rc = linklab.main(["--scenario", str(scenario_path), "--out", str(out)])
        assert rc == 0
        for name in ("validation.csv", "validation.txt", "boxplot.svg", "groundtruth.ndjson"):
            assert (out / name).is_file(), name
        csv_lines = (out / "validation.csv").read_text().splitlines()
        assert len(csv_lines) == 4
        assert [line.split(",")[0] for line in csv_lines[1:]] == ["0ms", "10ms", "jitter"]
        truth_entries = [
            json.loads(line) for line in (out / "groundtruth.ndjson").read_text().splitlines()
        ]
        assert {e["scenario"] for e in truth_entries} == {"0ms", "10ms", "jitter"}
        ten_ms = [e for e in truth_entries if e["scenario"] == "10ms" and e["direction"] == "forward"]
        assert all(e["injected_delay_ms"] == 10.0 for e in ten_ms)
