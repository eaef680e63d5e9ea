"""Measurement record collector: ingest API and append-only persistence.

Records are appended to newline-delimited JSON segments, one file per
UTC day, each line an envelope::

    {"index": N, "received_at_ms": ..., "record": {...original record...}}

The index is server-assigned and strictly increasing across segments;
appends are serialized through a single writer lock and flushed per
record. Export replays the segments in index order and yields the
original records exactly as ingested (unknown keys preserved). The
store is append-only: duplicate submissions are stored twice.

HTTP surface:
    POST /api/v1/records        -> 201 {"index": N} | 400 on bad input
    GET  /api/v1/records?from_ms=&to_ms=&reporter=  -> NDJSON stream
    GET  /ui, /ui/<file>        -> static participant page, if present
"""

from __future__ import annotations

import argparse
import json
import threading
import time
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Iterator, Optional, Sequence
from urllib.parse import parse_qs, urlparse

from .records import Malformed, SchemaViolation, validate_record

DEFAULT_PORT = 7402

_UI_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".svg": "image/svg+xml",
}


class RecordStore:
    """Append-only NDJSON record log segmented by UTC day."""

    def __init__(self, data_dir: str | Path) -> None:
        self._dir = Path(data_dir)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._next_index = self._recover_next_index()

    def _segments(self) -> list[Path]:
        return sorted(self._dir.glob("records-*.ndjson"))

    def _recover_next_index(self) -> int:
        last = 0
        segments = self._segments()
        if segments:
            for line in segments[-1].read_text(encoding="utf-8").splitlines():
                line = line.strip()
                if line:
                    last = json.loads(line)["index"]
        return last + 1

    def ingest(self, record: dict, received_at_ms: Optional[int] = None) -> int:
        """Validate and durably append one record; returns its index."""
        validate_record(record)
        if received_at_ms is None:
            received_at_ms = time.time_ns() // 1_000_000
        day = datetime.fromtimestamp(received_at_ms / 1000.0, tz=timezone.utc)
        segment = self._dir / f"records-{day.strftime('%Y%m%d')}.ndjson"
        with self._lock:
            index = self._next_index
            self._next_index += 1
            envelope = {"index": index, "received_at_ms": received_at_ms, "record": record}
            with segment.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(envelope, separators=(",", ":")) + "\n")
                fh.flush()
        return index

    def export(
        self,
        from_ms: Optional[int] = None,
        to_ms: Optional[int] = None,
        reporter: Optional[str] = None,
    ) -> Iterator[dict]:
        """Yield matching records in index order.

        The time range filters on the record's Date field, inclusive on
        both ends. An empty result is valid.
        """
        for segment in self._segments():
            with segment.open("r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        record = json.loads(line)["record"]
                    except (json.JSONDecodeError, KeyError):
                        break  # torn tail of the active segment mid-append
                    date = record.get("Date")
                    if from_ms is not None and date < from_ms:
                        continue
                    if to_ms is not None and date > to_ms:
                        continue
                    if reporter is not None and record.get("yourID") != reporter:
                        continue
                    yield record

    def count(self) -> int:
        return sum(1 for _ in self.export())


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "meshmeter-collector"

    # set by CollectorServer
    store: RecordStore
    ui_dir: Optional[Path]

    def log_message(self, fmt: str, *args) -> None:  # quiet by default
        pass

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self) -> None:
        if urlparse(self.path).path != "/api/v1/records":
            self._send_json(404, {"error": "NotFound"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            body = self.rfile.read(length)
            obj = json.loads(body)
        except (ValueError, json.JSONDecodeError):
            self._send_json(400, {"error": "Malformed", "message": "body is not valid JSON"})
            return
        try:
            index = self.store.ingest(obj)
        except SchemaViolation as exc:
            self._send_json(400, {"error": "SchemaViolation", "field": exc.field, "message": str(exc)})
            return
        except Malformed as exc:
            self._send_json(400, {"error": "Malformed", "message": str(exc)})
            return
        self._send_json(201, {"index": index})

    def do_GET(self) -> None:
        url = urlparse(self.path)
        if url.path == "/api/v1/records":
            self._export(url.query)
        elif url.path == "/ui" or url.path.startswith("/ui/"):
            self._serve_ui(url.path)
        else:
            self._send_json(404, {"error": "NotFound"})

    def _export(self, query: str) -> None:
        params = parse_qs(query)

        def int_param(name: str) -> Optional[int]:
            return int(params[name][0]) if name in params else None

        reporter = params["reporter"][0] if "reporter" in params else None
        lines = [
            json.dumps(record, separators=(",", ":"))
            for record in self.store.export(
                from_ms=int_param("from_ms"), to_ms=int_param("to_ms"), reporter=reporter
            )
        ]
        body = ("\n".join(lines) + "\n").encode("utf-8") if lines else b""
        self.send_response(200)
        self.send_header("Content-Type", "application/x-ndjson")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _serve_ui(self, path: str) -> None:
        if self.ui_dir is None:
            self._send_json(404, {"error": "NoUI", "message": "participant page not installed"})
            return
        rel = path[len("/ui") :].lstrip("/") or "index.html"
        target = (self.ui_dir / rel).resolve()
        if self.ui_dir.resolve() not in target.parents and target != self.ui_dir.resolve():
            self._send_json(404, {"error": "NotFound"})
            return
        if not target.is_file():
            self._send_json(404, {"error": "NotFound"})
            return
        body = target.read_bytes()
        self.send_response(200)
        self.send_header(
            "Content-Type", _UI_CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        )
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class CollectorServer:
    """Threaded HTTP server wrapping a RecordStore."""

    def __init__(
        self,
        data_dir: str | Path,
        host: str = "0.0.0.0",
        port: int = DEFAULT_PORT,
        ui_dir: Optional[str | Path] = None,
    ) -> None:
        self.store = RecordStore(data_dir)
        handler = type("BoundHandler", (_Handler,), {
            "store": self.store,
            "ui_dir": Path(ui_dir) if ui_dir else None,
        })
        self._httpd = ThreadingHTTPServer((host, port), handler)
        self._httpd.daemon_threads = True
        self._thread: Optional[threading.Thread] = None

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def url(self) -> str:
        host = self._httpd.server_address[0]
        if host == "0.0.0.0":
            host = "127.0.0.1"
        return f"http://{host}:{self.port}"

    def start(self) -> None:
        self._thread = threading.Thread(
            target=self._httpd.serve_forever, name="collector-http", daemon=True
        )
        self._thread.start()

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="meshmeter-collector",
        description="Measurement record collector (ingest API + NDJSON persistence).",
    )
    parser.add_argument("--port", type=int, default=DEFAULT_PORT)
    parser.add_argument("--host", default="0.0.0.0")
    parser.add_argument("--data-dir", required=True)
    parser.add_argument("--ui-dir", help="directory with the built participant page (served at /ui)")
    args = parser.parse_args(argv)

    server = CollectorServer(args.data_dir, host=args.host, port=args.port, ui_dir=args.ui_dir)
    print(f"collector listening on {args.host}:{server.port}, data dir {args.data_dir}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.stop()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
