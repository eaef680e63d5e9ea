"""Session signaling: rooms, rosters, and descriptor relay.

Clients hold a persistent bidirectional channel to the server carrying
JSON envelopes, one object per line over plain TCP::

    {"kind": ..., "session": ..., "from": ..., "to": ..., "payload": ...}

Envelope kinds: join, joined, peer-joined, peer-left, relay, error.
Payloads are opaque strings; server-generated payloads contain JSON
text. Blank lines are ignored and serve as client keepalives. Browsers
reach the same port through a WebSocket upgrade (one envelope per text
frame); the server pings idle WebSocket peers itself.

The server records each member's transport source address as its
observed address, which doubles as reflexive-address discovery for the
datagram path. Closing the channel, or silence past the inactivity
timeout, counts as leaving.
"""

from __future__ import annotations

import argparse
import json
import queue
import socket
import threading
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from . import ws
from .probe import unix_ms

DEFAULT_PORT = 7401
DEFAULT_CAPACITY = 16
DEFAULT_INACTIVITY_TIMEOUT_S = 30.0
WS_PING_IDLE_S = 10.0


class SignalingError(Exception):
    """Base class; `code` is the wire-visible error name."""

    code = "SignalingError"


class DuplicateClientId(SignalingError):
    code = "DuplicateClientId"


class UnknownPeer(SignalingError):
    code = "UnknownPeer"


class NotJoined(SignalingError):
    code = "NotJoined"


class SessionFull(SignalingError):
    code = "SessionFull"


class BadEnvelope(SignalingError):
    code = "BadEnvelope"


class SignalingUnreachable(SignalingError):
    code = "SignalingUnreachable"


def envelope(kind: str, session: str = "", from_: str = "", to: str = "", payload: str = "") -> dict:
    return {"kind": kind, "session": session, "from": from_, "to": to, "payload": payload}


def error_payload(exc: SignalingError) -> str:
    return json.dumps({"code": exc.code, "message": str(exc)})


@dataclass(frozen=True)
class RosterEntry:
    client_id: str
    observed_addr: str
    joined_at_ms: int

    def to_json(self) -> dict:
        return {
            "client_id": self.client_id,
            "observed_addr": self.observed_addr,
            "joined_at_ms": self.joined_at_ms,
        }


@dataclass(frozen=True)
class SessionRoster:
    session_id: str
    members: tuple[RosterEntry, ...]

    def ids(self) -> set[str]:
        return {m.client_id for m in self.members}


class _Member:
    __slots__ = ("entry", "send")

    def __init__(self, entry: RosterEntry, send: Callable[[dict], None]) -> None:
        self.entry = entry
        self.send = send


class SignalingCore:
    """Transport-agnostic session state; every mutation is serialized.

    Members register a send callback; callbacks must not block (server
    connections enqueue onto per-connection writer queues).
    """

    def __init__(self, capacity: int = DEFAULT_CAPACITY) -> None:
        self.capacity = capacity
        self._lock = threading.RLock()
        self._sessions: dict[str, dict[str, _Member]] = {}

    def join(
        self,
        session_id: str,
        client_id: str,
        observed_addr: str,
        send: Callable[[dict], None],
    ) -> SessionRoster:
        if not client_id:
            raise BadEnvelope("client_id must be nonempty")
        with self._lock:
            session = self._sessions.setdefault(session_id, {})
            if client_id in session:
                raise DuplicateClientId(f"client {client_id!r} already active in {session_id!r}")
            if len(session) >= self.capacity:
                raise SessionFull(f"session {session_id!r} at capacity {self.capacity}")
            entry = RosterEntry(client_id, observed_addr, unix_ms())
            member = _Member(entry, send)
            notice = envelope(
                "peer-joined", session_id, from_=client_id, payload=json.dumps(entry.to_json())
            )
            for other in session.values():
                self._safe_send(other, notice)
            session[client_id] = member
            return self._roster_locked(session_id)

    def leave(self, session_id: str, client_id: str) -> SessionRoster:
        with self._lock:
            session = self._sessions.get(session_id)
            if session is None or client_id not in session:
                raise NotJoined(f"client {client_id!r} not in session {session_id!r}")
            del session[client_id]
            notice = envelope(
                "peer-left", session_id, from_=client_id,
                payload=json.dumps({"client_id": client_id}),
            )
            for other in session.values():
                self._safe_send(other, notice)
            roster = self._roster_locked(session_id)
            if not session:
                del self._sessions[session_id]
            return roster

    def relay(self, session_id: str, from_id: str, to: str, payload: str) -> int:
        """Deliver the payload verbatim; returns the delivery count."""
        if not from_id or not to:
            raise BadEnvelope("relay requires non-empty from and to")
        with self._lock:
            session = self._sessions.get(session_id)
            if session is None or from_id not in session:
                raise NotJoined(f"sender {from_id!r} not in session {session_id!r}")
            env = envelope("relay", session_id, from_=from_id, to=to, payload=payload)
            if to == "*":
                targets = [m for cid, m in session.items() if cid != from_id]
            else:
                if to not in session:
                    raise UnknownPeer(f"peer {to!r} not in session {session_id!r}")
                targets = [session[to]]
            for member in targets:
                self._safe_send(member, env)
            return len(targets)

    def roster(self, session_id: str) -> SessionRoster:
        with self._lock:
            return self._roster_locked(session_id)

    def _roster_locked(self, session_id: str) -> SessionRoster:
        session = self._sessions.get(session_id, {})
        members = tuple(sorted((m.entry for m in session.values()), key=lambda e: e.client_id))
        return SessionRoster(session_id=session_id, members=members)

    @staticmethod
    def _safe_send(member: _Member, env: dict) -> None:
        try:
            member.send(env)
        except Exception:
            pass  # dead channel; its own cleanup will run leave()


class _Connection:
    """One client channel: newline-JSON or WebSocket after upgrade."""

    def __init__(self, server: "SignalingServer", sock: socket.socket, addr: tuple) -> None:
        self.server = server
        self.sock = sock
        self.observed_addr = f"{addr[0]}:{addr[1]}"
        self.rfile = sock.makefile("rb")
        self.outq: "queue.Queue[Optional[dict]]" = queue.Queue()
        self.mode = "nl"
        self.session_id: Optional[str] = None
        self.client_id: Optional[str] = None
        self.last_activity = time.monotonic()
        self.last_ping = time.monotonic()
        self._send_lock = threading.Lock()
        self._closed = False

    # --- outbound -------------------------------------------------------

    def enqueue(self, env: dict) -> None:
        self.outq.put(env)

    def _writer_loop(self) -> None:
        while True:
            env = self.outq.get()
            if env is None:
                return
            data = json.dumps(env, separators=(",", ":")).encode("utf-8")
            try:
                with self._send_lock:
                    if self.mode == "ws":
                        self.sock.sendall(ws.encode_frame(ws.OP_TEXT, data))
                    else:
                        self.sock.sendall(data + b"\n")
            except OSError:
                return

    def send_ws_ping(self) -> None:
        try:
            with self._send_lock:
                self.sock.sendall(ws.encode_frame(ws.OP_PING, b"ka"))
        except OSError:
            pass

    # --- inbound --------------------------------------------------------

    def run(self) -> None:
        writer = threading.Thread(target=self._writer_loop, name="signal-writer", daemon=True)
        writer.start()
        try:
            first = self.rfile.readline()
            if not first:
                return
            self.last_activity = time.monotonic()
            if first.startswith(b"GET "):
                self._run_websocket()
            else:
                self._handle_line(first)
                self._run_newline()
        except (OSError, ValueError, ws.WsError):
            pass
        finally:
            self.close()
            self.outq.put(None)

    def _run_newline(self) -> None:
        while True:
            line = self.rfile.readline()
            if not line:
                return
            self.last_activity = time.monotonic()
            self._handle_line(line)

    def _handle_line(self, line: bytes) -> None:
        text = line.strip()
        if not text:
            return  # keepalive
        try:
            env = json.loads(text)
        except json.JSONDecodeError:
            self.enqueue(envelope("error", payload=error_payload(BadEnvelope("invalid JSON"))))
            return
        self._dispatch(env)

    def _run_websocket(self) -> None:
        headers = ws.parse_upgrade_headers(self.rfile)
        key = ws.websocket_key(headers)
        if key is None:
            self.sock.sendall(b"HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\n\r\n")
            return
        with self._send_lock:
            self.sock.sendall(ws.handshake_response(key))
            self.mode = "ws"
        while True:
            opcode, payload = ws.read_message(self.rfile)
            self.last_activity = time.monotonic()
            if opcode == ws.OP_CLOSE:
                with self._send_lock:
                    try:
                        self.sock.sendall(ws.encode_frame(ws.OP_CLOSE, payload[:2]))
                    except OSError:
                        pass
                return
            if opcode == ws.OP_PING:
                with self._send_lock:
                    self.sock.sendall(ws.encode_frame(ws.OP_PONG, payload))
                continue
            if opcode == ws.OP_PONG:
                continue
            if opcode in (ws.OP_TEXT, ws.OP_BINARY):
                self._handle_line(payload)

    # --- envelope dispatch ----------------------------------------------

    def _dispatch(self, env: dict) -> None:
        kind = env.get("kind", "")
        try:
            if kind == "join":
                self._on_join(env)
            elif kind == "relay":
                self._on_relay(env)
            else:
                raise BadEnvelope(f"unsupported client envelope kind {kind!r}")
        except SignalingError as exc:
            self.enqueue(
                envelope("error", env.get("session", ""), to=env.get("from", ""),
                         payload=error_payload(exc))
            )

    def _on_join(self, env: dict) -> None:
        if self.client_id is not None:
            raise BadEnvelope("connection already joined")
        session_id = env.get("session", "")
        client_id = env.get("from", "")
        roster = self.server.core.join(session_id, client_id, self.observed_addr, self.enqueue)
        self.session_id = session_id
        self.client_id = client_id
        self.enqueue(
            envelope(
                "joined", session_id, to=client_id,
                payload=json.dumps({"members": [m.to_json() for m in roster.members]}),
            )
        )

    def _on_relay(self, env: dict) -> None:
        if self.client_id is None:
            raise NotJoined("relay before join")
        if env.get("from", "") != self.client_id:
            raise BadEnvelope("relay 'from' must match the joined client id")
        payload = env.get("payload", "")
        if not isinstance(payload, str):
            raise BadEnvelope("relay payload must be a string")
        self.server.core.relay(self.session_id or "", self.client_id, env.get("to", ""), payload)

    # --- teardown ---------------------------------------------------------

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        if self.client_id is not None and self.session_id is not None:
            try:
                self.server.core.leave(self.session_id, self.client_id)
            except NotJoined:
                pass
        try:
            self.rfile.close()
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass
        self.server._forget(self)

    def kill(self) -> None:
        """Force-close the socket; the reader thread then runs cleanup."""
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass


class SignalingServer:
    """TCP signaling server; one reader/writer thread pair per client."""

    def __init__(
        self,
        host: str = "0.0.0.0",
        port: int = DEFAULT_PORT,
        capacity: int = DEFAULT_CAPACITY,
        inactivity_timeout_s: float = DEFAULT_INACTIVITY_TIMEOUT_S,
    ) -> None:
        self.core = SignalingCore(capacity=capacity)
        self.inactivity_timeout_s = inactivity_timeout_s
        self._listener = socket.create_server((host, port), reuse_port=False)
        self._connections: set[_Connection] = set()
        self._conn_lock = threading.Lock()
        self._stopping = threading.Event()
        self._threads: list[threading.Thread] = []

    @property
    def port(self) -> int:
        return self._listener.getsockname()[1]

    def start(self) -> None:
        for target, name in ((self._accept_loop, "signal-accept"), (self._monitor_loop, "signal-monitor")):
            t = threading.Thread(target=target, name=name, daemon=True)
            t.start()
            self._threads.append(t)

    def serve_forever(self) -> None:
        self.start()
        self._stopping.wait()

    def stop(self) -> None:
        self._stopping.set()
        try:
            self._listener.close()
        except OSError:
            pass
        with self._conn_lock:
            conns = list(self._connections)
        for conn in conns:
            conn.kill()

    def _accept_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                sock, addr = self._listener.accept()
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            conn = _Connection(self, sock, addr)
            with self._conn_lock:
                self._connections.add(conn)
            threading.Thread(target=conn.run, name="signal-reader", daemon=True).start()

    def _monitor_loop(self) -> None:
        while not self._stopping.wait(1.0):
            now = time.monotonic()
            with self._conn_lock:
                conns = list(self._connections)
            for conn in conns:
                idle = now - conn.last_activity
                if idle > self.inactivity_timeout_s:
                    conn.kill()
                elif conn.mode == "ws" and idle > WS_PING_IDLE_S and now - conn.last_ping > WS_PING_IDLE_S:
                    conn.last_ping = now
                    conn.send_ws_ping()

    def _forget(self, conn: _Connection) -> None:
        with self._conn_lock:
            self._connections.discard(conn)


class SignalingClient:
    """Newline-JSON client channel; maintains a local roster mirror."""

    def __init__(
        self,
        host: str,
        port: int,
        connect_timeout_s: float = 5.0,
        keepalive_s: float = 10.0,
    ) -> None:
        try:
            self._sock = socket.create_connection((host, port), timeout=connect_timeout_s)
        except OSError as exc:
            raise SignalingUnreachable(f"cannot connect to {host}:{port}: {exc}") from exc
        self._sock.settimeout(None)
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._rfile = self._sock.makefile("rb")
        self._write_lock = threading.Lock()
        self._keepalive_s = keepalive_s
        self._closed = threading.Event()
        self.session_id: Optional[str] = None
        self.client_id: Optional[str] = None
        self.local_roster: dict[str, RosterEntry] = {}
        self._roster_lock = threading.Lock()
        self._join_result: "queue.Queue[dict]" = queue.Queue()
        self.on_peer_joined: Optional[Callable[[RosterEntry], None]] = None
        self.on_peer_left: Optional[Callable[[str], None]] = None
        self.on_relay: Optional[Callable[[str, str], None]] = None
        self.on_error: Optional[Callable[[str, str], None]] = None
        self._reader = threading.Thread(target=self._reader_loop, name="signal-client", daemon=True)
        self._reader.start()
        self._keepalive = threading.Thread(
            target=self._keepalive_loop, name="signal-keepalive", daemon=True
        )
        self._keepalive.start()

    def _send(self, env: dict) -> None:
        data = json.dumps(env, separators=(",", ":")).encode("utf-8") + b"\n"
        with self._write_lock:
            self._sock.sendall(data)

    def join(self, session_id: str, client_id: str, timeout_s: float = 10.0) -> SessionRoster:
        self._send(envelope("join", session_id, from_=client_id))
        try:
            env = self._join_result.get(timeout=timeout_s)
        except queue.Empty:
            raise SignalingUnreachable("no join response within timeout") from None
        if env["kind"] == "error":
            info = json.loads(env.get("payload") or "{}")
            code = info.get("code", "SignalingError")
            exc_type = {
                "DuplicateClientId": DuplicateClientId,
                "SessionFull": SessionFull,
                "BadEnvelope": BadEnvelope,
            }.get(code, SignalingError)
            raise exc_type(info.get("message", "join rejected"))
        members = [
            RosterEntry(m["client_id"], m["observed_addr"], m["joined_at_ms"])
            for m in json.loads(env["payload"])["members"]
        ]
        self.session_id = session_id
        self.client_id = client_id
        with self._roster_lock:
            self.local_roster = {m.client_id: m for m in members}
        return SessionRoster(session_id=session_id, members=tuple(members))

    def relay(self, to: str, payload: str) -> None:
        if self.client_id is None:
            raise NotJoined("relay before join")
        self._send(envelope("relay", self.session_id or "", from_=self.client_id, to=to, payload=payload))

    def roster_snapshot(self) -> dict[str, RosterEntry]:
        with self._roster_lock:
            return dict(self.local_roster)

    def _reader_loop(self) -> None:
        try:
            while True:
                line = self._rfile.readline()
                if not line:
                    return
                text = line.strip()
                if not text:
                    continue
                env = json.loads(text)
                kind = env.get("kind", "")
                if kind in ("joined",) or (kind == "error" and self.client_id is None):
                    self._join_result.put(env)
                elif kind == "peer-joined":
                    info = json.loads(env["payload"])
                    entry = RosterEntry(info["client_id"], info["observed_addr"], info["joined_at_ms"])
                    with self._roster_lock:
                        self.local_roster[entry.client_id] = entry
                    if self.on_peer_joined:
                        self.on_peer_joined(entry)
                elif kind == "peer-left":
                    info = json.loads(env["payload"])
                    with self._roster_lock:
                        self.local_roster.pop(info["client_id"], None)
                    if self.on_peer_left:
                        self.on_peer_left(info["client_id"])
                elif kind == "relay":
                    if self.on_relay:
                        self.on_relay(env.get("from", ""), env.get("payload", ""))
                elif kind == "error":
                    info = json.loads(env.get("payload") or "{}")
                    if self.on_error:
                        self.on_error(info.get("code", ""), info.get("message", ""))
        except (OSError, ValueError):
            return
        finally:
            self._closed.set()

    def _keepalive_loop(self) -> None:
        while not self._closed.wait(self._keepalive_s):
            try:
                with self._write_lock:
                    self._sock.sendall(b"\n")
            except OSError:
                return

    def close(self) -> None:
        self._closed.set()
        # shutdown sends FIN even while the makefile reader still holds
        # a reference to the underlying descriptor
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self._rfile.close()
        except OSError:
            pass
        try:
            self._sock.close()
        except OSError:
            pass


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="meshmeter-signaling",
        description="Session signaling server (rooms, rosters, descriptor relay).",
    )
    parser.add_argument("--port", type=int, default=DEFAULT_PORT)
    parser.add_argument("--host", default="0.0.0.0")
    parser.add_argument("--capacity", type=int, default=DEFAULT_CAPACITY)
    parser.add_argument("--inactivity-timeout-s", type=float, default=DEFAULT_INACTIVITY_TIMEOUT_S)
    args = parser.parse_args(argv)

    server = SignalingServer(
        host=args.host, port=args.port, capacity=args.capacity,
        inactivity_timeout_s=args.inactivity_timeout_s,
    )
    print(f"signaling listening on {args.host}:{server.port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.stop()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
