// WebSocket signaling channel: join a session, mirror the roster, and
// relay opaque descriptor payloads to peers.

import {
  Envelope,
  RosterMember,
  encodeEnvelope,
  envelope,
  parseEnvelope,
  parseErrorPayload,
  parseJoinedPayload,
  parseMemberPayload,
} from "./envelope.js";

export class SignalingChannel {
  private ws: WebSocket | null = null;
  private joinResolve: ((members: RosterMember[]) => void) | null = null;
  private joinReject: ((err: Error) => void) | null = null;
  session = "";
  clientId = "";

  onPeerJoined: (member: RosterMember) => void = () => {};
  onPeerLeft: (clientId: string) => void = () => {};
  onRelay: (from: string, payload: string) => void = () => {};
  onClosed: (reason: string) => void = () => {};

  constructor(readonly url: string) {}

  connect(timeoutMs = 5000): Promise<void> {
    return new Promise((resolve, reject) => {
      let settled = false;
      const ws = new WebSocket(this.url);
      const timer = setTimeout(() => {
        if (!settled) {
          settled = true;
          ws.close();
          reject(new Error(`signaling unreachable: ${this.url}`));
        }
      }, timeoutMs);
      ws.onopen = () => {
        if (!settled) {
          settled = true;
          clearTimeout(timer);
          resolve();
        }
      };
      ws.onerror = () => {
        if (!settled) {
          settled = true;
          clearTimeout(timer);
          reject(new Error(`signaling unreachable: ${this.url}`));
        }
      };
      ws.onmessage = (event) => this.handleMessage(String(event.data));
      ws.onclose = () => this.onClosed("signaling connection closed");
      this.ws = ws;
    });
  }

  join(session: string, clientId: string): Promise<RosterMember[]> {
    this.session = session;
    this.clientId = clientId;
    return new Promise((resolve, reject) => {
      this.joinResolve = resolve;
      this.joinReject = reject;
      this.send(envelope("join", session, clientId));
    });
  }

  relay(to: string, payload: string): void {
    this.send(envelope("relay", this.session, this.clientId, to, payload));
  }

  close(): void {
    this.ws?.close();
    this.ws = null;
  }

  private send(env: Envelope): void {
    this.ws?.send(encodeEnvelope(env));
  }

  private handleMessage(text: string): void {
    let env: Envelope;
    try {
      env = parseEnvelope(text);
    } catch {
      return;
    }
    switch (env.kind) {
      case "joined": {
        const resolve = this.joinResolve;
        this.joinResolve = this.joinReject = null;
        resolve?.(parseJoinedPayload(env.payload));
        break;
      }
      case "peer-joined":
        this.onPeerJoined(parseMemberPayload(env.payload));
        break;
      case "peer-left":
        this.onPeerLeft(parseMemberPayload(env.payload).client_id);
        break;
      case "relay":
        this.onRelay(env.from, env.payload);
        break;
      case "error": {
        const info = parseErrorPayload(env.payload);
        const reject = this.joinReject;
        this.joinResolve = this.joinReject = null;
        if (reject) reject(new Error(`${info.code}: ${info.message}`));
        break;
      }
    }
  }
}
