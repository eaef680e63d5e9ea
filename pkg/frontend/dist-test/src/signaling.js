// WebSocket signaling channel: join a session, mirror the roster, and
// relay opaque descriptor payloads to peers.
import { encodeEnvelope, envelope, parseEnvelope, parseErrorPayload, parseJoinedPayload, parseMemberPayload, } from "./envelope.js";
export class SignalingChannel {
    constructor(url) {
        this.url = url;
        this.ws = null;
        this.joinResolve = null;
        this.joinReject = null;
        this.session = "";
        this.clientId = "";
        this.onPeerJoined = () => { };
        this.onPeerLeft = () => { };
        this.onRelay = () => { };
        this.onClosed = () => { };
    }
    connect(timeoutMs = 5000) {
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
    join(session, clientId) {
        this.session = session;
        this.clientId = clientId;
        return new Promise((resolve, reject) => {
            this.joinResolve = resolve;
            this.joinReject = reject;
            this.send(envelope("join", session, clientId));
        });
    }
    relay(to, payload) {
        this.send(envelope("relay", this.session, this.clientId, to, payload));
    }
    close() {
        this.ws?.close();
        this.ws = null;
    }
    send(env) {
        this.ws?.send(encodeEnvelope(env));
    }
    handleMessage(text) {
        let env;
        try {
            env = parseEnvelope(text);
        }
        catch {
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
                if (reject)
                    reject(new Error(`${info.code}: ${info.message}`));
                break;
            }
        }
    }
}
