// Signaling envelope codec. One JSON object per WebSocket text frame;
// payloads are opaque strings (server-generated ones contain JSON text).
export function envelope(kind, session = "", from = "", to = "", payload = "") {
    return { kind, session, from, to, payload };
}
export function encodeEnvelope(env) {
    return JSON.stringify(env);
}
export function parseEnvelope(text) {
    const raw = JSON.parse(text);
    return {
        kind: typeof raw.kind === "string" ? raw.kind : "",
        session: typeof raw.session === "string" ? raw.session : "",
        from: typeof raw.from === "string" ? raw.from : "",
        to: typeof raw.to === "string" ? raw.to : "",
        payload: typeof raw.payload === "string" ? raw.payload : "",
    };
}
export function parseJoinedPayload(payload) {
    const parsed = JSON.parse(payload);
    return parsed.members ?? [];
}
export function parseMemberPayload(payload) {
    return JSON.parse(payload);
}
export function parseErrorPayload(payload) {
    try {
        const parsed = JSON.parse(payload);
        return { code: parsed.code ?? "SignalingError", message: parsed.message ?? payload };
    }
    catch {
        return { code: "SignalingError", message: payload };
    }
}
