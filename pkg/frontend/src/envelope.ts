// Signaling envelope codec. One JSON object per WebSocket text frame;
// payloads are opaque strings (server-generated ones contain JSON text).

export interface Envelope {
  kind: string;
  session: string;
  from: string;
  to: string;
  payload: string;
}

export interface RosterMember {
  client_id: string;
  observed_addr: string;
  joined_at_ms: number;
}

export function envelope(
  kind: string,
  session = "",
  from = "",
  to = "",
  payload = "",
): Envelope {
  return { kind, session, from, to, payload };
}

export function encodeEnvelope(env: Envelope): string {
  return JSON.stringify(env);
}

export function parseEnvelope(text: string): Envelope {
  const raw = JSON.parse(text) as Partial<Envelope>;
  return {
    kind: typeof raw.kind === "string" ? raw.kind : "",
    session: typeof raw.session === "string" ? raw.session : "",
    from: typeof raw.from === "string" ? raw.from : "",
    to: typeof raw.to === "string" ? raw.to : "",
    payload: typeof raw.payload === "string" ? raw.payload : "",
  };
}

export function parseJoinedPayload(payload: string): RosterMember[] {
  const parsed = JSON.parse(payload) as { members?: RosterMember[] };
  return parsed.members ?? [];
}

export function parseMemberPayload(payload: string): RosterMember {
  return JSON.parse(payload) as RosterMember;
}

export function parseErrorPayload(payload: string): { code: string; message: string } {
  try {
    const parsed = JSON.parse(payload) as { code?: string; message?: string };
    return { code: parsed.code ?? "SignalingError", message: parsed.message ?? payload };
  } catch {
    return { code: "SignalingError", message: payload };
  }
}
