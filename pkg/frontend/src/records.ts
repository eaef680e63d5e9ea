// Measurement record assembly and the bounded post-retry queue.
// Field names and types must match the collector schema exactly so
// browser records are indistinguishable from native-agent records.

export interface MeasurementRecord {
  Date: number;
  yourIsp: string;
  yourIp: string;
  candidatePair_RTT: number;
  yourID: string;
  peerID: string;
  [key: string]: unknown;
}

export function buildRecord(
  yourId: string,
  peerId: string,
  rttMs: number,
  dateMs: number,
  yourIp = "",
  yourIsp = "",
): MeasurementRecord {
  if (!yourId || !peerId) throw new Error("ids must be nonempty");
  if (yourId === peerId) throw new Error("peerID must differ from yourID");
  if (!(rttMs >= 0)) throw new Error(`rtt must be non-negative, got ${rttMs}`);
  if (!(dateMs > 0)) throw new Error("Date must be positive");
  return {
    Date: Math.trunc(dateMs),
    yourIsp,
    yourIp,
    candidatePair_RTT: rttMs,
    yourID: yourId,
    peerID: peerId,
  };
}

export type PostFn = (record: MeasurementRecord) => Promise<boolean>;

export class RetryQueue {
  private queue: MeasurementRecord[] = [];
  dropped = 0;
  posted = 0;

  constructor(readonly limit = 600) {}

  get size(): number {
    return this.queue.length;
  }

  push(record: MeasurementRecord): void {
    if (this.queue.length >= this.limit) {
      this.queue.shift();
      this.dropped += 1;
    }
    this.queue.push(record);
  }

  /** Post queued records in order; stops at the first failure. */
  async flush(post: PostFn): Promise<number> {
    let sent = 0;
    while (this.queue.length > 0) {
      const head = this.queue[0];
      let ok = false;
      try {
        ok = await post(head);
      } catch {
        ok = false;
      }
      if (!ok) break;
      this.queue.shift();
      this.posted += 1;
      sent += 1;
    }
    return sent;
  }
}

export function postToCollector(baseUrl: string): PostFn {
  const url = baseUrl.replace(/\/$/, "") + "/api/v1/records";
  return async (record) => {
    const resp = await fetch(url, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(record),
    });
    return resp.status === 201;
  };
}
