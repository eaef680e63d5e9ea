// Measurement record assembly and the bounded post-retry queue.
// Field names and types must match the collector schema exactly so
// browser records are indistinguishable from native-agent records.
export function buildRecord(yourId, peerId, rttMs, dateMs, yourIp = "", yourIsp = "") {
    if (!yourId || !peerId)
        throw new Error("ids must be nonempty");
    if (yourId === peerId)
        throw new Error("peerID must differ from yourID");
    if (!(rttMs >= 0))
        throw new Error(`rtt must be non-negative, got ${rttMs}`);
    if (!(dateMs > 0))
        throw new Error("Date must be positive");
    return {
        Date: Math.trunc(dateMs),
        yourIsp,
        yourIp,
        candidatePair_RTT: rttMs,
        yourID: yourId,
        peerID: peerId,
    };
}
export class RetryQueue {
    constructor(limit = 600) {
        this.limit = limit;
        this.queue = [];
        this.dropped = 0;
        this.posted = 0;
    }
    get size() {
        return this.queue.length;
    }
    push(record) {
        if (this.queue.length >= this.limit) {
            this.queue.shift();
            this.dropped += 1;
        }
        this.queue.push(record);
    }
    /** Post queued records in order; stops at the first failure. */
    async flush(post) {
        let sent = 0;
        while (this.queue.length > 0) {
            const head = this.queue[0];
            let ok = false;
            try {
                ok = await post(head);
            }
            catch {
                ok = false;
            }
            if (!ok)
                break;
            this.queue.shift();
            this.posted += 1;
            sent += 1;
        }
        return sent;
    }
}
export function postToCollector(baseUrl) {
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
