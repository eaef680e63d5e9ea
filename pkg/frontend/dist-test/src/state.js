// Per-peer session state driven by roster envelopes and sampler output.
import { RollingSeries } from "./ring.js";
/** Deterministic offer role: the lexicographically smaller id offers. */
export function isInitiator(selfId, peerId) {
    return selfId < peerId;
}
export class SessionState {
    constructor(selfId, chartPoints = 120) {
        this.selfId = selfId;
        this.chartPoints = chartPoints;
        this.peers = new Map();
    }
    applyRoster(members) {
        for (const member of members) {
            if (member.client_id !== this.selfId)
                this.addPeer(member.client_id);
        }
    }
    addPeer(peerId) {
        let row = this.peers.get(peerId);
        if (!row) {
            row = {
                peerId,
                status: "new",
                lastRttMs: null,
                series: new RollingSeries(this.chartPoints),
            };
            this.peers.set(peerId, row);
        }
        return row;
    }
    removePeer(peerId) {
        this.peers.delete(peerId);
    }
    setStatus(peerId, status) {
        const row = this.peers.get(peerId);
        if (row)
            row.status = status;
    }
    /** Record a sample; negative values are dropped (chart invariant). */
    recordRtt(peerId, rttMs) {
        if (!(rttMs >= 0))
            return false;
        const row = this.peers.get(peerId);
        if (!row)
            return false;
        row.lastRttMs = rttMs;
        row.series.push(rttMs);
        return true;
    }
    connectedPeers() {
        return [...this.peers.values()].filter((p) => p.status === "connected");
    }
}
