// Per-peer session state driven by roster envelopes and sampler output.

import { RosterMember } from "./envelope.js";
import { RollingSeries } from "./ring.js";

export type PeerStatus = "new" | "connecting" | "connected" | "failed";

export interface PeerRow {
  peerId: string;
  status: PeerStatus;
  lastRttMs: number | null;
  series: RollingSeries;
}

/** Deterministic offer role: the lexicographically smaller id offers. */
export function isInitiator(selfId: string, peerId: string): boolean {
  return selfId < peerId;
}

export class SessionState {
  readonly peers = new Map<string, PeerRow>();

  constructor(readonly selfId: string, readonly chartPoints = 120) {}

  applyRoster(members: RosterMember[]): void {
    for (const member of members) {
      if (member.client_id !== this.selfId) this.addPeer(member.client_id);
    }
  }

  addPeer(peerId: string): PeerRow {
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

  removePeer(peerId: string): void {
    this.peers.delete(peerId);
  }

  setStatus(peerId: string, status: PeerStatus): void {
    const row = this.peers.get(peerId);
    if (row) row.status = status;
  }

  /** Record a sample; negative values are dropped (chart invariant). */
  recordRtt(peerId: string, rttMs: number): boolean {
    if (!(rttMs >= 0)) return false;
    const row = this.peers.get(peerId);
    if (!row) return false;
    row.lastRttMs = rttMs;
    row.series.push(rttMs);
    return true;
  }

  connectedPeers(): PeerRow[] {
    return [...this.peers.values()].filter((p) => p.status === "connected");
  }
}
