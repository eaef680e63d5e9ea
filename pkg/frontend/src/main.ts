// Participant page wiring: join the session on load, establish peer
// connections on Connect, then sample/chart/report once per second.

import { drawSeries } from "./chart.js";
import { IpInfo, LookupMode, lookupSelf } from "./lookup.js";
import { buildRecord, postToCollector, RetryQueue } from "./records.js";
import { SignalingChannel } from "./signaling.js";
import { SessionState } from "./state.js";
import { PeerMesh } from "./webrtc.js";

const CHART_POINTS = 120;
const SAMPLE_INTERVAL_MS = 1000;

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

function showError(message: string): void {
  const banner = $("error-banner");
  banner.textContent = message;
  banner.style.display = "block";
}

function defaultSignalingUrl(): string {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  return `${proto}://${location.hostname}:7401`;
}

class ParticipantPage {
  readonly params = new URLSearchParams(location.search);
  readonly sessionId = this.params.get("session") ?? "default";
  readonly clientId = this.params.get("id") ?? `web-${Math.random().toString(36).slice(2, 8)}`;
  readonly signaling = new SignalingChannel(this.params.get("signaling") ?? defaultSignalingUrl());
  readonly state = new SessionState(this.clientId, CHART_POINTS);
  readonly mesh = new PeerMesh(this.clientId, this.signaling, (peer, status) => {
    this.state.setStatus(peer, status);
    this.renderRows();
  });
  readonly queue = new RetryQueue(600);
  readonly post = postToCollector(this.params.get("collector") ?? "");
  ipInfo: IpInfo = { ip: "", isp: "" };
  connected = false;

  async start(): Promise<void> {
    $("session-label").textContent = this.sessionId;
    $("client-label").textContent = this.clientId;
    const lookupMode = (this.params.get("lookup") ?? "off") as LookupMode;
    this.ipInfo = await lookupSelf(lookupMode);

    try {
      await this.signaling.connect();
      const members = await this.signaling.join(this.sessionId, this.clientId);
      this.state.applyRoster(members);
    } catch (err) {
      showError(String(err instanceof Error ? err.message : err));
      return;
    }
    this.signaling.onPeerJoined = (member) => {
      this.state.addPeer(member.client_id);
      if (this.connected) this.mesh.connectTo(member.client_id);
      this.renderRows();
    };
    this.signaling.onPeerLeft = (clientId) => {
      this.mesh.closePeer(clientId);
      this.state.removePeer(clientId);
      this.renderRows();
    };
    this.signaling.onClosed = (reason) => showError(reason);

    const button = $("connect") as HTMLButtonElement;
    button.disabled = false;
    button.onclick = () => {
      this.connected = true;
      button.disabled = true;
      for (const peerId of this.state.peers.keys()) this.mesh.connectTo(peerId);
      this.renderRows();
    };
    this.renderRows();
    setInterval(() => void this.tick(), SAMPLE_INTERVAL_MS);
  }

  async tick(): Promise<void> {
    for (const row of this.state.connectedPeers()) {
      const rtt = await this.mesh.sampleRtt(row.peerId);
      if (rtt === null) continue;
      this.state.recordRtt(row.peerId, rtt);
      this.queue.push(
        buildRecord(this.clientId, row.peerId, rtt, Date.now(), this.ipInfo.ip, this.ipInfo.isp),
      );
    }
    await this.queue.flush(this.post);
    this.renderRows();
  }

  renderRows(): void {
    const tbody = $("peers");
    for (const row of this.state.peers.values()) {
      let tr = document.getElementById(`peer-${row.peerId}`) as HTMLTableRowElement | null;
      if (!tr) {
        tr = document.createElement("tr");
        tr.id = `peer-${row.peerId}`;
        tr.innerHTML =
          `<td class="peer-id"></td><td class="peer-status"></td>` +
          `<td class="peer-rtt"></td><td><canvas width="360" height="80"></canvas></td>`;
        tbody.appendChild(tr);
      }
      (tr.querySelector(".peer-id") as HTMLElement).textContent = row.peerId;
      const statusCell = tr.querySelector(".peer-status") as HTMLElement;
      statusCell.textContent = row.status;
      statusCell.className = `peer-status status-${row.status}`;
      (tr.querySelector(".peer-rtt") as HTMLElement).textContent =
        row.lastRttMs === null ? "-" : `${row.lastRttMs.toFixed(1)} ms`;
      drawSeries(tr.querySelector("canvas") as HTMLCanvasElement, row.series.values(), CHART_POINTS);
    }
    for (const tr of [...tbody.querySelectorAll("tr")]) {
      const peerId = tr.id.replace(/^peer-/, "");
      if (!this.state.peers.has(peerId)) tr.remove();
    }
    $("queue-label").textContent =
      `${this.queue.posted} posted, ${this.queue.size} queued` +
      (this.queue.dropped ? `, ${this.queue.dropped} dropped` : "");
  }
}

void new ParticipantPage().start();
