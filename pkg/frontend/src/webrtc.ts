// Peer connection management: one RTCPeerConnection + data channel per
// roster peer, with offers/answers/ICE relayed through the signaling
// channel as opaque JSON payloads. The lexicographically smaller id
// makes the offer, so two peers connecting simultaneously never glare.

import { SignalingChannel } from "./signaling.js";
import { isInitiator, PeerStatus } from "./state.js";
import { pickCandidatePairRttMs, StatsLike } from "./rtcstats.js";

interface DescriptorMessage {
  rtype: "offer" | "answer" | "ice";
  sdp?: string;
  candidate?: RTCIceCandidateInit | null;
}

export class PeerMesh {
  private connections = new Map<string, RTCPeerConnection>();
  private channels = new Map<string, RTCDataChannel>();

  constructor(
    readonly selfId: string,
    readonly signaling: SignalingChannel,
    readonly onStatus: (peerId: string, status: PeerStatus) => void,
    readonly rtcConfig: RTCConfiguration = {},
  ) {
    signaling.onRelay = (from, payload) => {
      void this.handleRelay(from, payload);
    };
  }

  peerIds(): string[] {
    return [...this.connections.keys()];
  }

  connectTo(peerId: string): void {
    if (this.connections.has(peerId)) return;
    const pc = this.createConnection(peerId);
    if (isInitiator(this.selfId, peerId)) {
      const channel = pc.createDataChannel("meshmeter");
      this.wireChannel(peerId, channel);
      void this.sendOffer(peerId, pc);
    }
    // the non-initiator waits for the offer and the ondatachannel event
  }

  closePeer(peerId: string): void {
    this.channels.get(peerId)?.close();
    this.channels.delete(peerId);
    this.connections.get(peerId)?.close();
    this.connections.delete(peerId);
  }

  closeAll(): void {
    for (const peerId of [...this.connections.keys()]) this.closePeer(peerId);
  }

  /** Current candidate-pair RTT in ms for one peer, or null. */
  async sampleRtt(peerId: string): Promise<number | null> {
    const pc = this.connections.get(peerId);
    if (!pc || pc.connectionState !== "connected") return null;
    const stats = await pc.getStats();
    const reports: StatsLike[] = [];
    stats.forEach((report) => reports.push(report as StatsLike));
    return pickCandidatePairRttMs(reports);
  }

  private createConnection(peerId: string): RTCPeerConnection {
    const pc = new RTCPeerConnection(this.rtcConfig);
    this.connections.set(peerId, pc);
    this.onStatus(peerId, "connecting");
    pc.onicecandidate = (event) => {
      this.relayTo(peerId, { rtype: "ice", candidate: event.candidate?.toJSON() ?? null });
    };
    pc.ondatachannel = (event) => this.wireChannel(peerId, event.channel);
    pc.onconnectionstatechange = () => {
      if (pc.connectionState === "connected") this.onStatus(peerId, "connected");
      else if (["failed", "disconnected", "closed"].includes(pc.connectionState)) {
        this.onStatus(peerId, "failed");
      }
    };
    return pc;
  }

  private wireChannel(peerId: string, channel: RTCDataChannel): void {
    this.channels.set(peerId, channel);
    channel.onopen = () => this.onStatus(peerId, "connected");
  }

  private async sendOffer(peerId: string, pc: RTCPeerConnection): Promise<void> {
    const offer = await pc.createOffer();
    await pc.setLocalDescription(offer);
    this.relayTo(peerId, { rtype: "offer", sdp: offer.sdp });
  }

  private relayTo(peerId: string, message: DescriptorMessage): void {
    this.signaling.relay(peerId, JSON.stringify(message));
  }

  private async handleRelay(from: string, payload: string): Promise<void> {
    let message: DescriptorMessage;
    try {
      message = JSON.parse(payload) as DescriptorMessage;
    } catch {
      return;
    }
    let pc = this.connections.get(from);
    try {
      if (message.rtype === "offer") {
        if (!pc) pc = this.createConnection(from);
        await pc.setRemoteDescription({ type: "offer", sdp: message.sdp });
        const answer = await pc.createAnswer();
        await pc.setLocalDescription(answer);
        this.relayTo(from, { rtype: "answer", sdp: answer.sdp });
      } else if (message.rtype === "answer" && pc) {
        await pc.setRemoteDescription({ type: "answer", sdp: message.sdp });
      } else if (message.rtype === "ice" && pc && message.candidate) {
        await pc.addIceCandidate(message.candidate);
      }
    } catch {
      this.onStatus(from, "failed");
    }
  }
}
