import assert from "node:assert/strict";
import { test } from "node:test";

import { RollingSeries } from "../src/ring.js";
import { isInitiator, SessionState } from "../src/state.js";

test("rolling series never exceeds capacity", () => {
  const series = new RollingSeries(120);
  for (let i = 0; i < 500; i++) series.push(i);
  assert.equal(series.length, 120);
  assert.deepEqual(series.values().slice(0, 2), [380, 381]);
  assert.equal(series.latest, 499);
});

test("initiator role is deterministic and one-sided", () => {
  assert.equal(isInitiator("a", "b"), true);
  assert.equal(isInitiator("b", "a"), false);
  assert.notEqual(isInitiator("tab1", "tab2"), isInitiator("tab2", "tab1"));
});

test("roster application skips self", () => {
  const state = new SessionState("me");
  state.applyRoster([
    { client_id: "me", observed_addr: "h:1", joined_at_ms: 1 },
    { client_id: "other", observed_addr: "h:2", joined_at_ms: 2 },
  ]);
  assert.deepEqual([...state.peers.keys()], ["other"]);
});

test("peer lifecycle: add, status, remove", () => {
  const state = new SessionState("me");
  state.addPeer("p1");
  state.setStatus("p1", "connecting");
  assert.equal(state.peers.get("p1")?.status, "connecting");
  state.setStatus("p1", "connected");
  assert.equal(state.connectedPeers().length, 1);
  state.removePeer("p1");
  assert.equal(state.peers.size, 0);
});

test("rtt samples update chart series and ignore negatives", () => {
  const state = new SessionState("me", 3);
  state.addPeer("p1");
  assert.equal(state.recordRtt("p1", -5), false);
  for (const v of [10, 11, 12, 13]) assert.equal(state.recordRtt("p1", v), true);
  const row = state.peers.get("p1")!;
  assert.deepEqual(row.series.values(), [11, 12, 13]);
  assert.equal(row.lastRttMs, 13);
});

test("samples for unknown peers are dropped", () => {
  const state = new SessionState("me");
  assert.equal(state.recordRtt("ghost", 5), false);
});
