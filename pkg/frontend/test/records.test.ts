import assert from "node:assert/strict";
import { test } from "node:test";

import { buildRecord, MeasurementRecord, RetryQueue } from "../src/records.js";

test("record carries the exact collector schema fields", () => {
  const record = buildRecord("alice", "bob", 12.5, 1700000000000, "203.0.113.7", "ExampleNet");
  assert.deepEqual(Object.keys(record).sort(), [
    "Date",
    "candidatePair_RTT",
    "peerID",
    "yourID",
    "yourIp",
    "yourIsp",
  ]);
  assert.equal(record.Date, 1700000000000);
  assert.equal(record.candidatePair_RTT, 12.5);
  assert.equal(record.yourID, "alice");
  assert.equal(record.peerID, "bob");
});

test("record rejects invalid inputs", () => {
  assert.throws(() => buildRecord("a", "a", 1, 1));
  assert.throws(() => buildRecord("a", "b", -1, 1));
  assert.throws(() => buildRecord("", "b", 1, 1));
  assert.throws(() => buildRecord("a", "b", 1, 0));
});

test("retry queue bounds at the limit and drops oldest", () => {
  const queue = new RetryQueue(3);
  for (let i = 0; i < 5; i++) {
    queue.push(buildRecord("a", "b", i, i + 1));
  }
  assert.equal(queue.size, 3);
  assert.equal(queue.dropped, 2);
});

test("flush posts in order and stops at first failure", async () => {
  const queue = new RetryQueue(10);
  for (let i = 0; i < 4; i++) queue.push(buildRecord("a", "b", i, i + 1));
  const seen: number[] = [];
  let failAfter = 2;
  const post = async (r: MeasurementRecord) => {
    if (failAfter === 0) return false;
    failAfter -= 1;
    seen.push(r.candidatePair_RTT);
    return true;
  };
  const sent = await queue.flush(post);
  assert.equal(sent, 2);
  assert.deepEqual(seen, [0, 1]);
  assert.equal(queue.size, 2);

  failAfter = 99;
  await queue.flush(post);
  assert.deepEqual(seen, [0, 1, 2, 3]);
  assert.equal(queue.size, 0);
  assert.equal(queue.posted, 4);
});

test("flush treats thrown errors as failures", async () => {
  const queue = new RetryQueue(10);
  queue.push(buildRecord("a", "b", 1, 1));
  const sent = await queue.flush(async () => {
    throw new Error("network down");
  });
  assert.equal(sent, 0);
  assert.equal(queue.size, 1);
});
