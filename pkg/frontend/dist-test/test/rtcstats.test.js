import assert from "node:assert/strict";
import { test } from "node:test";
import { pickCandidatePairRttMs } from "../src/rtcstats.js";
import { lookupSelf } from "../src/lookup.js";
test("prefers the transport-selected candidate pair", () => {
    const reports = [
        { id: "T1", type: "transport", selectedCandidatePairId: "CP2" },
        { id: "CP1", type: "candidate-pair", state: "succeeded", currentRoundTripTime: 0.05 },
        { id: "CP2", type: "candidate-pair", state: "succeeded", currentRoundTripTime: 0.012 },
    ];
    assert.equal(pickCandidatePairRttMs(reports), 12);
});
test("falls back to the nominated succeeded pair", () => {
    const reports = [
        { id: "CP1", type: "candidate-pair", state: "in-progress", currentRoundTripTime: 0.2 },
        {
            id: "CP2",
            type: "candidate-pair",
            state: "succeeded",
            nominated: true,
            currentRoundTripTime: 0.031,
        },
    ];
    assert.equal(pickCandidatePairRttMs(reports), 31);
});
test("falls back to any succeeded pair with an rtt", () => {
    const reports = [
        { id: "CP1", type: "candidate-pair", state: "succeeded", currentRoundTripTime: 0.0065 },
    ];
    assert.equal(pickCandidatePairRttMs(reports), 6.5);
});
test("returns null when nothing usable exists", () => {
    assert.equal(pickCandidatePairRttMs([]), null);
    assert.equal(pickCandidatePairRttMs([{ id: "CP1", type: "candidate-pair", state: "in-progress" }]), null);
});
test("stub lookup returns the fixture isp", async () => {
    assert.deepEqual(await lookupSelf("stub"), { ip: "203.0.113.7", isp: "ExampleNet" });
});
test("off lookup returns empty strings", async () => {
    assert.deepEqual(await lookupSelf("off"), { ip: "", isp: "" });
});
test("live lookup parses org and degrades on failure", async () => {
    const fakeFetch = async () => ({ json: async () => ({ ip: "198.51.100.9", org: "AS64500 MockNet" }) });
    assert.deepEqual(await lookupSelf("live", "http://x/json", fakeFetch), {
        ip: "198.51.100.9",
        isp: "AS64500 MockNet",
    });
    const failingFetch = async () => {
        throw new Error("unreachable");
    };
    assert.deepEqual(await lookupSelf("live", "http://x/json", failingFetch), { ip: "", isp: "" });
});
