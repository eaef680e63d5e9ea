import assert from "node:assert/strict";
import { test } from "node:test";
import { encodeEnvelope, envelope, parseEnvelope, parseErrorPayload, parseJoinedPayload, parseMemberPayload, } from "../src/envelope.js";
test("envelope round trip", () => {
    const env = envelope("relay", "room", "a", "b", "opaque text");
    assert.deepEqual(parseEnvelope(encodeEnvelope(env)), env);
});
test("missing fields default to empty strings", () => {
    const env = parseEnvelope('{"kind":"joined"}');
    assert.equal(env.kind, "joined");
    assert.equal(env.session, "");
    assert.equal(env.payload, "");
});
test("joined payload lists members", () => {
    const payload = JSON.stringify({
        members: [
            { client_id: "a", observed_addr: "10.0.0.1:5", joined_at_ms: 1 },
            { client_id: "b", observed_addr: "10.0.0.2:6", joined_at_ms: 2 },
        ],
    });
    const members = parseJoinedPayload(payload);
    assert.equal(members.length, 2);
    assert.equal(members[1].client_id, "b");
});
test("member payload parses", () => {
    const member = parseMemberPayload('{"client_id":"x","observed_addr":"h:1","joined_at_ms":3}');
    assert.equal(member.client_id, "x");
});
test("error payload tolerates plain text", () => {
    assert.deepEqual(parseErrorPayload('{"code":"UnknownPeer","message":"no"}'), {
        code: "UnknownPeer",
        message: "no",
    });
    assert.equal(parseErrorPayload("garbled").code, "SignalingError");
});
