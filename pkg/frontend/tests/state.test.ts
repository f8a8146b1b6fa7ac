import assert from "node:assert/strict";
import { test } from "node:test";

import { MODES, SessionState } from "../src/state.js";
import { Weights } from "../src/types.js";

function fakeFetcher(payloads: unknown[], delays: number[] = []) {
  const seen: { body: unknown; aborted: boolean; signal: AbortSignal }[] = [];
  let call = 0;
  const fetcher = (_url: string, init: RequestInit) => {
    const index = call++;
    const record = { body: JSON.parse(init.body as string), aborted: false, signal: init.signal as AbortSignal };
    seen.push(record);
    return new Promise<Response>((resolve, reject) => {
      const finish = () =>
        resolve(new Response(JSON.stringify(payloads[index] ?? { ok: index }), { status: 200 }));
      record.signal.addEventListener("abort", () => {
        record.aborted = true;
        reject(Object.assign(new Error("aborted"), { name: "AbortError" }));
      });
      setTimeout(finish, delays[index] ?? 0);
    });
  };
  return { fetcher, seen };
}

test("mode switching covers every server mode", () => {
  const state = new SessionState();
  for (const mode of MODES) {
    state.setMode(mode);
    assert.equal(state.mode, mode);
  }
});

test("weight edits round-trip through the request body unchanged", () => {
  const state = new SessionState();
  const weights: Weights = { semantic: 0.55, asr: 0.15, ocr: 0.25, object: 0.05 };
  state.setWeights(weights);
  const body = state.buildSearchBody();
  assert.deepEqual(body.weights, weights);
  weights.semantic = 999; // caller mutation must not leak in
  assert.equal(state.buildSearchBody().weights!.semantic, 0.55);
});

test("include/exclude and temporal queries enter the body only when set", () => {
  const state = new SessionState();
  state.query = "a | b";
  assert.equal(state.buildSearchBody().include, undefined);
  state.include = ["L01"];
  state.exclude = ["L02/V004"];
  state.setMode("temporal");
  state.temporalQueries = ["a", "b"];
  const body = state.buildSearchBody();
  assert.deepEqual(body.include, ["L01"]);
  assert.deepEqual(body.exclude, ["L02/V004"]);
  assert.deepEqual(body.queries, ["a", "b"]);
});

test("submit posts the current state and records history", async () => {
  const { fetcher, seen } = fakeFetcher([{ results: [] }]);
  const state = new SessionState(fetcher);
  state.query = "ben thanh";
  state.setMode("semantic");
  const payload = await state.submit();
  assert.deepEqual(payload, { results: [] });
  assert.equal((seen[0].body as { mode: string }).mode, "semantic");
  assert.deepEqual(state.history, [{ query: "ben thanh", mode: "semantic" }]);
  assert.equal(state.busy, false);
});

test("i2i submissions hit /api/i2i with the parameter values", async () => {
  const calls: string[] = [];
  const state = new SessionState((url, init) => {
    calls.push(url);
    return Promise.resolve(new Response(JSON.stringify({ results: [] }), { status: 200 }));
  });
  state.setMode("i2i");
  state.query = "Ben Thanh Market";
  state.setI2iParams({ per_reference_top_k: 9, max_landmarks: 1, images_per_landmark: 2 });
  await state.submit();
  assert.deepEqual(calls, ["/api/i2i"]);
});

test("a new submission aborts the in-flight request", async () => {
  const { fetcher, seen } = fakeFetcher([{ first: true }, { second: true }], [50, 0]);
  const state = new SessionState(fetcher);
  state.query = "slow";
  const first = state.submit().catch((err) => err);
  state.query = "fast";
  const second = await state.submit();
  const firstOutcome = await first;
  assert.equal(seen[0].aborted, true);
  assert.equal((firstOutcome as Error).name, "AbortError");
  assert.deepEqual(second, { second: true });
  assert.deepEqual(state.lastResponse, { second: true });
  assert.equal(state.history.length, 1);
});

test("invalid i2i params are rejected before any request", () => {
  const state = new SessionState(() => {
    throw new Error("must not fetch");
  });
  assert.throws(() => state.setI2iParams({ per_reference_top_k: 0, max_landmarks: 1, images_per_landmark: 1 }));
});
