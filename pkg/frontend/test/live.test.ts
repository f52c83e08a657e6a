/**
 * Round trip against a real running review service.
 *
 * Skipped unless REVIEW_API points at one, e.g.
 *   flowsentry serve-review --config <cfg> --port 8341 &
 *   REVIEW_API=http://127.0.0.1:8341 npx vitest run test/live.test.ts
 */
import { describe, expect, it } from "vitest";

import { ApiError, ReviewApi } from "../src/api.js";
import { ReviewStore } from "../src/state.js";

const base = process.env.REVIEW_API;

describe.skipIf(!base)("live review service", () => {
  const api = () => new ReviewApi(base!);

  it("serves a queue and item details", async () => {
    const queue = await api().queue(0, 5, "all");
    expect(queue.total).toBeGreaterThan(0);
    const detail = await api().item(queue.items[0]!.id);
    expect(Object.keys(detail.features).length).toBeGreaterThan(0);
  });

  it("decision round trip mutates server state and re-renders", async () => {
    const store = new ReviewStore(api());
    await store.refreshQueue();
    const pending = store.state.queue!.items.find((i) => i.status === "pending");
    expect(pending, "service has no pending items left to decide").toBeTruthy();
    await store.selectItem(pending!.id);
    await store.submitDecision("approve");
    expect(store.state.selected?.status).toBe("approved");
    // conflicting second decision is surfaced without corrupting state
    await store.submitDecision("reject");
    expect(store.state.notice?.kind).toBe("conflict");
    expect(store.state.selected?.status).toBe("approved");
    // identical repeat is a no-op
    const repeat = await api().decide(pending!.id, { action: "approve" });
    expect(repeat.status).toBe("unchanged");
  });

  it("finalize reports the reviewed set size", async () => {
    const result = await api()
      .finalize()
      .catch((e: ApiError) => e);
    if (result instanceof ApiError) {
      expect(result.status).toBe(409); // nothing decided yet on this server
    } else {
      expect(result.size).toBeGreaterThan(0);
    }
  });
});
