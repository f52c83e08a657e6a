import { describe, expect, it } from "vitest";

import { ReviewApi } from "../src/api.js";
import { ReviewStore } from "../src/state.js";
import { MockReviewServer } from "./mock_server.js";

function makeStore(server = new MockReviewServer()) {
  const api = new ReviewApi("http://mock", server.asFetch());
  const store = new ReviewStore(api);
  return { store, server };
}

describe("ReviewStore", () => {
  it("loads the queue and progress from the server", async () => {
    const { store } = makeStore();
    await store.refreshQueue();
    await store.refreshProgress();
    expect(store.state.queue?.total).toBe(12);
    expect(store.state.progress?.decided).toBe(0);
  });

  it("decision round trip mutates the server and re-renders server state", async () => {
    const { store, server } = makeStore();
    await store.refreshQueue();
    await store.selectItem(4);
    await store.submitDecision("approve");
    // never optimistic: displayed status comes from the refetched detail
    expect(server.items.get(4)?.status).toBe("approved");
    expect(store.state.selected?.status).toBe("approved");
    expect(store.state.progress?.decided).toBe(1);
    expect(store.state.notice?.kind).toBe("info");
  });

  it("relabel round trip carries the analyst label", async () => {
    const { store, server } = makeStore();
    await store.selectItem(0);
    await store.submitDecision("relabel", 0);
    expect(server.items.get(0)?.decided_label).toBe(0);
    expect(store.state.selected?.decided_label).toBe(0);
  });

  it("conflict responses surface inline and keep queue position", async () => {
    const { store, server } = makeStore();
    // another analyst already rejected item 7
    server.items.get(7)!.status = "rejected";
    await store.setPage(1); // move off the first page deliberately
    const pageBefore = store.state.page;
    await store.selectItem(7);
    await store.submitDecision("approve");
    expect(store.state.notice?.kind).toBe("conflict");
    expect(store.state.page).toBe(pageBefore);
    // server state wins in the re-rendered detail
    expect(store.state.selected?.status).toBe("rejected");
    expect(server.items.get(7)?.status).toBe("rejected");
  });

  it("duplicate decision shows unchanged without corrupting state", async () => {
    const { store, server } = makeStore();
    await store.selectItem(2);
    await store.submitDecision("approve");
    await store.submitDecision("approve");
    expect(store.state.notice?.text).toContain("unchanged");
    expect(server.decisionLog.filter((d) => d.id === 2)).toHaveLength(1);
    expect(store.state.selected?.status).toBe("approved");
  });

  it("finalize stores the server-reported set size", async () => {
    const { store } = makeStore();
    await store.selectItem(1);
    await store.submitDecision("approve");
    await store.finalize();
    expect(store.state.finalized?.size).toBe(1);
    expect(store.state.notice?.text).toContain("1 reviewed pseudo-labels");
  });

  it("finalize with nothing decided surfaces the conflict", async () => {
    const { store } = makeStore();
    await store.finalize();
    expect(store.state.finalized).toBeNull();
    expect(store.state.notice?.kind).toBe("conflict");
  });

  it("network failures surface as errors and keep state", async () => {
    const api = new ReviewApi("http://mock", async () => {
      throw new Error("connection refused");
    });
    const store = new ReviewStore(api);
    await store.refreshQueue();
    expect(store.state.notice?.kind).toBe("error");
    expect(store.state.notice?.text).toContain("connection refused");
    expect(store.state.queue).toBeNull();
  });

  it("status filter resets paging and refetches", async () => {
    const { store, server } = makeStore();
    server.items.get(3)!.status = "approved";
    await store.setPage(1);
    await store.setStatusFilter("approved");
    expect(store.state.page).toBe(0);
    expect(store.state.queue?.total).toBe(1);
    expect(store.state.queue?.items[0]?.id).toBe(3);
  });
});
