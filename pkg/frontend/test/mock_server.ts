/**
 * In-memory review service implementing the documented API contract,
 * exposed as a fetch-compatible function so UI tests run without the
 * Python service built.
 */

import type {
  DecisionRequest,
  Explanation,
  ItemDetail,
  ItemStatus,
  ItemSummary,
} from "../src/types.js";
import type { FetchLike } from "../src/api.js";

interface MockItem {
  id: number;
  ensemble_label: 0 | 1;
  score_attack: number;
  score_benign: number;
  status: ItemStatus;
  decided_label: number | null;
  features: Record<string, number>;
  explanation: Explanation | null;
}

export function defaultFixtures(): MockItem[] {
  const items: MockItem[] = [];
  for (let i = 0; i < 12; i++) {
    const attack = i % 3 === 0 ? 1 : 0;
    const margin = 0.05 + 0.07 * i;
    const contributions = Array.from({ length: 10 }, (_, j) => ({
      feature: `feature_${j}`,
      // strictly decreasing magnitude, alternating sign
      weight: (j % 2 === 0 ? 1 : -1) * (1.0 - j * 0.09),
    }));
    items.push({
      id: i,
      ensemble_label: attack as 0 | 1,
      score_attack: attack ? 5 + margin : 5 - margin,
      score_benign: attack ? 5 - margin : 5 + margin,
      status: "pending",
      decided_label: null,
      features: { duration: 0.4 + i, src_bytes: 120 * i, rate: 0.3, err_rate: 0.01 * i },
      explanation: { intercept: 0.42, local_fit_r2: 0.91, contributions },
    });
  }
  return items;
}

export class MockReviewServer {
  items: Map<number, MockItem>;
  decisionLog: { id: number; action: string; label?: number }[] = [];
  finalizeCount = 0;

  constructor(items: MockItem[] = defaultFixtures()) {
    this.items = new Map(items.map((i) => [i.id, i]));
  }

  private summary(item: MockItem): ItemSummary {
    return {
      id: item.id,
      ensemble_label: item.ensemble_label,
      score_attack: item.score_attack,
      score_benign: item.score_benign,
      margin: Math.abs(item.score_attack - item.score_benign),
      status: item.status,
    };
  }

  private detail(item: MockItem): ItemDetail {
    return {
      ...this.summary(item),
      features: item.features,
      explanation: item.explanation,
      decided_label: item.decided_label,
    };
  }

  private ordered(): MockItem[] {
    return [...this.items.values()].sort(
      (a, b) =>
        Math.abs(a.score_attack - a.score_benign) -
          Math.abs(b.score_attack - b.score_benign) || a.id - b.id,
    );
  }

  handle(method: string, path: string, body?: unknown): { status: number; body: unknown } {
    const url = new URL(path, "http://mock");
    const segments = url.pathname.split("/").filter(Boolean);

    if (method === "GET" && segments[0] === "queue") {
      const status = url.searchParams.get("status") ?? "pending";
      const page = Number(url.searchParams.get("page") ?? 0);
      const pageSize = Number(url.searchParams.get("page_size") ?? 20);
      const filtered = this.ordered().filter(
        (i) => status === "all" || i.status === status,
      );
      return {
        status: 200,
        body: {
          total: filtered.length,
          page,
          page_size: pageSize,
          items: filtered
            .slice(page * pageSize, (page + 1) * pageSize)
            .map((i) => this.summary(i)),
        },
      };
    }

    if (segments[0] === "item") {
      const item = this.items.get(Number(segments[1]));
      if (!item) return { status: 404, body: { detail: `no review item ${segments[1]}` } };
      if (method === "GET" && segments.length === 2) {
        return { status: 200, body: this.detail(item) };
      }
      if (method === "POST" && segments[2] === "decision") {
        const req = body as DecisionRequest;
        const statusByAction: Record<string, ItemStatus> = {
          approve: "approved",
          reject: "rejected",
          relabel: "relabelled",
        };
        const newStatus = statusByAction[req.action];
        if (!newStatus) return { status: 422, body: { detail: `unknown action ${req.action}` } };
        if (req.action === "relabel" && req.label !== 0 && req.label !== 1) {
          return { status: 422, body: { detail: "relabel requires a 0/1 label" } };
        }
        const newLabel = req.action === "relabel" ? (req.label as number) : null;
        if (item.status !== "pending") {
          if (item.status === newStatus && item.decided_label === newLabel) {
            return { status: 200, body: { status: "unchanged", item: this.summary(item) } };
          }
          return { status: 409, body: { detail: `item ${item.id} already ${item.status}` } };
        }
        item.status = newStatus;
        item.decided_label = newLabel;
        this.decisionLog.push({ id: item.id, action: req.action, label: req.label });
        return { status: 200, body: { status: "recorded", item: this.summary(item) } };
      }
    }

    if (method === "GET" && segments[0] === "progress") {
      const counts = { pending: 0, approved: 0, rejected: 0, relabelled: 0 };
      for (const item of this.items.values()) counts[item.status]++;
      const total = this.items.size;
      return {
        status: 200,
        body: { total, decided: total - counts.pending, ...counts },
      };
    }

    if (method === "POST" && segments[0] === "finalize") {
      const decided = [...this.items.values()].filter(
        (i) => i.status === "approved" || i.status === "relabelled",
      );
      const anyDecision = [...this.items.values()].some((i) => i.status !== "pending");
      if (!anyDecision) {
        return { status: 409, body: { detail: "cannot finalize: no decided items" } };
      }
      this.finalizeCount++;
      return {
        status: 200,
        body: { size: decided.length, mode: "reviewed", path: "/mock/pseudo_labels.fsc" },
      };
    }

    return { status: 404, body: { detail: `no route ${method} ${url.pathname}` } };
  }

  /** fetch-compatible adapter for ReviewApi. */
  asFetch(): FetchLike {
    return async (input: string, init?: RequestInit) => {
      const method = init?.method ?? "GET";
      const body = init?.body ? JSON.parse(String(init.body)) : undefined;
      const { status, body: payload } = this.handle(method, input, body);
      return new Response(JSON.stringify(payload), {
        status,
        headers: { "Content-Type": "application/json" },
      });
    };
  }
}
