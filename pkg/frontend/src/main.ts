import { ReviewApi } from "./api.js";
import { renderApp } from "./render.js";
import { ReviewStore } from "./state.js";

function apiBaseUrl(): string {
  const override = new URLSearchParams(window.location.search).get("api");
  if (override) return override.replace(/\/$/, "");
  return "http://127.0.0.1:8341";
}

function mount(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing mount point #${id}`);
  return node;
}

const mounts = {
  queue: mount("queue"),
  detail: mount("detail"),
  progress: mount("progress"),
  notice: mount("notice"),
};

const api = new ReviewApi(apiBaseUrl());
const store = new ReviewStore(api, (state) => renderApp(state, mounts, handlers));

const handlers = {
  onSelect: (id: number) => void store.selectItem(id),
  onPage: (page: number) => void store.setPage(page),
  onDecision: (action: "approve" | "reject" | "relabel", label?: 0 | 1) =>
    void store.submitDecision(action, label),
  onFinalize: () => void store.finalize(),
};

const filter = document.getElementById("status-filter") as HTMLSelectElement | null;
filter?.addEventListener("change", () => void store.setStatusFilter(filter.value));

void store.refreshQueue().then(() => store.refreshProgress());
