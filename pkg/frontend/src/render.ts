import type { AppState } from "./state.js";
import type { Explanation, ItemDetail, ItemSummary, Progress } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function labelName(label: number): string {
  return label === 1 ? "attack" : "benign";
}

export function renderQueue(
  state: AppState,
  onSelect: (id: number) => void,
  onPage: (page: number) => void,
): HTMLElement {
  const root = el("div", "queue");
  const queue = state.queue;
  if (!queue) {
    root.appendChild(el("p", "placeholder", "loading queue..."));
    return root;
  }
  const table = el("table", "queue-table");
  const head = el("tr");
  for (const h of ["id", "ensemble", "margin", "status"]) {
    head.appendChild(el("th", undefined, h));
  }
  table.appendChild(head);
  for (const item of queue.items) {
    const row = el("tr", item.status === "pending" ? "row pending" : "row decided");
    row.dataset.itemId = String(item.id);
    if (state.selected?.id === item.id) row.classList.add("selected");
    row.appendChild(el("td", undefined, String(item.id)));
    row.appendChild(el("td", `label-${item.ensemble_label}`, labelName(item.ensemble_label)));
    row.appendChild(el("td", undefined, item.margin.toFixed(4)));
    row.appendChild(el("td", `status-${item.status}`, item.status));
    row.addEventListener("click", () => onSelect(item.id));
    table.appendChild(row);
  }
  root.appendChild(table);

  const pager = el("div", "pager");
  const prev = el("button", "page-prev", "< prev");
  prev.disabled = queue.page === 0;
  prev.addEventListener("click", () => onPage(queue.page - 1));
  const next = el("button", "page-next", "next >");
  next.disabled = (queue.page + 1) * queue.page_size >= queue.total;
  next.addEventListener("click", () => onPage(queue.page + 1));
  pager.appendChild(prev);
  pager.appendChild(
    el("span", "page-info", `page ${queue.page + 1} — ${queue.total} ${state.statusFilter} item(s)`),
  );
  pager.appendChild(next);
  root.appendChild(pager);
  return root;
}

export function renderExplanationBars(explanation: Explanation | null): HTMLElement {
  const root = el("div", "explanation");
  if (!explanation || explanation.contributions.length === 0) {
    root.appendChild(el("p", "placeholder", "no local explanation available"));
    return root;
  }
  // contributions arrive ordered by |weight|; keep that order for the bars
  const maxMagnitude = Math.max(
    ...explanation.contributions.map((c) => Math.abs(c.weight)),
    1e-12,
  );
  for (const c of explanation.contributions) {
    const row = el("div", "bar-row");
    row.appendChild(el("span", "bar-label", c.feature));
    const track = el("div", "bar-track");
    const bar = el(
      "div",
      c.weight >= 0 ? "bar bar-attack" : "bar bar-benign",
    );
    bar.style.width = `${Math.max(2, (100 * Math.abs(c.weight)) / maxMagnitude)}%`;
    bar.title = c.weight.toFixed(5);
    track.appendChild(bar);
    row.appendChild(track);
    row.appendChild(
      el("span", "bar-value", `${c.weight >= 0 ? "+" : "-"}${Math.abs(c.weight).toFixed(4)}`),
    );
    root.appendChild(row);
  }
  return root;
}

export function renderItemDetail(
  state: AppState,
  onDecision: (action: "approve" | "reject" | "relabel", label?: 0 | 1) => void,
): HTMLElement {
  const root = el("div", "detail");
  const item = state.selected;
  if (!item) {
    root.appendChild(el("p", "placeholder", "select a flow from the queue"));
    return root;
  }
  root.appendChild(el("h2", undefined, `flow ${item.id}`));
  const scores = el("p", "scores");
  scores.textContent =
    `ensemble: ${labelName(item.ensemble_label)}  ` +
    `(attack ${item.score_attack.toFixed(3)} vs benign ${item.score_benign.toFixed(3)})  ` +
    `status: ${item.status}` +
    (item.decided_label !== null ? ` -> ${labelName(item.decided_label)}` : "");
  root.appendChild(scores);

  root.appendChild(el("h3", undefined, "local explanation"));
  root.appendChild(renderExplanationBars(item.explanation));

  root.appendChild(el("h3", undefined, "decision"));
  const controls = el("div", "decision-controls");
  const terminal = item.status !== "pending";
  const mk = (
    text: string,
    action: "approve" | "reject" | "relabel",
    label?: 0 | 1,
  ) => {
    const b = el("button", `decide-${action}${label !== undefined ? `-${label}` : ""}`, text);
    b.disabled = terminal || state.busy;
    b.addEventListener("click", () => onDecision(action, label));
    controls.appendChild(b);
  };
  mk("approve", "approve");
  mk("reject", "reject");
  mk("relabel as benign", "relabel", 0);
  mk("relabel as attack", "relabel", 1);
  root.appendChild(controls);

  root.appendChild(el("h3", undefined, "features"));
  const table = el("table", "feature-table");
  for (const [name, value] of Object.entries(item.features)) {
    const row = el("tr");
    row.appendChild(el("td", "feature-name", name));
    row.appendChild(el("td", "feature-value", value.toFixed(6)));
    table.appendChild(row);
  }
  root.appendChild(table);
  return root;
}

export function renderProgress(progress: Progress | null, onFinalize: () => void): HTMLElement {
  const root = el("div", "progress");
  if (!progress) {
    root.appendChild(el("p", "placeholder", "loading progress..."));
    return root;
  }
  root.appendChild(
    el(
      "span",
      "progress-text",
      `${progress.decided}/${progress.total} decided ` +
        `(${progress.approved} approved, ${progress.rejected} rejected, ` +
        `${progress.relabelled} relabelled)`,
    ),
  );
  const track = el("div", "progress-track");
  const fill = el("div", "progress-fill");
  fill.style.width = progress.total
    ? `${(100 * progress.decided) / progress.total}%`
    : "0%";
  track.appendChild(fill);
  root.appendChild(track);
  const finalize = el("button", "finalize", "finalize reviewed set");
  finalize.disabled = progress.decided === 0;
  finalize.addEventListener("click", onFinalize);
  root.appendChild(finalize);
  return root;
}

export function renderNotice(state: AppState): HTMLElement {
  const root = el("div", "notice-area");
  if (state.notice) {
    root.appendChild(el("p", `notice notice-${state.notice.kind}`, state.notice.text));
  }
  if (state.finalized) {
    root.appendChild(
      el(
        "p",
        "notice notice-finalized",
        `reviewed pseudo-label set: ${state.finalized.size} rows` +
          (state.finalized.path ? ` -> ${state.finalized.path}` : ""),
      ),
    );
  }
  return root;
}

/** Re-render the whole app into the given mount points. */
export function renderApp(
  state: AppState,
  mounts: { queue: HTMLElement; detail: HTMLElement; progress: HTMLElement; notice: HTMLElement },
  handlers: {
    onSelect: (id: number) => void;
    onPage: (page: number) => void;
    onDecision: (action: "approve" | "reject" | "relabel", label?: 0 | 1) => void;
    onFinalize: () => void;
  },
): void {
  mounts.queue.replaceChildren(renderQueue(state, handlers.onSelect, handlers.onPage));
  mounts.detail.replaceChildren(renderItemDetail(state, handlers.onDecision));
  mounts.progress.replaceChildren(renderProgress(state.progress, handlers.onFinalize));
  mounts.notice.replaceChildren(renderNotice(state));
}

export type { ItemDetail, ItemSummary };
