import { ApiError, ReviewApi } from "./api.js";
import type {
  AppNotice,
  DecisionAction,
  FinalizeResponse,
  ItemDetail,
  Progress,
  QueuePage,
} from "./types.js";

export interface AppState {
  page: number;
  pageSize: number;
  statusFilter: string;
  queue: QueuePage | null;
  selected: ItemDetail | null;
  progress: Progress | null;
  notice: AppNotice | null;
  busy: boolean;
  finalized: FinalizeResponse | null;
}

/**
 * Single source of truth for the client.
 *
 * Never optimistic: every mutation goes to the server and the visible state
 * is refetched (or taken from the server's response), so a displayed status
 * is always server-confirmed. Errors leave the queue position untouched.
 */
export class ReviewStore {
  state: AppState = {
    page: 0,
    pageSize: 20,
    statusFilter: "pending",
    queue: null,
    selected: null,
    progress: null,
    notice: null,
    busy: false,
    finalized: null,
  };

  constructor(
    private readonly api: ReviewApi,
    private readonly onChange: (state: AppState) => void = () => {},
  ) {}

  private emit(): void {
    this.onChange(this.state);
  }

  private setNotice(notice: AppNotice | null): void {
    this.state.notice = notice;
    this.emit();
  }

  private async guard<T>(
    work: () => Promise<T>,
    keepNotice = false,
  ): Promise<T | undefined> {
    this.state.busy = true;
    if (!keepNotice) this.state.notice = null;
    this.emit();
    try {
      return await work();
    } catch (err) {
      if (err instanceof ApiError) {
        this.setNotice({
          kind: err.isConflict ? "conflict" : "error",
          text: err.detail,
        });
      } else {
        this.setNotice({ kind: "error", text: String(err) });
      }
      return undefined;
    } finally {
      this.state.busy = false;
      this.emit();
    }
  }

  async refreshQueue(): Promise<void> {
    await this.guard(async () => {
      this.state.queue = await this.api.queue(
        this.state.page,
        this.state.pageSize,
        this.state.statusFilter,
      );
    });
  }

  async refreshProgress(): Promise<void> {
    await this.guard(async () => {
      this.state.progress = await this.api.progress();
    });
  }

  async selectItem(id: number): Promise<void> {
    await this.guard(async () => {
      this.state.selected = await this.api.item(id);
    });
  }

  async setPage(page: number): Promise<void> {
    this.state.page = Math.max(0, page);
    await this.refreshQueue();
  }

  async setStatusFilter(filter: string): Promise<void> {
    this.state.statusFilter = filter;
    this.state.page = 0;
    await this.refreshQueue();
  }

  /**
   * Post a decision for the selected item, then re-sync item, queue, and
   * progress from the server. A 409 conflict re-syncs the item (the server
   * state wins) but keeps the current page and selection.
   */
  async submitDecision(action: DecisionAction, label?: 0 | 1): Promise<void> {
    const selected = this.state.selected;
    if (!selected) return;
    const outcome = await this.guard(() =>
      this.api.decide(selected.id, label === undefined ? { action } : { action, label }),
    );
    // re-sync regardless: on success show the recorded state, on conflict
    // show whatever the server actually holds
    await this.guard(async () => {
      this.state.selected = await this.api.item(selected.id);
      this.state.queue = await this.api.queue(
        this.state.page,
        this.state.pageSize,
        this.state.statusFilter,
      );
      this.state.progress = await this.api.progress();
    }, true);
    if (outcome) {
      this.setNotice({
        kind: "info",
        text:
          outcome.status === "recorded"
            ? `decision recorded: item ${selected.id} ${outcome.item.status}`
            : "decision unchanged (already recorded)",
      });
    }
  }

  async finalize(): Promise<void> {
    const result = await this.guard(() => this.api.finalize());
    if (result) {
      this.state.finalized = result;
      this.setNotice({
        kind: "info",
        text: `finalized: ${result.size} reviewed pseudo-labels emitted`,
      });
    }
    await this.guard(async () => {
      this.state.progress = await this.api.progress();
    }, true);
  }
}
