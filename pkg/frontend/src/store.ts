/** Review-session state machine: queue paging, keyboard selection,
 *  optimistic decisions with rollback on revision conflicts.
 *
 *  The store never fabricates state: tallies increment only after the server
 *  acknowledged a decision, and every mutation goes through ApiClient.
 */

import { ApiClient, ApiRequestError } from "./api.js";
import type { DecisionKind, ReviewItem, ServerStats } from "./types.js";

export interface SessionTally {
  accepted: number;
  rejected: number;
  edited: number;
}

export interface QueueState {
  items: ReviewItem[];
  page: number;
  remaining: number;
  selected: number;
  tally: SessionTally;
  error: string | null;
  conflicts: Set<string>;
  loading: boolean;
  submitting: boolean;
  complete: boolean;
}

export type Listener = (state: QueueState) => void;

function emptyState(): QueueState {
  return {
    items: [],
    page: 1,
    remaining: 0,
    selected: 0,
    tally: { accepted: 0, rejected: 0, edited: 0 },
    error: null,
    conflicts: new Set(),
    loading: false,
    submitting: false,
    complete: false,
  };
}

export class ReviewStore {
  readonly state: QueueState = emptyState();
  private listeners: Listener[] = [];

  constructor(
    private readonly api: ApiClient,
    private readonly reviewer: string = "curator",
  ) {}

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  get selectedItem(): ReviewItem | null {
    return this.state.items[this.state.selected] ?? null;
  }

  async loadQueue(page = 1): Promise<void> {
    this.state.loading = true;
    this.state.error = null;
    this.emit();
    try {
      const queue = await this.api.fetchQueue(page);
      this.state.items = queue.items;
      this.state.page = queue.page;
      this.state.remaining = queue.remaining;
      this.state.selected = 0;
      this.state.complete = queue.remaining === 0;
    } catch (error) {
      // failures leave the current list untouched; the banner offers retry
      this.state.error = error instanceof Error ? error.message : String(error);
    } finally {
      this.state.loading = false;
      this.emit();
    }
  }

  /** j/k navigation; clamps to the list bounds. */
  select(delta: number): void {
    if (this.state.items.length === 0) return;
    const next = this.state.selected + delta;
    this.state.selected = Math.min(Math.max(next, 0), this.state.items.length - 1);
    this.emit();
  }

  async submit(decision: DecisionKind, editedAnswer?: string): Promise<boolean> {
    const item = this.selectedItem;
    if (item === null || this.state.submitting) return false;
    if (decision === "edit" && !(editedAnswer ?? "").trim()) {
      this.state.error = "Edit needs a non-empty replacement answer";
      this.emit();
      return false;
    }

    // optimistic removal; the snapshot restores the row on failure
    const index = this.state.selected;
    this.state.items = this.state.items.filter((_, i) => i !== index);
    this.state.selected = Math.min(index, Math.max(this.state.items.length - 1, 0));
    this.state.submitting = true;
    this.state.error = null;
    this.state.conflicts.delete(item.qa_id);
    this.emit();

    try {
      await this.api.submitDecision(item.qa_id, {
        decision,
        reviewer: this.reviewer,
        expected_revision: item.revision,
        ...(decision === "edit" ? { edited_answer: editedAnswer } : {}),
      });
      if (decision === "accept") this.state.tally.accepted += 1;
      if (decision === "reject") this.state.tally.rejected += 1;
      if (decision === "edit") this.state.tally.edited += 1;
      this.state.remaining = Math.max(this.state.remaining - 1, 0);
      this.state.complete = this.state.remaining === 0 && this.state.items.length === 0;
      return true;
    } catch (error) {
      this.state.items = [
        ...this.state.items.slice(0, index),
        item,
        ...this.state.items.slice(index),
      ];
      this.state.selected = index;
      if (error instanceof ApiRequestError && error.isRevisionConflict) {
        this.state.conflicts.add(item.qa_id);
        this.state.error = `Revision conflict on ${item.qa_id}; refresh to pick up the latest decision`;
      } else {
        this.state.error = error instanceof Error ? error.message : String(error);
      }
      return false;
    } finally {
      this.state.submitting = false;
      this.emit();
    }
  }

  /** Session tally plus the server snapshot; degrades to session-only. */
  async sessionStats(): Promise<{ tally: SessionTally; server: ServerStats | null }> {
    try {
      return { tally: { ...this.state.tally }, server: await this.api.fetchStats() };
    } catch {
      return { tally: { ...this.state.tally }, server: null };
    }
  }
}

/** Maps review-screen keys to store actions; returns true when handled. */
export async function handleKey(
  store: ReviewStore,
  key: string,
  promptForEdit: () => string | null,
): Promise<boolean> {
  switch (key) {
    case "j":
      store.select(1);
      return true;
    case "k":
      store.select(-1);
      return true;
    case "a":
      await store.submit("accept");
      return true;
    case "r":
      await store.submit("reject");
      return true;
    case "e": {
      const replacement = promptForEdit();
      if (replacement === null) return true; // curator cancelled
      await store.submit("edit", replacement);
      return true;
    }
    default:
      return false;
  }
}
