/**
 * Queue state for the review session.
 *
 * The store is deliberately stateless beyond the service: it renders what
 * the service says, applies optimistic updates for snappy resolves, and
 * rolls back to server truth on any conflict.  Going offline keeps the
 * last fetched view on screen behind a stale banner (served from the
 * injected cache); a 401 flips the auth-required flag instead of retrying.
 */

import { ApiClient, AuthError, ConflictError, NetworkError, ServiceValidationError } from "./api.js";
import { validateForm } from "./codebook.js";
import type {
  Codebook,
  ItemSummary,
  Progress,
  QueueResponse,
  ResolutionForm,
  SubmitStatus,
} from "./types.js";

export interface ViewCache {
  load(): QueueResponse | null;
  save(view: QueueResponse): void;
}

export class MemoryCache implements ViewCache {
  private view: QueueResponse | null = null;
  load(): QueueResponse | null {
    return this.view;
  }
  save(view: QueueResponse): void {
    this.view = view;
  }
}

/** Browser cache backed by localStorage; falls back to memory elsewhere. */
export class LocalStorageCache implements ViewCache {
  constructor(private key = "crowdloop.queue.lastView") {}
  load(): QueueResponse | null {
    try {
      const raw = globalThis.localStorage?.getItem(this.key);
      return raw ? (JSON.parse(raw) as QueueResponse) : null;
    } catch {
      return null;
    }
  }
  save(view: QueueResponse): void {
    try {
      globalThis.localStorage?.setItem(this.key, JSON.stringify(view));
    } catch {
      /* quota or privacy mode: stale banner will simply never show a cache */
    }
  }
}

export interface QueueState {
  items: ItemSummary[];
  progress: Progress | null;
  stale: boolean;
  authRequired: boolean;
  lastError: string | null;
}

const EMPTY: QueueState = {
  items: [],
  progress: null,
  stale: false,
  authRequired: false,
  lastError: null,
};

export class QueueStore {
  state: QueueState = { ...EMPTY };
  codebook: Codebook | null = null;
  private inFlight = new Set<string>();
  private listeners: ((state: QueueState) => void)[] = [];

  constructor(
    private api: ApiClient,
    private cache: ViewCache = new MemoryCache(),
    public reviewerId = "reviewer",
  ) {}

  subscribe(listener: (state: QueueState) => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private set(partial: Partial<QueueState>): void {
    this.state = { ...this.state, ...partial };
    for (const listener of this.listeners) listener(this.state);
  }

  /** Fetch the codebook once; labels offered in forms come only from it. */
  async init(): Promise<void> {
    this.codebook = await this.api.fetchCodebook();
  }

  async refresh(limit = 50): Promise<QueueState> {
    try {
      const view = await this.api.fetchQueue(limit);
      this.cache.save(view);
      this.set({
        items: view.items,
        progress: view.progress,
        stale: false,
        authRequired: false,
        lastError: null,
      });
    } catch (err) {
      if (err instanceof AuthError) {
        this.set({ authRequired: true, lastError: err.message });
      } else if (err instanceof NetworkError) {
        const cached = this.cache.load();
        if (cached) {
          this.set({
            items: cached.items,
            progress: cached.progress,
            stale: true,
            lastError: err.message,
          });
        } else {
          this.set({ stale: true, lastError: err.message });
        }
      } else {
        throw err;
      }
    }
    return this.state;
  }

  /** Claim-on-open: advisory, fire-and-forget; never blocks reviewing. */
  noteOpened(item: ItemSummary): void {
    void this.api.claimItem(item.item_id, this.reviewerId).catch(() => undefined);
  }

  /** Default form for the one-keystroke accept of the provisional label. */
  provisionalForm(item: ItemSummary): ResolutionForm {
    const label = item.provisional_label;
    let name: string | null = null;
    let explanation: string | null = null;
    if (Array.isArray(label) && label.length > 0) {
      const first = label[0] as { name?: unknown; explanation?: unknown };
      name = typeof first.name === "string" ? first.name : null;
      explanation = typeof first.explanation === "string" ? first.explanation : null;
    }
    return {
      reviewer_id: this.reviewerId,
      final_name: name,
      final_explanation: explanation,
      final_labels: {},
    };
  }

  async acceptProvisional(item: ItemSummary): Promise<SubmitStatus> {
    return this.submit(item, this.provisionalForm(item));
  }

  async submit(item: ItemSummary, form: ResolutionForm): Promise<SubmitStatus> {
    if (!this.codebook) throw new Error("store not initialized: codebook missing");
    const errors = validateForm(this.codebook, form);
    if (errors.length > 0) {
      return { kind: "invalid", errors };   // rejected locally, no request sent
    }
    if (this.inFlight.has(item.item_id)) {
      return { kind: "in_flight" };          // double-click guard
    }
    this.inFlight.add(item.item_id);

    // optimistic: the card leaves the queue and progress ticks immediately
    const snapshotItems = this.state.items;
    const snapshotProgress = this.state.progress;
    this.set({
      items: this.state.items.filter((i) => i.item_id !== item.item_id),
      progress: snapshotProgress
        ? {
            ...snapshotProgress,
            pending: snapshotProgress.pending - 1,
            resolved: snapshotProgress.resolved + 1,
          }
        : null,
    });

    try {
      const status = await this.api.submitResolution(item.item_id, form);
      return { kind: status };
    } catch (err) {
      // roll the optimistic update back, then reconcile with server truth
      this.set({ items: snapshotItems, progress: snapshotProgress });
      if (err instanceof ConflictError) {
        await this.refresh();
        return { kind: "conflict", existing: err.existing };
      }
      if (err instanceof ServiceValidationError) {
        return { kind: "invalid", errors: [err.detail] };
      }
      throw err;
    } finally {
      this.inFlight.delete(item.item_id);
    }
  }
}
