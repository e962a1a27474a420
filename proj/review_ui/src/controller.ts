// Session state for one browser tab. The DOM layer renders `state` and forwards
// user intents here; tests drive the same object against a live server.

import { ApiError, ReviewApi, UnreachableError, type CheckName, type ItemDetail, type PendingPage, type Progress } from "./api.js";
import {
  cycleCheck,
  emptyChecks,
  errorLine,
  fieldForServerError,
  gateDecision,
  shortcutAction,
  type DecisionForm,
  type DecisionKind,
  type FormField,
} from "./viewmodel.js";

export interface InlineError {
  message: string;
  line: number | null;
}

export interface ReviewState {
  banner: string | null;  // API unreachable; the UI offers a retry
  queue: PendingPage | null;
  progress: Progress | null;
  filter: string;
  page: number;
  current: ItemDetail | null;
  form: DecisionForm | null;
  errors: Partial<Record<FormField, InlineError>>;
  notice: string | null;
  busy: boolean;
}

export type DecideOutcome = "sent" | "blocked" | "conflict" | "invalid" | "failed";

export class ReviewController {
  state: ReviewState = {
    banner: null,
    queue: null,
    progress: null,
    filter: "",
    page: 1,
    current: null,
    form: null,
    errors: {},
    notice: null,
    busy: false,
  };
  private listeners: Array<(s: ReviewState) => void> = [];
  private lastAction: (() => Promise<unknown>) | null = null;

  constructor(
    private readonly api: ReviewApi,
    private readonly pageSize = 20,
    private readonly reviewer = "",
  ) {}

  subscribe(fn: (s: ReviewState) => void): void {
    this.listeners.push(fn);
  }

  get allReviewed(): boolean {
    return this.state.queue !== null && this.state.queue.total_items === 0;
  }

  async loadQueue(): Promise<void> {
    await this.guard(async () => {
      const page = await this.api.pending({ page: this.state.page, pageSize: this.pageSize, cwe: this.state.filter || undefined });
      if (page.items.length === 0 && page.total_items > 0 && this.state.page > 1) {
        this.state.page = page.total_pages;
        return this.loadQueue();
      }
      this.state.queue = page;
      this.state.progress = page.progress;
    }, () => this.loadQueue());
  }

  async setFilter(cwe: string): Promise<void> {
    this.state.filter = cwe;
    this.state.page = 1;
    await this.loadQueue();
  }

  async setPage(page: number): Promise<void> {
    this.state.page = Math.max(1, page);
    await this.loadQueue();
  }

  async retry(): Promise<void> {
    if (this.lastAction) await this.lastAction();
  }

  async open(id: string): Promise<void> {
    await this.guard(async () => {
      const item = await this.api.item(id);
      this.state.current = item;
      this.state.form = {
        kind: "accept",
        checks: item.review_state.state === "pending" ? emptyChecks() : item.checks,
        reason: "",
        original: { vulnerable: item.vulnerable, fixed: item.fixed },
        vulnerable: item.vulnerable,
        fixed: item.fixed,
        reviewer: this.reviewer,
      };
      this.state.errors = {};
    }, () => this.open(id));
  }

  setCheck(name: CheckName, value: boolean | null, note?: string): void {
    if (!this.state.form) return;
    this.state.form.checks[name] = { value, note: note ?? this.state.form.checks[name].note };
    delete this.state.errors.checks;
    this.emit();
  }

  setReason(reason: string): void {
    if (!this.state.form) return;
    this.state.form.reason = reason;
    delete this.state.errors.reason;
    this.emit();
  }

  setSnippet(side: "vulnerable" | "fixed", text: string): void {
    if (!this.state.form) return;
    this.state.form[side] = text;
    delete this.state.errors[side];
    this.emit();
  }

  async decide(kind: DecisionKind): Promise<DecideOutcome> {
    const { current, form } = this.state;
    if (!current || !form) return "blocked";
    form.kind = kind;
    const gate = gateDecision(form);
    if (!gate.ok) {
      this.state.errors = { [gate.field]: { message: gate.message, line: errorLine(gate.message) } };
      this.emit();
      return "blocked";
    }
    // Optimistic: drop the row now, put it back if the server refuses.
    const before = this.state.queue;
    if (before) {
      this.state.queue = { ...before, items: before.items.filter((i) => i.id !== current.id) };
    }
    this.state.busy = true;
    this.emit();
    try {
      await this.api.decide(current.id, gate.payload);
      this.state.notice = `${current.id}: ${kind === "edit" ? "edited and accepted" : kind + "ed"}`;
      this.state.errors = {};
      await this.loadQueue();
      await this.openNextAfter(current.id, before);
      return "sent";
    } catch (e) {
      this.state.queue = before;
      if (e instanceof ApiError && e.status === 409) {
        this.state.notice = "conflict: " + e.message;
        await this.open(current.id);
        await this.loadQueue();
        return "conflict";
      }
      if (e instanceof ApiError && e.status === 422) {
        this.state.errors = { [fieldForServerError(e.message)]: { message: e.message, line: errorLine(e.message) } };
        return "invalid";
      }
      this.fail(e, () => this.decide(kind));
      return "failed";
    } finally {
      this.state.busy = false;
      this.emit();
    }
  }

  async next(): Promise<void> {
    const items = this.state.queue?.items ?? [];
    if (items.length === 0) return;
    const at = this.state.current ? items.findIndex((i) => i.id === this.state.current!.id) : -1;
    const target = items[(at + 1) % items.length];
    await this.open(target.id);
  }

  async previous(): Promise<void> {
    const items = this.state.queue?.items ?? [];
    if (items.length === 0) return;
    const at = this.state.current ? items.findIndex((i) => i.id === this.state.current!.id) : 0;
    await this.open(items[(at - 1 + items.length) % items.length].id);
  }

  async handleKey(key: string, typing = false): Promise<boolean> {
    const action = shortcutAction(key, typing);
    if (!action) return false;
    switch (action.type) {
      case "decide":
        await this.decide(action.kind);
        break;
      case "next":
        await this.next();
        break;
      case "previous":
        await this.previous();
        break;
      case "toggle":
        if (this.state.form) this.setCheck(action.check, cycleCheck(this.state.form.checks[action.check].value));
        break;
    }
    return true;
  }

  private async openNextAfter(decidedId: string, before: PendingPage | null): Promise<void> {
    const remaining = this.state.queue?.items ?? [];
    if (remaining.length === 0) {
      this.state.current = null;
      this.state.form = null;
      return;
    }
    const order = before?.items.map((i) => i.id) ?? [];
    const pos = order.indexOf(decidedId);
    const following = order.slice(pos + 1).find((id) => remaining.some((r) => r.id === id));
    await this.open(following ?? remaining[0].id);
  }

  private async guard(body: () => Promise<void>, again: () => Promise<unknown>): Promise<void> {
    try {
      await body();
      this.state.banner = null;
    } catch (e) {
      this.fail(e, again);
    }
    this.emit();
  }

  private fail(e: unknown, again: () => Promise<unknown>): void {
    if (e instanceof UnreachableError) {
      this.state.banner = "review API unreachable: " + e.message;
      this.lastAction = again;
    } else if (e instanceof ApiError) {
      this.state.notice = `${e.code}: ${e.message}`;
    } else {
      this.state.notice = String(e);
    }
  }

  private emit(): void {
    for (const fn of this.listeners) fn(this.state);
  }
}
