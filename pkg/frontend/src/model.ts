// View model for the annotator console: pure state, no DOM.

import type {
  AnnotationRequest,
  LabelAck,
  RunReport,
  ServerState,
} from "./api.js";

export type Connection = "ok" | "down";

export class ConsoleViewModel {
  state: ServerState | null = null;
  queue: AnnotationRequest[] = [];
  classes: string[] = [];
  report: RunReport | null = null;
  connection: Connection = "ok";
  draftLabel = "";
  submitting = false;
  budgetExhausted = false;
  lastError: string | null = null;
  // labels this console has submitted, per cluster, as annotation context
  private submittedByCluster = new Map<number, string[]>();

  applyPoll(state: ServerState, queue: AnnotationRequest[], classes: string[]): void {
    // never touches draftLabel: a typed-but-unsubmitted label survives polls
    this.state = state;
    this.queue = queue;
    this.classes = classes;
    this.connection = "ok";
    if (state.budget && state.budget.total - state.budget.spent <= 0) {
      this.budgetExhausted = true;
    }
  }

  applyConnectionError(): void {
    this.connection = "down";
  }

  applyReport(report: RunReport): void {
    this.report = report;
  }

  get currentRequest(): AnnotationRequest | null {
    return this.queue.length ? this.queue[0] : null;
  }

  get queueDepth(): number {
    return this.queue.length;
  }

  get remainingBudget(): number | null {
    if (!this.state || !this.state.budget) return null;
    return this.state.budget.total - this.state.budget.spent;
  }

  /** Submission gate: an open request, budget left, and one flight at a time. */
  get canSubmit(): boolean {
    const remaining = this.remainingBudget;
    return (
      this.currentRequest !== null &&
      !this.submitting &&
      !this.budgetExhausted &&
      remaining !== null &&
      remaining > 0 &&
      this.draftLabel.trim().length > 0
    );
  }

  get banner(): string {
    if (this.connection === "down") return "service unreachable - retrying";
    if (!this.state) return "connecting";
    if (this.state.phase === "failed") return `session failed: ${this.state.error ?? "unknown"}`;
    if (this.budgetExhausted && !this.state.done) return "annotation budget exhausted";
    if (this.state.done) return "session complete";
    if (this.queue.length === 0) return `waiting for pipeline (${this.state.phase})`;
    return `annotating: ${this.state.phase}`;
  }

  /** Labels already assigned to the request's cluster peers by this console. */
  clusterContext(request: AnnotationRequest): string[] {
    if (request.cluster_id === null) return [];
    return this.submittedByCluster.get(request.cluster_id) ?? [];
  }

  beginSubmit(): void {
    this.submitting = true;
    this.lastError = null;
  }

  completeSubmit(request: AnnotationRequest, ack: LabelAck): void {
    this.submitting = false;
    this.draftLabel = "";
    if (request.cluster_id !== null) {
      const seen = this.submittedByCluster.get(request.cluster_id) ?? [];
      seen.push(ack.label);
      this.submittedByCluster.set(request.cluster_id, seen);
    }
    // optimistic gauge update; the next poll remains authoritative
    if (this.state && this.state.budget) {
      this.state.budget.spent = ack.spent;
    }
    this.queue = this.queue.filter((r) => r.request_id !== request.request_id);
  }

  failSubmit(status: number | null, message: string): void {
    this.submitting = false;
    if (status === 402) {
      this.budgetExhausted = true;
    }
    this.lastError = message;
  }
}
