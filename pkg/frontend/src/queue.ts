import { ApiClient, ApiError } from "./api.js";
import type { Acknowledgment, CorrectionSubmission, SurveySubmission } from "./types.js";

export type PendingSubmission =
  | { kind: "correction"; body: CorrectionSubmission }
  | { kind: "survey"; body: SurveySubmission };

export interface QueueEvents {
  onAccepted?: (item: PendingSubmission, ack: Acknowledgment) => void;
  /** Server rejected the submission (4xx): dropped from the queue, caller keeps the edit. */
  onRejected?: (item: PendingSubmission, error: ApiError) => void;
  /** Transport failure: the item stays queued for a later drain. */
  onOffline?: (item: PendingSubmission, error: unknown) => void;
}

export function newEventId(): string {
  if (typeof crypto !== "undefined" && "randomUUID" in crypto) return crypto.randomUUID();
  return `evt-${Date.now()}-${Math.random().toString(36).slice(2, 10)}`;
}

/**
 * Ordered submission queue. Items drain strictly in enqueue order; a
 * transport failure halts the drain with the item still at the head, and
 * the retry resends the same client event id, so the server-side dedupe
 * makes replay idempotent.
 */
export class SubmissionQueue {
  private items: PendingSubmission[] = [];
  private draining = false;

  constructor(
    private readonly api: ApiClient,
    private readonly events: QueueEvents = {},
  ) {}

  get pending(): number {
    return this.items.length;
  }

  snapshot(): PendingSubmission[] {
    return [...this.items];
  }

  enqueue(item: PendingSubmission): void {
    this.items.push(item);
  }

  /** Drain the queue head-first; resolves with the number of accepted items. */
  async drain(): Promise<number> {
    if (this.draining) return 0;
    this.draining = true;
    let accepted = 0;
    try {
      while (this.items.length > 0) {
        const item = this.items[0]!;
        let ack: Acknowledgment;
        try {
          ack =
            item.kind === "correction"
              ? await this.api.submitCorrection(item.body)
              : await this.api.submitSurvey(item.body);
        } catch (error) {
          if (error instanceof ApiError && error.isRejection) {
            this.items.shift();
            this.events.onRejected?.(item, error);
            continue;
          }
          this.events.onOffline?.(item, error);
          return accepted;
        }
        this.items.shift();
        accepted += 1;
        this.events.onAccepted?.(item, ack);
      }
      return accepted;
    } finally {
      this.draining = false;
    }
  }
}
