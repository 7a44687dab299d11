import { ApiClient } from "./api.js";
import { SubmissionQueue, newEventId, type QueueEvents } from "./queue.js";
import type {
  AnnotationValue,
  CorrectionField,
  InclusionAnswer,
  RespondentProfile,
  ReviewTask,
  TaskKind,
} from "./types.js";

export const CORRECTION_FIELDS: CorrectionField[] = [
  "race",
  "age",
  "gender",
  "relevance",
  "quality",
];

export type TaskOutcome = "accepted-as-is" | "corrected" | "answered" | "skipped";

export interface ActivityEntry {
  taskId: string;
  outcome: TaskOutcome;
}

/**
 * One reviewer/respondent working through a task list. The cursor only
 * moves through explicit actions; skipping is itself an action that gets
 * recorded, so no task can be passed over silently.
 */
export class ReviewSession {
  readonly queue: SubmissionQueue;
  tasks: ReviewTask[] = [];
  cursor = 0;
  activity: ActivityEntry[] = [];
  lastError: string | null = null;

  constructor(
    private readonly api: ApiClient,
    readonly mode: TaskKind,
    readonly profile: RespondentProfile,
    queueEvents: QueueEvents = {},
  ) {
    this.queue = new SubmissionQueue(api, {
      ...queueEvents,
      onRejected: (item, error) => {
        this.lastError = error.detail;
        queueEvents.onRejected?.(item, error);
      },
    });
  }

  async load(): Promise<void> {
    // survey respondents are routed only to sets for their declared value
    const value = this.mode === "annotation-review" ? undefined : this.profile.declaredValue;
    this.tasks = await this.api.tasks(this.mode, value);
    this.cursor = 0;
  }

  get current(): ReviewTask | undefined {
    return this.tasks[this.cursor];
  }

  get done(): boolean {
    return this.cursor >= this.tasks.length;
  }

  get progress(): { done: number; total: number } {
    return { done: this.activity.length, total: this.tasks.length };
  }

  private advance(taskId: string, outcome: TaskOutcome): void {
    this.activity.push({ taskId, outcome });
    this.cursor += 1;
  }

  /** Explicit skip: recorded, never silent. */
  skip(): void {
    const task = this.current;
    if (task) this.advance(task.task_id, "skipped");
  }

  /**
   * Review mode: post one correction per changed field. ``"-"`` marks a
   * field unlabeled. Unchanged fields produce no traffic, so accept-all
   * is zero corrections.
   */
  async submitReview(edits: Partial<Record<CorrectionField, AnnotationValue>>): Promise<number> {
    const task = this.requireTask("annotation-review");
    const imageId = task.image_set[0];
    if (imageId === undefined) throw new Error("review task has no image");
    const labels = task.current_labels ?? {};
    let posted = 0;
    for (const field of CORRECTION_FIELDS) {
      const edited = edits[field];
      if (edited === undefined || edited === labels[field]) continue;
      this.queue.enqueue({
        kind: "correction",
        body: {
          reviewer_id: this.profile.respondentId,
          image_id: imageId,
          field,
          new_value: edited,
          old_value: labels[field] ?? null,
          event_id: newEventId(),
        },
      });
      posted += 1;
    }
    this.advance(task.task_id, posted > 0 ? "corrected" : "accepted-as-is");
    await this.queue.drain();
    return posted;
  }

  acceptAll(): Promise<number> {
    return this.submitReview({});
  }

  /** Inclusion survey: an unanswered set cannot be submitted. */
  async submitInclusionAnswer(answer: InclusionAnswer | null): Promise<void> {
    const task = this.requireTask("inclusion-survey");
    if (answer === null) throw new Error("select both, either, or none before submitting");
    this.queue.enqueue({
      kind: "survey",
      body: {
        respondent_id: this.profile.respondentId,
        declared_value: this.profile.declaredValue,
        declared_age: this.profile.declaredAge,
        declared_gender: this.profile.declaredGender,
        task_id: task.task_id,
        answer,
        event_id: newEventId(),
      },
    });
    this.advance(task.task_id, "answered");
    await this.queue.drain();
  }

  /** Quality survey: the respondent toggles the images they would use. */
  async submitQualitySelection(selectedImageIds: ReadonlySet<string>): Promise<void> {
    const task = this.requireTask("quality-survey");
    for (const id of selectedImageIds) {
      if (!task.image_set.includes(id)) throw new Error(`image ${id} is not part of this set`);
    }
    this.queue.enqueue({
      kind: "survey",
      body: {
        respondent_id: this.profile.respondentId,
        declared_value: this.profile.declaredValue,
        declared_age: this.profile.declaredAge,
        declared_gender: this.profile.declaredGender,
        task_id: task.task_id,
        selected_count: selectedImageIds.size,
        event_id: newEventId(),
      },
    });
    this.advance(task.task_id, "answered");
    await this.queue.drain();
  }

  private requireTask(kind: TaskKind): ReviewTask {
    const task = this.current;
    if (!task) throw new Error("no task at cursor");
    if (task.kind !== kind) throw new Error(`expected a ${kind} task, got ${task.kind}`);
    return task;
  }
}
