import { ApiClient } from "./api.js";
import { ReviewSession, CORRECTION_FIELDS } from "./session.js";
import type { AnnotationValue, CorrectionField, Meta } from "./types.js";

const FIELD_KEYS: Record<string, CorrectionField> = {
  r: "race",
  a: "age",
  g: "gender",
  v: "relevance",
  q: "quality",
};

function coerce(field: CorrectionField, raw: string): AnnotationValue {
  if (raw === "-") return "-";
  if (field === "age" || field === "relevance" || field === "quality") {
    const n = Number(raw);
    if (Number.isNaN(n)) throw new Error(`${field}: not a number: ${raw}`);
    return n;
  }
  return raw;
}

/**
 * Keyboard-first single-image review grid: the reviewer either accepts
 * the model labels unchanged (Enter), edits fields (hotkey per field),
 * marks the image unlabeled (-) or records an explicit skip (s).
 */
export class ReviewGrid {
  private edits: Partial<Record<CorrectionField, AnnotationValue>> = {};
  private keyHandler = (e: KeyboardEvent) => this.onKey(e);

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly session: ReviewSession,
    private readonly meta: Meta,
  ) {}

  mount(): void {
    document.addEventListener("keydown", this.keyHandler);
    this.render();
  }

  unmount(): void {
    document.removeEventListener("keydown", this.keyHandler);
  }

  private onKey(e: KeyboardEvent): void {
    const target = e.target as HTMLElement | null;
    if (target && (target.tagName === "INPUT" || target.tagName === "SELECT")) return;
    if (e.key === "Enter") {
      e.preventDefault();
      void this.submit();
    } else if (e.key === "s") {
      e.preventDefault();
      this.session.skip();
      this.edits = {};
      this.render();
    } else if (e.key in FIELD_KEYS) {
      e.preventDefault();
      this.focusField(FIELD_KEYS[e.key]!);
    } else if (e.key === "-") {
      e.preventDefault();
      for (const field of CORRECTION_FIELDS) this.edits[field] = "-";
      this.render();
    }
  }

  private focusField(field: CorrectionField): void {
    this.root.querySelector<HTMLInputElement>(`[data-field="${field}"]`)?.focus();
  }

  async submit(): Promise<void> {
    await this.session.submitReview(this.edits);
    this.edits = {};
    this.render();
  }

  private fieldOptions(field: CorrectionField): string[] | null {
    if (field === "race") return [...this.meta.attribute.values, "-"];
    if (field === "gender") return [...this.meta.gender_categories, "-"];
    if (field === "relevance") return ["0", "0.5", "1", "-"];
    if (field === "quality") return ["1", "2", "3", "-"];
    return null;
  }

  render(): void {
    const task = this.session.current;
    const { done, total } = this.session.progress;
    if (!task) {
      this.root.innerHTML = `<p class="done">review complete: ${done}/${total} tasks handled, ${this.session.queue.pending} pending uploads</p>`;
      return;
    }
    const imageId = task.image_set[0]!;
    const labels = task.current_labels ?? {};
    const rows = CORRECTION_FIELDS.map((field) => {
      const current = labels[field] ?? "-";
      const edited = this.edits[field];
      const options = this.fieldOptions(field);
      const control = options
        ? `<select data-field="${field}">${options
            .map(
              (o) =>
                `<option value="${o}"${String(edited ?? current) === o ? " selected" : ""}>${o}</option>`,
            )
            .join("")}</select>`
        : `<input data-field="${field}" value="${edited ?? current}" size="6">`;
      return `<tr><td>${field}</td><td class="model-label">${current}</td><td>${control}</td></tr>`;
    }).join("");
    this.root.innerHTML = `
      <div class="review-task">
        <p class="progress">task ${done + 1} of ${total} — ${task.context.query}${
          task.context.conditioned_value ? ` / ${task.context.conditioned_value}` : ""
        }</p>
        <img class="review-image" src="${this.api.imageUrl(imageId)}" alt="${imageId}">
        <table><tr><th>field</th><th>model</th><th>corrected</th></tr>${rows}</table>
        <p class="error">${this.session.lastError ?? ""}</p>
        <p class="hint">Enter accept/submit · s skip · r/a/g/v/q jump to field · - unlabel all</p>
        <button data-action="accept">accept (Enter)</button>
        <button data-action="skip">skip (s)</button>
      </div>`;
    this.root.querySelector('[data-action="accept"]')?.addEventListener("click", () => void this.submit());
    this.root.querySelector('[data-action="skip"]')?.addEventListener("click", () => {
      this.session.skip();
      this.edits = {};
      this.render();
    });
    for (const field of CORRECTION_FIELDS) {
      const el = this.root.querySelector<HTMLInputElement | HTMLSelectElement>(
        `[data-field="${field}"]`,
      );
      el?.addEventListener("change", () => {
        try {
          this.edits[field] = coerce(field, el.value);
        } catch (err) {
          this.session.lastError = String(err);
          this.render();
        }
      });
    }
  }
}
