import { ApiClient } from "./api.js";
import { ReviewSession } from "./session.js";
import type { InclusionAnswer } from "./types.js";

/**
 * Inclusion questionnaire: the respondent looks at one 5-image set and
 * says whether the most inclusive image matches their age, gender, both,
 * or none. Submitting requires an answer.
 */
export class InclusionSurveyView {
  private answer: InclusionAnswer | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly session: ReviewSession,
  ) {}

  mount(): void {
    this.render();
  }

  async submit(): Promise<void> {
    try {
      await this.session.submitInclusionAnswer(this.answer);
      this.answer = null;
    } catch (err) {
      this.session.lastError = String(err);
    }
    this.render();
  }

  render(): void {
    const task = this.session.current;
    const { done, total } = this.session.progress;
    if (!task) {
      this.root.innerHTML = `<p class="done">survey complete: ${done}/${total} sets answered</p>`;
      return;
    }
    const images = task.image_set
      .map((id) => `<img src="${this.api.imageUrl(id)}" alt="${id}">`)
      .join("");
    const choices = (["both", "either", "none"] as InclusionAnswer[])
      .map(
        (a) =>
          `<label><input type="radio" name="answer" value="${a}"${
            this.answer === a ? " checked" : ""
          }> ${a}</label>`,
      )
      .join(" ");
    this.root.innerHTML = `
      <div class="survey-task">
        <p class="progress">set ${done + 1} of ${total} — ${task.context.query} / ${task.context.conditioned_value}</p>
        <div class="image-set">${images}</div>
        <p>Is the most inclusive image inclusive towards your age, gender, both, or none?</p>
        <div class="choices">${choices}</div>
        <p class="error">${this.session.lastError ?? ""}</p>
        <button data-action="submit" ${this.answer === null ? "disabled" : ""}>submit</button>
      </div>`;
    for (const input of this.root.querySelectorAll<HTMLInputElement>('input[name="answer"]')) {
      input.addEventListener("change", () => {
        this.answer = input.value as InclusionAnswer;
        this.render();
      });
    }
    this.root
      .querySelector('[data-action="submit"]')
      ?.addEventListener("click", () => void this.submit());
  }
}

/**
 * Quality preference survey: the respondent toggles the images in the
 * set they would actually use in a project; the selected count is what
 * gets submitted.
 */
export class QualitySurveyView {
  private selected = new Set<string>();

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly session: ReviewSession,
  ) {}

  mount(): void {
    this.render();
  }

  async submit(): Promise<void> {
    try {
      await this.session.submitQualitySelection(this.selected);
      this.selected = new Set();
    } catch (err) {
      this.session.lastError = String(err);
    }
    this.render();
  }

  render(): void {
    const task = this.session.current;
    const { done, total } = this.session.progress;
    if (!task) {
      this.root.innerHTML = `<p class="done">survey complete: ${done}/${total} sets answered</p>`;
      return;
    }
    const images = task.image_set
      .map(
        (id) =>
          `<figure class="${this.selected.has(id) ? "selected" : ""}">
             <img data-image="${id}" src="${this.api.imageUrl(id)}" alt="${id}">
           </figure>`,
      )
      .join("");
    this.root.innerHTML = `
      <div class="survey-task">
        <p class="progress">set ${done + 1} of ${total} — ${task.context.query} / ${task.context.conditioned_value}</p>
        <p>Click every image you would use in a project (${this.selected.size} of ${task.image_set.length} selected).</p>
        <div class="image-set">${images}</div>
        <p class="error">${this.session.lastError ?? ""}</p>
        <button data-action="submit">submit selection</button>
      </div>`;
    for (const img of this.root.querySelectorAll<HTMLImageElement>("img[data-image]")) {
      img.addEventListener("click", () => {
        const id = img.dataset.image!;
        if (this.selected.has(id)) this.selected.delete(id);
        else this.selected.add(id);
        this.render();
      });
    }
    this.root
      .querySelector('[data-action="submit"]')
      ?.addEventListener("click", () => void this.submit());
  }
}
