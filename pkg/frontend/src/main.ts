import { ApiClient } from "./api.js";
import { ReviewGrid } from "./review.js";
import { ReviewSession } from "./session.js";
import { InclusionSurveyView, QualitySurveyView } from "./surveys.js";
import type { Meta, RespondentProfile, TaskKind } from "./types.js";

function el<T extends HTMLElement = HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function profileForm(meta: Meta, mode: TaskKind, onReady: (p: RespondentProfile) => void): void {
  const root = el("app");
  const needsProfile = mode !== "annotation-review";
  const values = meta.attribute.values
    .map((v) => `<option value="${v}">${v}</option>`)
    .join("");
  const genders = meta.gender_categories
    .map((g) => `<option value="${g}">${g}</option>`)
    .join("");
  root.innerHTML = `
    <form id="profile">
      <label>Your id <input name="respondent" required></label>
      ${
        needsProfile
          ? `<label>How do you identify (${meta.attribute.name})? <select name="value">${values}</select></label>
             <label>Your age <input name="age" type="number" min="0" max="120"></label>
             <label>Your gender <select name="gender">${genders}</select></label>`
          : ""
      }
      <button type="submit">start</button>
    </form>`;
  el<HTMLFormElement>("profile").addEventListener("submit", (e) => {
    e.preventDefault();
    const data = new FormData(e.target as HTMLFormElement);
    onReady({
      respondentId: String(data.get("respondent") ?? "anonymous"),
      declaredValue: String(data.get("value") ?? meta.attribute.values[0] ?? ""),
      declaredAge: data.get("age") ? Number(data.get("age")) : undefined,
      declaredGender: data.get("gender") ? String(data.get("gender")) : undefined,
    });
  });
}

async function start(): Promise<void> {
  const params = new URLSearchParams(location.search);
  const api = new ApiClient(params.get("api") ?? "", params.get("token") ?? undefined);
  const mode = (params.get("mode") ?? "annotation-review") as TaskKind;
  const meta = await api.meta();

  profileForm(meta, mode, async (profile) => {
    const session = new ReviewSession(api, mode, profile, {
      onOffline: () => {
        el("status").textContent =
          `offline: ${session.queue.pending} submissions queued; they replay in order`;
      },
      onAccepted: () => {
        el("status").textContent = `${session.queue.pending} pending`;
      },
    });
    await session.load();
    const root = el("app");
    if (mode === "annotation-review") {
      new ReviewGrid(root, api, session, meta).mount();
    } else if (mode === "inclusion-survey") {
      new InclusionSurveyView(root, api, session).mount();
    } else {
      new QualitySurveyView(root, api, session).mount();
    }
    // drain anything still queued when connectivity returns
    window.addEventListener("online", () => void session.queue.drain());
  });
}

start().catch((err) => {
  document.body.innerHTML = `<pre class="fatal">${String(err)}</pre>`;
});
