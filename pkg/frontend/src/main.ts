// Entry point: binds the session flow to the host page. One active session
// per tab; drafts persist locally between slots and across reloads.

import { ApiError, fetchSession } from "./api.js";
import { attemptSubmit } from "./controller.js";
import {
  canSubmit,
  emptyDrafts,
  loadDrafts,
  saveDrafts,
  setElapsed,
  setP1Text,
  setP2Text,
  setTop1,
  setTop2,
  toggleDefinitelyNot,
} from "./draft.js";
import { renderTask } from "./render.js";
import type { SessionInfo, SlotDraft } from "./types.js";

const BASE = "";

function byId(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing #${id} in host page`);
  return node;
}

async function startSession(annotatorId: string): Promise<void> {
  const taskHost = byId("task");
  const statusLine = byId("status");

  let session: SessionInfo;
  try {
    session = await fetchSession(BASE, annotatorId);
  } catch (err) {
    statusLine.textContent =
      err instanceof ApiError
        ? `could not start a session: ${err.message}`
        : "could not reach the service; check your connection and retry";
    return;
  }

  let drafts: SlotDraft[] =
    loadDrafts(session.session_id, session.slot_count, session.label_order) ??
    emptyDrafts(session.slot_count);
  let slot = 0;
  let shownAt = performance.now();

  const update = (mutate: (draft: SlotDraft) => SlotDraft): void => {
    const current = drafts[slot];
    if (current === undefined) return;
    drafts = drafts.map((d, i) => (i === slot ? mutate(d) : d));
    saveDrafts(session.session_id, drafts);
    redraw();
  };

  const handlers = {
    onTop1: (name: string) => update((d) => setTop1(d, name)),
    onTop2: (name: string | null) => update((d) => setTop2(d, name)),
    onP1Text: (text: string) => update((d) => setP1Text(d, text)),
    onP2Text: (text: string) => update((d) => setP2Text(d, text)),
    onToggleDefinitelyNot: (name: string) =>
      update((d) => toggleDefinitelyNot(d, name)),
  };

  const recordElapsed = (): void => {
    const seconds = (performance.now() - shownAt) / 1000;
    const current = drafts[slot];
    if (current === undefined) return;
    drafts = drafts.map((d, i) =>
      i === slot ? setElapsed(d, (d.elapsedSeconds ?? 0) + seconds) : d,
    );
    shownAt = performance.now();
  };

  const goTo = (next: number): void => {
    recordElapsed();
    slot = Math.min(Math.max(next, 0), session.slot_count - 1);
    saveDrafts(session.session_id, drafts);
    redraw();
  };

  const submit = async (): Promise<void> => {
    recordElapsed();
    statusLine.textContent = "submitting...";
    try {
      const ack = await attemptSubmit(BASE, session, drafts);
      statusLine.textContent = `thank you! ${ack.stored} answers recorded`;
      taskHost.replaceChildren();
    } catch (err) {
      // the draft is still saved locally; offer resubmission
      statusLine.textContent =
        err instanceof ApiError
          ? `the service declined the submission: ${err.message}`
          : "submission failed; your answers are saved, press submit to retry";
      redraw();
    }
  };

  const redraw = (): void => {
    const draft = drafts[slot];
    if (draft === undefined) return;
    renderTask(taskHost, session, slot, draft, handlers);

    const nav = document.createElement("div");
    nav.className = "nav";
    const prev = document.createElement("button");
    prev.textContent = "previous";
    prev.disabled = slot === 0;
    prev.addEventListener("click", () => goTo(slot - 1));
    const next = document.createElement("button");
    next.textContent = "next";
    next.disabled = slot === session.slot_count - 1;
    next.addEventListener("click", () => goTo(slot + 1));
    nav.append(prev, next);

    const submitButton = document.createElement("button");
    submitButton.textContent = "submit session";
    submitButton.disabled = !canSubmit(drafts);
    submitButton.addEventListener("click", () => void submit());
    nav.append(submitButton);

    taskHost.append(nav);
  };

  statusLine.textContent = "";
  redraw();
}

function bindStartForm(): void {
  const form = byId("start-form") as HTMLFormElement;
  const field = byId("annotator-id") as HTMLInputElement;
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const annotatorId = field.value.trim();
    if (annotatorId === "") return;
    form.hidden = true;
    void startSession(annotatorId);
  });
}

if (typeof document !== "undefined" && document.getElementById("start-form")) {
  bindStartForm();
}
