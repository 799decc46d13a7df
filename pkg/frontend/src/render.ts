// DOM construction for one elicitation task. No framework: the view is a
// pure function of (session, slot index, draft) and is rebuilt wholesale on
// every state change. Class options always follow the session's shuffled
// label_order, and nothing rendered distinguishes a repeat from a fresh task.

import type { SessionInfo, SlotDraft } from "./types.js";
import { slotWarnings } from "./validate.js";

export interface TaskHandlers {
  onTop1(name: string): void;
  onTop2(name: string | null): void;
  onP1Text(text: string): void;
  onP2Text(text: string): void;
  onToggleDefinitelyNot(name: string): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  if (text !== undefined) node.textContent = text;
  return node;
}

function probabilityField(
  id: string,
  value: string,
  onInput: (text: string) => void,
): HTMLInputElement {
  const input = el("input", {
    id,
    type: "text",
    inputmode: "decimal",
    autocomplete: "off",
    class: "prob-field",
  });
  input.value = value;
  input.addEventListener("input", () => onInput(input.value));
  return input;
}

export function renderTask(
  container: HTMLElement,
  session: SessionInfo,
  slotIndex: number,
  draft: SlotDraft,
  handlers: TaskHandlers,
): void {
  if (slotIndex < 0 || slotIndex >= session.slot_count) {
    throw new Error(`slot ${slotIndex} out of range`);
  }
  container.replaceChildren();

  const task = el("div", { class: "task" });

  task.append(
    el(
      "div",
      { class: "progress" },
      `${slotIndex + 1} / ${session.slot_count}`,
    ),
  );
  task.append(el("p", { class: "instructions" }, session.instructions));

  const imageUrl = session.image_urls[slotIndex] ?? "";
  const img = el("img", {
    class: "task-image",
    src: imageUrl,
    width: "160",
    height: "160",
    alt: "image to label",
  });
  task.append(img);

  // most probable class: single choice over the session's label order
  const top1Set = el("fieldset", { class: "top1" });
  top1Set.append(el("legend", {}, "The most probable label"));
  for (const name of session.label_order) {
    const label = el("label", { class: "option" });
    const radio = el("input", {
      type: "radio",
      name: "top1",
      value: name,
    });
    radio.checked = draft.top1 === name;
    radio.addEventListener("change", () => handlers.onTop1(name));
    label.append(radio, document.createTextNode(name));
    top1Set.append(label);
  }
  task.append(top1Set);

  const p1Label = el("label", { class: "p1" }, "Probability (0-100): ");
  p1Label.append(probabilityField("p1", draft.p1Text, handlers.onP1Text));
  task.append(p1Label);

  // optional second most probable class; the top-1 choice is not offered
  const top2Set = el("fieldset", { class: "top2" });
  top2Set.append(el("legend", {}, "The second most probable label (optional)"));
  const noneLabel = el("label", { class: "option" });
  const noneRadio = el("input", { type: "radio", name: "top2", value: "" });
  noneRadio.checked = draft.top2 === null;
  noneRadio.addEventListener("change", () => handlers.onTop2(null));
  noneLabel.append(noneRadio, document.createTextNode("none"));
  top2Set.append(noneLabel);
  for (const name of session.label_order) {
    const label = el("label", { class: "option" });
    const radio = el("input", { type: "radio", name: "top2", value: name });
    radio.checked = draft.top2 === name;
    radio.disabled = draft.top1 === name;
    radio.addEventListener("change", () => handlers.onTop2(name));
    label.append(radio, document.createTextNode(name));
    top2Set.append(label);
  }
  task.append(top2Set);

  const p2Label = el("label", { class: "p2" }, "Probability (0-100): ");
  p2Label.append(probabilityField("p2", draft.p2Text, handlers.onP2Text));
  task.append(p2Label);

  // definitely-not multi-select; chosen classes cannot be excluded
  const dnSet = el("fieldset", { class: "definitely-not" });
  dnSet.append(el("legend", {}, "Definitely not"));
  for (const name of session.label_order) {
    const label = el("label", { class: "option" });
    const box = el("input", {
      type: "checkbox",
      name: "definitely_not",
      value: name,
    });
    box.checked = draft.definitelyNot.includes(name);
    box.disabled = draft.top1 === name || draft.top2 === name;
    box.addEventListener("change", () =>
      handlers.onToggleDefinitelyNot(name),
    );
    label.append(box, document.createTextNode(name));
    dnSet.append(label);
  }
  task.append(dnSet);

  const warningsBox = el("div", { class: "warnings" });
  for (const warning of slotWarnings(draft)) {
    warningsBox.append(
      el("p", { class: "warning", "data-warning": warning.rule }, warning.message),
    );
  }
  task.append(warningsBox);

  container.append(task);
}
