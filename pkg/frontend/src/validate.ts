// Client-side mirror of the quality rules. Violations warn inline, never
// block: exclusion decisions belong to the server-side QC pass, the UI only
// nudges. Each rule yields at most one warning per slot, in a fixed order.

import { parseProbability } from "./draft.js";
import type { SlotDraft } from "./types.js";

export type WarningRule = "missing-p1" | "range" | "contradiction";

export interface InlineWarning {
  rule: WarningRule;
  message: string;
}

export function slotWarnings(draft: SlotDraft): InlineWarning[] {
  const warnings: InlineWarning[] = [];

  if (draft.top1 !== null && parseProbability(draft.p1Text) === null) {
    warnings.push({
      rule: "missing-p1",
      message: "enter a probability for your most probable class",
    });
  }

  const probs = [parseProbability(draft.p1Text), parseProbability(draft.p2Text)];
  if (probs.some((p) => p !== null && (p < 0 || p > 100))) {
    warnings.push({ rule: "range", message: "enter 0-100" });
  }

  const chosen = [draft.top1, draft.top2];
  if (chosen.some((name) => name !== null && draft.definitelyNot.includes(name))) {
    warnings.push({
      rule: "contradiction",
      message: "a class you picked is also marked definitely not",
    });
  }

  return warnings;
}
