// Per-slot draft state: pure reducers enforcing the selection guards, the
// canonical payload builder, and localStorage persistence between slots.

import type {
  SessionInfo,
  SessionPayload,
  SlotDraft,
  SlotResponse,
} from "./types.js";

export function emptyDraft(): SlotDraft {
  return {
    top1: null,
    p1Text: "",
    top2: null,
    p2Text: "",
    definitelyNot: [],
    elapsedSeconds: null,
  };
}

export function emptyDrafts(slotCount: number): SlotDraft[] {
  return Array.from({ length: slotCount }, emptyDraft);
}

// Probability fields accept numerals and at most one decimal point; any
// other character is dropped as typed. Values are passed through unrounded.
export function sanitizeProbabilityText(text: string): string {
  let out = "";
  let seenDot = false;
  for (const ch of text) {
    if (ch >= "0" && ch <= "9") {
      out += ch;
    } else if (ch === "." && !seenDot) {
      out += ch;
      seenDot = true;
    }
  }
  return out;
}

export function parseProbability(text: string): number | null {
  const clean = sanitizeProbabilityText(text);
  if (clean === "" || clean === ".") return null;
  const value = Number(clean);
  return Number.isFinite(value) ? value : null;
}

// Selecting a class as most probable clears it from every conflicting role.
export function setTop1(draft: SlotDraft, name: string): SlotDraft {
  const next = { ...draft, top1: name };
  if (next.top2 === name) {
    next.top2 = null;
    next.p2Text = "";
  }
  next.definitelyNot = draft.definitelyNot.filter((n) => n !== name);
  return next;
}

// null clears the optional second choice; picking the top-1 class is a no-op
// (the two selectors are mutually exclusive).
export function setTop2(draft: SlotDraft, name: string | null): SlotDraft {
  if (name === null) return { ...draft, top2: null, p2Text: "" };
  if (name === draft.top1) return draft;
  const next = { ...draft, top2: name };
  next.definitelyNot = draft.definitelyNot.filter((n) => n !== name);
  return next;
}

// A class selected as top-1 or top-2 cannot be marked definitely-not.
export function toggleDefinitelyNot(draft: SlotDraft, name: string): SlotDraft {
  if (name === draft.top1 || name === draft.top2) return draft;
  const has = draft.definitelyNot.includes(name);
  return {
    ...draft,
    definitelyNot: has
      ? draft.definitelyNot.filter((n) => n !== name)
      : [...draft.definitelyNot, name],
  };
}

export function setP1Text(draft: SlotDraft, text: string): SlotDraft {
  return { ...draft, p1Text: sanitizeProbabilityText(text) };
}

export function setP2Text(draft: SlotDraft, text: string): SlotDraft {
  return { ...draft, p2Text: sanitizeProbabilityText(text) };
}

export function setElapsed(draft: SlotDraft, seconds: number): SlotDraft {
  return { ...draft, elapsedSeconds: seconds >= 0 ? seconds : 0 };
}

// Submission requires a most-probable selection and its probability on
// every slot; range and contradiction problems only warn.
export function isComplete(draft: SlotDraft): boolean {
  return draft.top1 !== null && parseProbability(draft.p1Text) !== null;
}

export function canSubmit(drafts: SlotDraft[]): boolean {
  return drafts.every(isComplete);
}

// Canonical serialization: fixed key order, optional keys omitted when
// absent, definitely-not sorted and deduplicated. The same drafts always
// produce byte-identical JSON.
export function buildResponse(draft: SlotDraft, imageId: string): SlotResponse {
  if (draft.top1 === null) {
    throw new Error("cannot build a response without a most-probable class");
  }
  const out: SlotResponse = {
    image_id: imageId,
    top1: draft.top1,
    p1: parseProbability(draft.p1Text),
  };
  if (draft.top2 !== null) {
    out.top2 = draft.top2;
    const p2 = parseProbability(draft.p2Text);
    if (p2 !== null) out.p2 = p2;
  }
  if (draft.definitelyNot.length > 0) {
    out.definitely_not = [...new Set(draft.definitelyNot)].sort();
  }
  if (draft.elapsedSeconds !== null) {
    out.elapsed_seconds = draft.elapsedSeconds;
  }
  return out;
}

export function buildPayload(
  session: SessionInfo,
  drafts: SlotDraft[],
): SessionPayload {
  if (drafts.length !== session.slot_count) {
    throw new Error(
      `need ${session.slot_count} drafts, have ${drafts.length}`,
    );
  }
  return {
    responses: drafts.map((draft, i) => {
      const imageId = session.presented_order[i];
      if (imageId === undefined) {
        throw new Error(`session lists no image for slot ${i}`);
      }
      return buildResponse(draft, imageId);
    }),
  };
}

// -- local draft persistence ------------------------------------------------

const DRAFT_PREFIX = "softlabels-draft:";

export function saveDrafts(sessionId: string, drafts: SlotDraft[]): void {
  try {
    localStorage.setItem(DRAFT_PREFIX + sessionId, JSON.stringify(drafts));
  } catch {
    // storage may be unavailable (private mode, quota); drafts then live
    // only in memory and the session still works
  }
}

// Stored drafts are revalidated on load against the session's class list
// and the reducer invariants, so stale or hand-edited storage can never
// reintroduce a state the reducers forbid.
export function loadDrafts(
  sessionId: string,
  slotCount: number,
  classNames: readonly string[],
): SlotDraft[] | null {
  try {
    const raw = localStorage.getItem(DRAFT_PREFIX + sessionId);
    if (raw === null) return null;
    const parsed: unknown = JSON.parse(raw);
    if (!Array.isArray(parsed) || parsed.length !== slotCount) return null;
    const known = new Set(classNames);
    return parsed.map((entry) => {
      const d = entry as Partial<SlotDraft>;
      const top1 =
        typeof d.top1 === "string" && known.has(d.top1) ? d.top1 : null;
      const top2 =
        typeof d.top2 === "string" && known.has(d.top2) && d.top2 !== top1
          ? d.top2
          : null;
      return {
        top1,
        p1Text:
          typeof d.p1Text === "string" ? sanitizeProbabilityText(d.p1Text) : "",
        top2,
        p2Text:
          typeof d.p2Text === "string" ? sanitizeProbabilityText(d.p2Text) : "",
        definitelyNot: Array.isArray(d.definitelyNot)
          ? d.definitelyNot.filter(
              (n): n is string =>
                typeof n === "string" &&
                known.has(n) &&
                n !== top1 &&
                n !== top2,
            )
          : [],
        elapsedSeconds:
          typeof d.elapsedSeconds === "number" && d.elapsedSeconds >= 0
            ? d.elapsedSeconds
            : null,
      };
    });
  } catch {
    return null;
  }
}

export function clearDrafts(sessionId: string): void {
  try {
    localStorage.removeItem(DRAFT_PREFIX + sessionId);
  } catch {
    // nothing to clean up if storage is unavailable
  }
}
