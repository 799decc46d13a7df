// Deterministic generators for the property suite: a seeded PRNG plus
// session and draft builders that only go through the public reducers, so
// generated drafts can never reach states the UI itself prevents.

import {
  emptyDraft,
  isComplete,
  setElapsed,
  setP1Text,
  setP2Text,
  setTop1,
  setTop2,
  toggleDefinitelyNot,
} from "../src/draft.js";
import type { SessionInfo, SlotDraft } from "../src/types.js";

export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function randInt(rng: () => number, lo: number, hi: number): number {
  return lo + Math.floor(rng() * (hi - lo));
}

export function pick<T>(rng: () => number, items: readonly T[]): T {
  const item = items[randInt(rng, 0, items.length)];
  if (item === undefined) throw new Error("pick from empty list");
  return item;
}

export function shuffled<T>(rng: () => number, items: readonly T[]): T[] {
  const out = [...items];
  for (let i = out.length - 1; i > 0; i--) {
    const j = randInt(rng, 0, i + 1);
    const a = out[i] as T;
    out[i] = out[j] as T;
    out[j] = a;
  }
  return out;
}

export const SLOT_COUNT = 27;

// A session the way the server shapes it: 25 fresh images plus 2 covert
// repeats of earlier slots, presented in order, label order shuffled.
export function genSession(rng: () => number, id = 0): SessionInfo {
  const k = randInt(rng, 2, 11);
  const names = Array.from({ length: k }, (_, i) => `cls-${i}`);
  const fresh = Array.from(
    { length: SLOT_COUNT - 2 },
    (_, i) => `img-${id}-${i.toString().padStart(2, "0")}`,
  );
  const presented = [...fresh];
  for (const position of [SLOT_COUNT - 2, SLOT_COUNT - 1]) {
    const source = randInt(rng, 0, Math.min(20, fresh.length));
    presented.splice(position, 0, fresh[source] as string);
  }
  const order = presented.slice(0, SLOT_COUNT);
  return {
    session_id: `s-${id.toString().padStart(6, "0")}`,
    annotator_id: `ann-${id}`,
    batch_id: "batch-000",
    presented_order: order,
    image_urls: order.map((imageId) => `/images/${imageId}`),
    label_order: shuffled(rng, names),
    instructions: "estimate the probability of each label",
    slot_count: SLOT_COUNT,
  };
}

const P1_POOL = ["60", "0", "100", "37.5", "150", "0.25", "05", "99.", "7"];
const P2_POOL = ["20", "120", "3.14", "0", "100", "45"];

// Random walk over the reducers, always ending in a submittable state.
export function genDraft(rng: () => number, names: string[]): SlotDraft {
  let draft = emptyDraft();
  draft = setTop1(draft, pick(rng, names));
  if (rng() < 0.3) draft = setP1Text(draft, "not a number 12x");
  draft = setP1Text(draft, pick(rng, P1_POOL));
  if (rng() < 0.6 && names.length > 1) {
    draft = setTop2(draft, pick(rng, names));
    if (rng() < 0.7) draft = setP2Text(draft, pick(rng, P2_POOL));
    if (rng() < 0.1) draft = setTop2(draft, null);
  }
  const nToggles = randInt(rng, 0, Math.min(5, names.length + 1));
  for (let i = 0; i < nToggles; i++) {
    draft = toggleDefinitelyNot(draft, pick(rng, names));
  }
  if (rng() < 0.2) draft = setTop1(draft, pick(rng, names));
  if (rng() < 0.5) draft = setElapsed(draft, rng() * 120);
  if (!isComplete(draft)) throw new Error("generator produced an incomplete draft");
  return draft;
}
