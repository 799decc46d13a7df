// Wire types for the elicitation service REST API. The shapes here must
// track the server exactly; tests/serviceValidator.ts mirrors the server's
// structural checks so drift fails the suite.

export interface SessionInfo {
  session_id: string;
  annotator_id: string;
  batch_id: string;
  presented_order: string[];
  image_urls: string[];
  label_order: string[];
  instructions: string;
  slot_count: number;
}

// One slot's answer as POSTed. Optional keys are omitted entirely rather
// than sent as null, except p1 which the server stores as null when the
// annotator left it blank.
export interface SlotResponse {
  image_id: string;
  top1: string;
  p1: number | null;
  top2?: string;
  p2?: number;
  definitely_not?: string[];
  elapsed_seconds?: number;
}

export interface SessionPayload {
  responses: SlotResponse[];
}

export interface SubmitAck {
  session_id: string;
  stored: number;
  flagged: number;
}

// What the annotator has entered for one slot. Probability fields keep the
// raw typed text so free-text decimals pass through unrounded.
export interface SlotDraft {
  top1: string | null;
  p1Text: string;
  top2: string | null;
  p2Text: string;
  definitelyNot: string[];
  elapsedSeconds: number | null;
}
