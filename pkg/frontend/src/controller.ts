// Submission flow: one POST of the whole session. Success clears the local
// draft; any failure keeps it so the annotator can resubmit without retyping.

import { submitAnnotations } from "./api.js";
import { buildPayload, canSubmit, clearDrafts, saveDrafts } from "./draft.js";
import type { SessionInfo, SlotDraft, SubmitAck } from "./types.js";

export async function attemptSubmit(
  base: string,
  session: SessionInfo,
  drafts: SlotDraft[],
): Promise<SubmitAck> {
  if (!canSubmit(drafts)) {
    throw new Error(
      "every slot needs a most-probable class and its probability",
    );
  }
  saveDrafts(session.session_id, drafts);
  const payload = buildPayload(session, drafts);
  const ack = await submitAnnotations(base, session.session_id, payload);
  clearDrafts(session.session_id);
  return ack;
}
