// Thin fetch client for the elicitation service. These four endpoints are
// the UI's only network surface.

import type { SessionInfo, SessionPayload, SubmitAck } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function errorMessage(res: Response): Promise<string> {
  try {
    const body: unknown = await res.json();
    if (
      typeof body === "object" &&
      body !== null &&
      typeof (body as { error?: unknown }).error === "string"
    ) {
      return (body as { error: string }).error;
    }
  } catch {
    // non-JSON error body; fall through to the status line
  }
  return `request failed with status ${res.status}`;
}

export async function fetchSession(
  base: string,
  annotatorId: string,
): Promise<SessionInfo> {
  const res = await fetch(
    `${base}/api/session?annotator_id=${encodeURIComponent(annotatorId)}`,
  );
  if (!res.ok) throw new ApiError(res.status, await errorMessage(res));
  return (await res.json()) as SessionInfo;
}

export async function submitAnnotations(
  base: string,
  sessionId: string,
  payload: SessionPayload,
): Promise<SubmitAck> {
  const res = await fetch(
    `${base}/api/session/${encodeURIComponent(sessionId)}/annotations`,
    {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    },
  );
  if (!res.ok) throw new ApiError(res.status, await errorMessage(res));
  return (await res.json()) as SubmitAck;
}
