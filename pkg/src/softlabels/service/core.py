"""Session, batch, and storage logic behind the elicitation service.

Everything here is plain Python so it can be tested without HTTP. Sessions
live in memory; submitted annotations go to an append-only JSONL store with
a byte-offset index alongside. Validation on submit is deliberately soft:
the three quality rules are recorded as flags, never used to reject, since
annotator exclusion happens downstream at ingest time.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from ..ingest import RULE_CONTRADICTION, RULE_MISSING_P1, RULE_RANGE
from ..labels import LabelSpace

#: Covert repeats: how many, where their sources sit, where they reappear.
N_REPEATS = 2
REPEAT_SOURCE_SPAN = 20  # sources drawn uniformly from the first 20 slots
REPEAT_TAIL_SPAN = 7  # repeats re-presented within the last 7 slots
SLOT_COUNT = 27  # 25 fresh images + 2 repeats

DEFAULT_TTL_MINUTES = 60

#: Third-person framing shown to annotators before the task.
INSTRUCTIONS = (
    "Imagine that 100 crowdsourced workers were asked to label this image. "
    "For each image, select the label you think is most probable and enter "
    "the percentage of workers you believe would choose it (0-100). You may "
    "also select a second most probable label with its percentage, and mark "
    "any labels that you are certain do not apply."
)


@dataclass(frozen=True)
class BatchPlan:
    """A fixed set of 25 images one session works through."""

    batch_id: str
    image_ids: tuple[str, ...]
    low_entropy_count: int = 0

    def __post_init__(self):
        object.__setattr__(self, "image_ids", tuple(self.image_ids))
        if len(set(self.image_ids)) != len(self.image_ids):
            raise ValueError(f"batch {self.batch_id}: image ids must be distinct")
        if not 0 <= self.low_entropy_count <= len(self.image_ids):
            raise ValueError(
                f"batch {self.batch_id}: low_entropy_count outside [0, n_images]"
            )


def plan_batches(
    image_ids: list[str],
    is_low_entropy: list[bool],
    n_batches: int,
    batch_size: int = 25,
    low_per_batch: int = 3,
    seed: int = 0,
) -> list[BatchPlan]:
    """Partition images into batches, each carrying a low-entropy quota."""
    if len(image_ids) != len(is_low_entropy):
        raise ValueError("need one entropy flag per image id")
    lows = [i for i, low in zip(image_ids, is_low_entropy) if low]
    highs = [i for i, low in zip(image_ids, is_low_entropy) if not low]
    need_low = n_batches * low_per_batch
    need_high = n_batches * (batch_size - low_per_batch)
    if len(lows) < need_low or len(highs) < need_high:
        raise ValueError(
            f"not enough images: need {need_low} low / {need_high} high, "
            f"have {len(lows)} / {len(highs)}"
        )
    rng = np.random.default_rng(seed)
    rng.shuffle(lows)
    rng.shuffle(highs)
    plans = []
    for b in range(n_batches):
        chosen = lows[b * low_per_batch : (b + 1) * low_per_batch] + highs[
            b * (batch_size - low_per_batch) : (b + 1) * (batch_size - low_per_batch)
        ]
        plans.append(
            BatchPlan(
                batch_id=f"batch-{b:03d}",
                image_ids=tuple(chosen),
                low_entropy_count=low_per_batch,
            )
        )
    return plans


def load_batch_plans(path: str | Path) -> list[BatchPlan]:
    """Batch plans from a JSON file: a list of {batch_id, image_ids, ...}."""
    data = json.loads(Path(path).read_text())
    if not isinstance(data, list) or not data:
        raise ValueError(f"{path}: expected a nonempty JSON list of batch plans")
    return [
        BatchPlan(
            batch_id=entry["batch_id"],
            image_ids=tuple(entry["image_ids"]),
            low_entropy_count=int(entry.get("low_entropy_count", 0)),
        )
        for entry in data
    ]


def save_batch_plans(path: str | Path, plans: list[BatchPlan]) -> None:
    Path(path).write_text(
        json.dumps(
            [
                {
                    "batch_id": p.batch_id,
                    "image_ids": list(p.image_ids),
                    "low_entropy_count": p.low_entropy_count,
                }
                for p in plans
            ],
            indent=2,
        )
        + "\n"
    )


@dataclass(frozen=True)
class Slot:
    """One presented task: an image, covertly a repeat of an earlier slot."""

    image_id: str
    is_repeat: bool = False
    source_slot: int | None = None


class SessionState:
    ACTIVE = "ACTIVE"
    SUBMITTED = "SUBMITTED"
    EXPIRED = "EXPIRED"


@dataclass
class Session:
    session_id: str
    annotator_id: str
    batch_id: str
    slots: tuple[Slot, ...]
    label_order: tuple[str, ...]
    created_at: datetime
    submitted_at: datetime | None = None
    state: str = SessionState.ACTIVE

    def __post_init__(self):
        repeats = [
            (i, slot) for i, slot in enumerate(self.slots) if slot.is_repeat
        ]
        if len(repeats) != N_REPEATS:
            raise ValueError(f"expected exactly {N_REPEATS} repeat slots")
        for i, slot in repeats:
            if slot.source_slot is None or not 0 <= slot.source_slot < i:
                raise ValueError("repeat slots must reference earlier slots")
            if self.slots[slot.source_slot].image_id != slot.image_id:
                raise ValueError("repeat slot image differs from its source")

    def to_public_dict(self, image_url_prefix: str = "/images/") -> dict:
        """What the annotator-facing client sees; repeats stay covert."""
        return {
            "session_id": self.session_id,
            "annotator_id": self.annotator_id,
            "batch_id": self.batch_id,
            "presented_order": [slot.image_id for slot in self.slots],
            "image_urls": [f"{image_url_prefix}{slot.image_id}" for slot in self.slots],
            "label_order": list(self.label_order),
            "instructions": INSTRUCTIONS,
            "slot_count": len(self.slots),
        }


class ServiceError(Exception):
    """Base for request-level failures; carries an HTTP-ish status."""

    status = 400


class NoBatchesError(ServiceError):
    status = 409


class UnknownSessionError(ServiceError):
    status = 404


class SessionNotActiveError(ServiceError):
    status = 409


class MalformedPayloadError(ServiceError):
    status = 422


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


class AnnotationStore:
    """Append-only JSONL with a session-id -> byte-offset index.

    A single lock serializes appends so concurrent submissions never
    interleave partial lines; each line is flushed before the index entry
    is written.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.index_path = Path(str(path) + ".idx")
        self._lock = threading.Lock()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.touch()
        self.index_path.touch()

    def append(self, record: dict) -> None:
        line = json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n"
        with self._lock:
            with open(self.path, "a") as fh:
                offset = fh.tell()
                fh.write(line)
                fh.flush()
            with open(self.index_path, "a") as fh:
                fh.write(
                    json.dumps(
                        {"session_id": record.get("session_id"), "offset": offset}
                    )
                    + "\n"
                )

    def records(self) -> list[dict]:
        out = []
        with open(self.path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    out.append(json.loads(line))
        return out


class SessionManager:
    """Creates sessions, validates submissions, persists and exports them."""

    def __init__(
        self,
        plans: list[BatchPlan],
        space: LabelSpace,
        store: AnnotationStore,
        seed: int = 0,
        ttl: timedelta = timedelta(minutes=DEFAULT_TTL_MINUTES),
        max_sessions_per_batch: int | None = None,
        clock=_utcnow,
    ):
        if not plans:
            raise ValueError("need at least one batch plan")
        ids = [p.batch_id for p in plans]
        if len(set(ids)) != len(ids):
            raise ValueError("batch ids must be distinct")
        if any(len(p.image_ids) < N_REPEATS for p in plans):
            raise ValueError(f"every batch needs at least {N_REPEATS} images")
        self.plans = list(plans)
        self.space = space
        self.store = store
        self.seed = seed
        self.ttl = ttl
        self.max_sessions_per_batch = max_sessions_per_batch
        self.clock = clock
        self.sessions: dict[str, Session] = {}
        self._assignment_counts = {p.batch_id: 0 for p in plans}
        self._counter = 0
        self._lock = threading.Lock()

    # -- session lifecycle ------------------------------------------------

    def _refresh_state(self, session: Session) -> None:
        if (
            session.state == SessionState.ACTIVE
            and self.clock() - session.created_at > self.ttl
        ):
            session.state = SessionState.EXPIRED

    def _pick_batch(self) -> BatchPlan:
        # least-assigned wins; ties resolve in plan order, which makes the
        # allocation a round-robin and keeps counts within 1 of each other
        best = min(self.plans, key=lambda p: self._assignment_counts[p.batch_id])
        if (
            self.max_sessions_per_batch is not None
            and self._assignment_counts[best.batch_id] >= self.max_sessions_per_batch
        ):
            raise NoBatchesError("every batch has reached its session limit")
        return best

    def create_session(self, annotator_id: str) -> Session:
        if not annotator_id or not annotator_id.strip():
            raise MalformedPayloadError("annotator_id must be nonempty")
        with self._lock:
            plan = self._pick_batch()
            self._assignment_counts[plan.batch_id] += 1
            self._counter += 1
            counter = self._counter
        rng = np.random.default_rng([self.seed, counter])

        base = list(plan.image_ids)
        rng.shuffle(base)
        n_base = len(base)
        total = n_base + N_REPEATS
        source_span = min(REPEAT_SOURCE_SPAN, n_base)
        sources = sorted(
            int(s) for s in rng.choice(source_span, size=N_REPEATS, replace=False)
        )
        # repeats reappear somewhere in the last 7 presented positions, but
        # never early enough to precede their own source
        tail_start = max(source_span, total - REPEAT_TAIL_SPAN)
        tail_positions = sorted(
            int(p)
            for p in rng.choice(
                np.arange(tail_start, total), size=N_REPEATS, replace=False
            )
        )

        slots: list[Slot] = [Slot(image_id=img) for img in base]
        for src, pos in zip(sources, tail_positions):
            slots.insert(
                pos, Slot(image_id=base[src], is_repeat=True, source_slot=src)
            )
        # inserting at ascending positions cannot displace an earlier repeat,
        # so each repeat's final position is exactly the chosen one; base
        # slots before tail_start keep their indices, so source_slot still
        # points at the right presented position

        label_order = list(self.space.names)
        rng.shuffle(label_order)

        session = Session(
            session_id=f"s-{counter:06d}",
            annotator_id=annotator_id,
            batch_id=plan.batch_id,
            slots=tuple(slots),
            label_order=tuple(label_order),
            created_at=self.clock(),
        )
        self.sessions[session.session_id] = session
        return session

    def get_session(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise UnknownSessionError(f"unknown session {session_id!r}")
        self._refresh_state(session)
        return session

    # -- submission -------------------------------------------------------

    def _validate_response(self, entry: dict, slot: Slot, index: int) -> dict:
        """Structural checks reject; quality rules only flag.

        Returns the normalized stored form of one response: class names kept
        as strings, plus the server-side is_repeat mark and any flags.
        """
        if not isinstance(entry, dict):
            raise MalformedPayloadError(f"slot {index}: response must be an object")
        image_id = entry.get("image_id")
        if image_id != slot.image_id:
            raise MalformedPayloadError(
                f"slot {index}: expected image {slot.image_id!r}, got {image_id!r}"
            )
        known = {
            "image_id",
            "top1",
            "p1",
            "top2",
            "p2",
            "definitely_not",
            "elapsed_seconds",
        }
        unknown = set(entry) - known
        if unknown:
            raise MalformedPayloadError(
                f"slot {index}: unknown fields {sorted(unknown)}"
            )

        top1 = entry.get("top1")
        if not isinstance(top1, str) or top1 not in self.space.names:
            raise MalformedPayloadError(f"slot {index}: top1 must name a class")
        top2 = entry.get("top2")
        if top2 is not None:
            if not isinstance(top2, str) or top2 not in self.space.names:
                raise MalformedPayloadError(f"slot {index}: top2 must name a class")
            if top2 == top1:
                raise MalformedPayloadError(
                    f"slot {index}: top1 and top2 must differ"
                )

        def number_or_none(key):
            value = entry.get(key)
            if value is None:
                return None
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise MalformedPayloadError(f"slot {index}: {key} must be numeric")
            return float(value)

        p1 = number_or_none("p1")
        p2 = number_or_none("p2")
        if p2 is not None and top2 is None:
            raise MalformedPayloadError(f"slot {index}: p2 given without top2")

        dn = entry.get("definitely_not", [])
        if not isinstance(dn, list) or any(
            not isinstance(name, str) or name not in self.space.names for name in dn
        ):
            raise MalformedPayloadError(
                f"slot {index}: definitely_not must list class names"
            )

        elapsed = number_or_none("elapsed_seconds")
        if elapsed is not None and elapsed < 0:
            raise MalformedPayloadError(
                f"slot {index}: elapsed_seconds must be nonnegative"
            )

        flags = []
        if p1 is None:
            flags.append(RULE_MISSING_P1)
        out_of_range = any(
            p is not None and not 0.0 <= p <= 100.0 for p in (p1, p2)
        )
        if out_of_range:
            flags.append(RULE_RANGE)
        if top1 in dn or (top2 is not None and top2 in dn):
            flags.append(RULE_CONTRADICTION)

        stored = {
            "image_id": image_id,
            "top1": top1,
            "p1": p1,
            "top2": top2,
            "p2": p2,
            "definitely_not": sorted(set(dn)),
            "elapsed_seconds": elapsed,
            "is_repeat": slot.is_repeat,
            "flags": flags,
        }
        return stored

    def submit_annotations(self, session_id: str, payload: dict) -> dict:
        session = self.get_session(session_id)
        if session.state == SessionState.SUBMITTED:
            raise SessionNotActiveError(f"session {session_id} already submitted")
        if session.state == SessionState.EXPIRED:
            raise SessionNotActiveError(f"session {session_id} has expired")

        if not isinstance(payload, dict):
            raise MalformedPayloadError("payload must be a JSON object")
        responses = payload.get("responses")
        if not isinstance(responses, list) or len(responses) != len(session.slots):
            raise MalformedPayloadError(
                f"payload must contain exactly {len(session.slots)} responses"
            )

        stored_responses = [
            self._validate_response(entry, slot, i)
            for i, (entry, slot) in enumerate(zip(responses, session.slots))
        ]
        now = self.clock()
        record = {
            "session_id": session.session_id,
            "annotator_id": session.annotator_id,
            "batch_id": session.batch_id,
            "submitted_at": now.isoformat(),
            "responses": stored_responses,
        }
        self.store.append(record)
        session.state = SessionState.SUBMITTED
        session.submitted_at = now
        n_flagged = sum(1 for r in stored_responses if r["flags"])
        return {
            "session_id": session.session_id,
            "stored": len(stored_responses),
            "flagged": n_flagged,
        }

    # -- export -----------------------------------------------------------

    def export_jsonl(self, batch_id: str | None = None) -> str:
        """The store as ingest-ready JSONL; server-only fields stripped."""
        lines = []
        for record in self.store.records():
            if batch_id is not None and record.get("batch_id") != batch_id:
                continue
            responses = []
            for resp in record["responses"]:
                out = {
                    "image_id": resp["image_id"],
                    "top1": resp["top1"],
                    "is_repeat": resp["is_repeat"],
                }
                if resp.get("p1") is not None:
                    out["p1"] = resp["p1"]
                if resp.get("top2") is not None:
                    out["top2"] = resp["top2"]
                if resp.get("p2") is not None:
                    out["p2"] = resp["p2"]
                out["definitely_not"] = list(resp.get("definitely_not", []))
                if resp.get("elapsed_seconds") is not None:
                    out["elapsed_seconds"] = resp["elapsed_seconds"]
                responses.append(out)
            lines.append(
                json.dumps(
                    {
                        "annotator_id": record["annotator_id"],
                        "batch_id": record["batch_id"],
                        "responses": responses,
                    },
                    sort_keys=True,
                )
            )
        return "\n".join(lines) + ("\n" if lines else "")
