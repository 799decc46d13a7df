"""Parsing and quality control for raw annotation exports.

Reads session JSONL files and reference-label CSVs, applies the annotator
exclusion rules, and turns the surviving sessions into per-image label
pools. Malformed input is collected and reported, never silently dropped.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

from .labels import (
    AnnotationRecord,
    LabelPool,
    LabelSpace,
    LabelVariety,
    RedistributionPolicy,
    construct_label,
)

RULE_RANGE = "RANGE"
RULE_CONTRADICTION = "CONTRADICTION"
RULE_MISSING_P1 = "MISSING_P1"
QC_RULES = (RULE_RANGE, RULE_CONTRADICTION, RULE_MISSING_P1)

#: More error events than this across a session excludes the annotator
#: outright; exactly one error triggers the accuracy fallback.
MAX_ERRORS = 2
DEFAULT_ACCURACY_THRESHOLD = 0.75


@dataclass(frozen=True)
class RawSubmission:
    """One annotator's full session: an ordered batch of responses."""

    annotator_id: str
    batch_id: str
    responses: tuple[AnnotationRecord, ...]
    client_metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "responses", tuple(self.responses))
        if not self.responses:
            raise ValueError("a submission must contain at least one response")
        seen: set[str] = set()
        for rec in self.responses:
            if rec.is_repeat and rec.image_id not in seen:
                raise ValueError(
                    f"repeat response for {rec.image_id!r} has no earlier occurrence"
                )
            seen.add(rec.image_id)


@dataclass(frozen=True)
class ParseError:
    line: int
    message: str


@dataclass(frozen=True)
class ParseResult:
    submissions: tuple[RawSubmission, ...]
    errors: tuple[ParseError, ...]


@dataclass(frozen=True)
class QcVerdict:
    annotator_id: str
    kept: bool
    error_counts: dict
    accuracy: float | None
    reasons: tuple[str, ...]
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.kept and not self.reasons:
            raise ValueError("an excluded annotator needs at least one reason")


@dataclass(frozen=True)
class ReferenceLabels:
    """Per-image reference: a hard class index, plus optional vote counts."""

    hard: dict[str, int]
    counts: dict[str, tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self):
        for image_id, cts in self.counts.items():
            if sum(cts) < 1:
                raise ValueError(f"vote counts for {image_id!r} sum to zero")


def _class_index(value, space: LabelSpace, what: str) -> int:
    """Resolve a class given either its name or its integer index."""
    if isinstance(value, bool):
        raise ValueError(f"{what} must be a class name or index, got a boolean")
    if isinstance(value, int):
        return space.check_index(value)
    if isinstance(value, str):
        return space.index_of(value)
    raise ValueError(f"{what} must be a class name or index, got {type(value).__name__}")


def _number(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{what} must be a number, got {value!r}")
    return float(value)


def _parse_response(obj: dict, space: LabelSpace) -> AnnotationRecord:
    if not isinstance(obj, dict):
        raise ValueError("response must be an object")
    try:
        image_id = obj["image_id"]
        top1_raw = obj["top1"]
    except KeyError as exc:
        raise ValueError(f"response missing field {exc.args[0]!r}") from None
    if not isinstance(image_id, str) or not image_id:
        raise ValueError("image_id must be a nonempty string")
    top1 = _class_index(top1_raw, space, "top1")
    p1 = _number(obj["p1"], "p1") if obj.get("p1") is not None else None
    top2 = None
    if obj.get("top2") is not None:
        top2 = _class_index(obj["top2"], space, "top2")
    p2 = _number(obj["p2"], "p2") if obj.get("p2") is not None else None
    dn_raw = obj.get("definitely_not", [])
    if not isinstance(dn_raw, list):
        raise ValueError("definitely_not must be a list")
    definitely_not = frozenset(
        _class_index(item, space, "definitely_not entry") for item in dn_raw
    )
    elapsed = None
    if obj.get("elapsed_seconds") is not None:
        elapsed = _number(obj["elapsed_seconds"], "elapsed_seconds")
    is_repeat = obj.get("is_repeat", False)
    if not isinstance(is_repeat, bool):
        raise ValueError("is_repeat must be a boolean")
    return AnnotationRecord(
        image_id=image_id,
        annotator_id=obj.get("annotator_id", ""),
        top1=top1,
        p1=p1,
        top2=top2,
        p2=p2,
        definitely_not=definitely_not,
        elapsed_seconds=elapsed,
        is_repeat=is_repeat,
    )


def parse_annotations(path: str | Path, space: LabelSpace) -> ParseResult:
    """Parse a session-per-line JSONL export.

    Each line is one annotator session. Lines that fail to parse or violate
    the structural schema become ParseError entries with their line number;
    well-formed lines are returned regardless of any quality-rule violations
    inside them (those are QC's business, not the parser's).
    """
    path = Path(path)
    submissions: list[RawSubmission] = []
    errors: list[ParseError] = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                errors.append(ParseError(line_no, f"invalid JSON: {exc.msg}"))
                continue
            try:
                submissions.append(_parse_submission(obj, space))
            except ValueError as exc:
                errors.append(ParseError(line_no, str(exc)))
    return ParseResult(tuple(submissions), tuple(errors))


def _parse_submission(obj: dict, space: LabelSpace) -> RawSubmission:
    if not isinstance(obj, dict):
        raise ValueError("session line must be a JSON object")
    annotator_id = obj.get("annotator_id")
    if not isinstance(annotator_id, str) or not annotator_id:
        raise ValueError("annotator_id must be a nonempty string")
    batch_id = obj.get("batch_id")
    if not isinstance(batch_id, str):
        raise ValueError("batch_id must be a string")
    responses_raw = obj.get("responses")
    if not isinstance(responses_raw, list) or not responses_raw:
        raise ValueError("responses must be a nonempty list")
    responses = []
    for i, item in enumerate(responses_raw):
        try:
            rec = _parse_response(item, space)
        except ValueError as exc:
            raise ValueError(f"response {i}: {exc}") from None
        if not rec.annotator_id:
            rec = AnnotationRecord(
                image_id=rec.image_id,
                annotator_id=annotator_id,
                top1=rec.top1,
                p1=rec.p1,
                top2=rec.top2,
                p2=rec.p2,
                definitely_not=rec.definitely_not,
                elapsed_seconds=rec.elapsed_seconds,
                is_repeat=rec.is_repeat,
            )
        responses.append(rec)
    metadata = obj.get("client_metadata", {})
    if not isinstance(metadata, dict):
        raise ValueError("client_metadata must be an object")
    return RawSubmission(
        annotator_id=annotator_id,
        batch_id=batch_id,
        responses=tuple(responses),
        client_metadata=metadata,
    )


def record_violations(rec: AnnotationRecord) -> list[str]:
    """Which quality rules a single response violates (each at most once)."""
    fired = []
    out_of_range = any(
        p is not None and not 0.0 <= p <= 100.0 for p in (rec.p1, rec.p2)
    )
    if out_of_range:
        fired.append(RULE_RANGE)
    contradicted = rec.top1 in rec.definitely_not or (
        rec.top2 is not None and rec.top2 in rec.definitely_not
    )
    if contradicted:
        fired.append(RULE_CONTRADICTION)
    if rec.p1 is None:
        fired.append(RULE_MISSING_P1)
    return fired


def _first_occurrences(sub: RawSubmission) -> list[AnnotationRecord]:
    seen: set[str] = set()
    firsts = []
    for rec in sub.responses:
        if rec.image_id not in seen:
            seen.add(rec.image_id)
            firsts.append(rec)
    return firsts


def _session_accuracy(
    sub: RawSubmission, refs: ReferenceLabels
) -> tuple[float | None, list[str]]:
    """Top-1 accuracy against the reference hard labels, repeats counted once."""
    missing = []
    hits = 0
    total = 0
    for rec in _first_occurrences(sub):
        ref = refs.hard.get(rec.image_id)
        if ref is None:
            missing.append(rec.image_id)
            continue
        total += 1
        if rec.top1 == ref:
            hits += 1
    accuracy = hits / total if total else None
    return accuracy, missing


def qc_verdict(
    sub: RawSubmission,
    refs: ReferenceLabels,
    threshold: float = DEFAULT_ACCURACY_THRESHOLD,
) -> QcVerdict:
    """Judge one annotator session against the exclusion rules.

    More than two rule violations across the session excludes the annotator.
    Exactly one violation triggers the accuracy fallback: excluded only when
    top-1 accuracy against the reference labels falls below the threshold.
    Annotators with no violations are never excluded by accuracy alone.
    """
    counts = {rule: 0 for rule in QC_RULES}
    for rec in sub.responses:
        for rule in record_violations(rec):
            counts[rule] += 1
    total_errors = sum(counts.values())

    accuracy, missing = _session_accuracy(sub, refs)
    notes = []
    if missing:
        notes.append(
            f"{len(missing)} image(s) lack reference labels; skipped in accuracy"
        )

    reasons = []
    if total_errors > MAX_ERRORS:
        detail = ", ".join(
            f"{rule}x{n}" for rule, n in counts.items() if n > 0
        )
        reasons.append(f"{total_errors} rule violations ({detail})")
    elif total_errors == 1:
        if accuracy is None:
            notes.append(
                "one rule violation but no reference labels; accuracy rule not applied"
            )
        elif accuracy < threshold:
            reasons.append(
                f"one rule violation and accuracy {accuracy:.3f} < {threshold:.2f}"
            )

    return QcVerdict(
        annotator_id=sub.annotator_id,
        kept=not reasons,
        error_counts=counts,
        accuracy=accuracy,
        reasons=tuple(reasons),
        notes=tuple(notes),
    )


def apply_qc(
    submissions: list[RawSubmission],
    refs: ReferenceLabels,
    threshold: float = DEFAULT_ACCURACY_THRESHOLD,
) -> tuple[list[RawSubmission], list[QcVerdict]]:
    """Split submissions into kept and excluded, with per-annotator verdicts.

    Each verdict depends only on that annotator's own session, so the
    operation is idempotent and unaffected by input order.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    verdicts = [qc_verdict(sub, refs, threshold) for sub in submissions]
    kept = [sub for sub, v in zip(submissions, verdicts) if v.kept]
    return kept, verdicts


def build_pools(
    kept: list[RawSubmission],
    space: LabelSpace,
    variety: LabelVariety,
    policy: RedistributionPolicy,
) -> dict[str, LabelPool]:
    """Construct one label per annotator per image and pool them.

    Repeat presentations contribute nothing: only the first occurrence of an
    image within a session is used. Individual responses that violate a
    quality rule are left out even when their annotator survived QC, since
    the label constructors assume rule-clean records.
    """
    by_image: dict[str, list[AnnotationRecord]] = {}
    for sub in kept:
        for rec in _first_occurrences(sub):
            if record_violations(rec):
                continue
            by_image.setdefault(rec.image_id, []).append(rec)

    pools = {}
    for image_id, records in by_image.items():
        members = [construct_label(rec, space, variety, policy) for rec in records]
        pools[image_id] = LabelPool.from_members(image_id, members)
    return pools


@dataclass(frozen=True)
class ConsistencyReport:
    """Intra-annotator stability across the covert repeat presentations."""

    n_annotators: int
    n_pairs: int
    change_fraction: float | None
    mean_abs_p1_change: float | None

    @property
    def empty(self) -> bool:
        return self.n_pairs == 0


def consistency_stats(submissions: list[RawSubmission]) -> ConsistencyReport:
    """How often annotators flip their top choice between repeat pairs.

    An annotator counts as changed if any repeat pair disagrees on the most
    probable label. The mean absolute probability change is computed over
    the repeat pairs of annotators who never changed, on the 0..100 scale.
    """
    n_with_pairs = 0
    n_changed = 0
    n_pairs = 0
    stable_deltas: list[float] = []

    for sub in submissions:
        first_by_image: dict[str, AnnotationRecord] = {}
        pairs: list[tuple[AnnotationRecord, AnnotationRecord]] = []
        for rec in sub.responses:
            if rec.image_id in first_by_image and rec.is_repeat:
                pairs.append((first_by_image[rec.image_id], rec))
            first_by_image.setdefault(rec.image_id, rec)
        if not pairs:
            continue
        n_with_pairs += 1
        n_pairs += len(pairs)
        changed = any(a.top1 != b.top1 for a, b in pairs)
        if changed:
            n_changed += 1
        else:
            for a, b in pairs:
                if a.p1 is not None and b.p1 is not None:
                    stable_deltas.append(abs(a.p1 - b.p1))

    if n_pairs == 0:
        return ConsistencyReport(0, 0, None, None)
    return ConsistencyReport(
        n_annotators=n_with_pairs,
        n_pairs=n_pairs,
        change_fraction=n_changed / n_with_pairs,
        mean_abs_p1_change=(
            sum(stable_deltas) / len(stable_deltas) if stable_deltas else None
        ),
    )


def load_reference_csv(path: str | Path, space: LabelSpace) -> ReferenceLabels:
    """Read the reference CSV: image_id, hard label, optional vote counts."""
    path = Path(path)
    hard: dict[str, int] = {}
    counts: dict[str, tuple[int, ...]] = {}
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return ReferenceLabels(hard={}, counts={})
        count_cols = [i for i, name in enumerate(header) if name.startswith("count_")]
        for row in reader:
            if not row:
                continue
            image_id = row[0]
            label_raw = row[1]
            try:
                hard[image_id] = space.check_index(int(label_raw))
            except ValueError:
                hard[image_id] = space.index_of(label_raw)
            if count_cols and all(row[i].strip() != "" for i in count_cols):
                counts[image_id] = tuple(int(row[i]) for i in count_cols)
    return ReferenceLabels(hard=hard, counts=counts)
