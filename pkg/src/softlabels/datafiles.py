"""On-disk formats: label-matrix CSV and feature matrices with manifests.

Label matrices are plain CSV for cross-language auditability: one row per
(image, source) with the class probabilities under a header naming the
classes. Feature matrices are .npy with a JSON sidecar manifest recording
the image-id order, dimensionality, and declared value range.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .labels import LabelPool, LabelSpace, LabelVariety, SoftLabel

AGGREGATE_SOURCE = "aggregate"


def write_label_matrix(
    path: str | Path, pools: list[LabelPool], space: LabelSpace
) -> None:
    """One CSV row per member label plus one aggregate row per image."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "source", "variety", *space.names])
        for pool in pools:
            for member in pool.per_annotator:
                writer.writerow(
                    [pool.image_id, member.source, member.variety.value]
                    + [repr(float(p)) for p in member.probs]
                )
            writer.writerow(
                [pool.image_id, AGGREGATE_SOURCE, pool.aggregate.variety.value]
                + [repr(float(p)) for p in pool.aggregate.probs]
            )


def write_label_map(
    path: str | Path, labels: dict[str, SoftLabel], space: LabelSpace
) -> None:
    """Aggregate-only label matrix (one row per image)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "source", "variety", *space.names])
        for image_id in sorted(labels):
            lab = labels[image_id]
            writer.writerow(
                [image_id, AGGREGATE_SOURCE, lab.variety.value]
                + [repr(float(p)) for p in lab.probs]
            )


@dataclass(frozen=True)
class LabelMatrix:
    """Parsed label-matrix CSV: every row, plus aggregate lookups."""

    space: LabelSpace
    rows: tuple[tuple[str, str, SoftLabel], ...]  # (image_id, source, label)

    def aggregates(self) -> dict[str, SoftLabel]:
        return {
            image_id: label
            for image_id, source, label in self.rows
            if source == AGGREGATE_SOURCE
        }

    def members(self, image_id: str) -> list[SoftLabel]:
        return [
            label
            for img, source, label in self.rows
            if img == image_id and source != AGGREGATE_SOURCE
        ]

    def pools(self) -> dict[str, LabelPool]:
        """Rebuild per-image pools from the member rows (aggregates recomputed)."""
        by_image: dict[str, list[SoftLabel]] = {}
        for image_id, source, label in self.rows:
            if source != AGGREGATE_SOURCE:
                by_image.setdefault(image_id, []).append(label)
        return {
            image_id: LabelPool.from_members(image_id, members)
            for image_id, members in by_image.items()
        }


def read_label_matrix(path: str | Path) -> LabelMatrix:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 5 or header[:3] != [
            "image_id",
            "source",
            "variety",
        ]:
            raise ValueError(f"{path}: not a label-matrix CSV")
        space = LabelSpace(names=tuple(header[3:]))
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3 + space.k:
                raise ValueError(f"{path}:{lineno}: expected {3 + space.k} columns")
            probs = np.array([float(v) for v in row[3:]])
            label = SoftLabel(
                probs=probs,
                variety=LabelVariety.from_string(row[2]),
                source=row[1],
            )
            rows.append((row[0], row[1], label))
    return LabelMatrix(space=space, rows=tuple(rows))


def _feature_paths(path: str | Path) -> tuple[Path, Path]:
    path = Path(path)
    if path.suffix != ".npy":
        path = Path(str(path) + ".npy")
    return path, Path(str(path) + ".manifest.json")


def write_features(
    path: str | Path,
    image_ids: list[str],
    matrix: np.ndarray,
    feature_low: float = 0.0,
    feature_high: float = 1.0,
) -> None:
    """Feature matrix as .npy plus a sidecar manifest naming the rows."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError("feature matrix must be 2-D")
    if matrix.shape[0] != len(image_ids):
        raise ValueError("one image id per matrix row required")
    npy_path, manifest_path = _feature_paths(path)
    np.save(npy_path, matrix)
    manifest = {
        "image_ids": list(image_ids),
        "dim": int(matrix.shape[1]),
        "feature_low": float(feature_low),
        "feature_high": float(feature_high),
    }
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")


def read_features(path: str | Path) -> tuple[list[str], np.ndarray, float, float]:
    npy_path, manifest_path = _feature_paths(path)
    matrix = np.load(npy_path)
    manifest = json.loads(manifest_path.read_text())
    ids = list(manifest["image_ids"])
    if len(ids) != matrix.shape[0] or manifest["dim"] != matrix.shape[1]:
        raise ValueError(f"{npy_path}: manifest does not match the matrix shape")
    return ids, matrix, float(manifest["feature_low"]), float(manifest["feature_high"])
