"""Sampling-weighted confusion matrices and accuracy metrics.

Orientation is fixed: predictions in rows, reference in columns.  User's
accuracy is therefore row-wise and producer's accuracy column-wise.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .domains import SPECIES, Domain, SamplePlot
from .errors import InputError

ORIENTATION_HEADER = "# rows=prediction, columns=reference"


@dataclass
class ConfusionMatrix:
    labels: list
    cells: np.ndarray

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.float64)
        k = len(self.labels)
        if self.cells.shape != (k, k):
            raise InputError(f"cells must be {k}x{k}, got {self.cells.shape}")
        if (self.cells < 0).any():
            raise InputError("confusion cells must be >= 0")

    @property
    def total_weight(self) -> float:
        return math.fsum(self.cells.ravel())

    def index(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise InputError(f"label {label!r} not in matrix") from None

    def percent(self) -> np.ndarray:
        return 100.0 * self.cells / self.total_weight

    def __add__(self, other: ConfusionMatrix) -> ConfusionMatrix:
        if list(other.labels) != list(self.labels):
            raise InputError("cannot add matrices with different labels")
        return ConfusionMatrix(list(self.labels), self.cells + other.cells)


def weighted_confusion(
    plots: Sequence[SamplePlot],
    ref_field: str = "observed",
    pred_field: str = "predicted",
    labels: Sequence | None = None,
) -> ConfusionMatrix:
    """Cross-tabulate plots, each adding its sampling weight to (pred, ref)."""
    pairs = []
    for p in plots:
        ref, pred = getattr(p, ref_field), getattr(p, pred_field)
        if ref is None or pred is None:
            raise InputError(f"plot {p.plot_id}: missing {ref_field if ref is None else pred_field}")
        pairs.append((pred, ref, p.sampling_weight))
    if labels is None:
        seen = {lab for pred, ref, _ in pairs for lab in (pred, ref)}
        order = {d: i for i, d in enumerate(Domain)}
        labels = sorted(seen, key=lambda d: order.get(d, len(order)))
    labels = list(labels)
    pos = {lab: i for i, lab in enumerate(labels)}
    k = len(labels)
    buckets: list[list[list[float]]] = [[[] for _ in range(k)] for _ in range(k)]
    for pred, ref, w in pairs:
        if pred not in pos or ref not in pos:
            raise InputError(f"label pair ({pred}, {ref}) not in {labels}")
        buckets[pos[pred]][pos[ref]].append(w)
    cells = np.array([[math.fsum(b) for b in row] for row in buckets]).reshape(k, k)
    return ConfusionMatrix(labels, cells)


def oa(matrix: ConfusionMatrix) -> float | None:
    total = matrix.total_weight
    if total <= 0:
        return None
    return math.fsum(np.diag(matrix.cells)) / total


def ua(matrix: ConfusionMatrix, label) -> float | None:
    i = matrix.index(label)
    row = math.fsum(matrix.cells[i, :])
    if row <= 0:
        return None
    return matrix.cells[i, i] / row


def pa(matrix: ConfusionMatrix, label) -> float | None:
    i = matrix.index(label)
    col = math.fsum(matrix.cells[:, i])
    if col <= 0:
        return None
    return matrix.cells[i, i] / col


@dataclass(frozen=True)
class StandRecord:
    stand_id: str
    reference: Domain
    pixel_counts: Mapping[Domain, int]
    area_m2: float = 0.0


def _plurality(counts: Mapping[Domain, int], order: Sequence[Domain]) -> Domain:
    best, best_n = None, -1
    for d in order:
        n = counts.get(d, 0)
        if n > best_n:
            best, best_n = d, n
    return best


def stand_level_confusion(
    stands: Sequence[StandRecord],
    labels: Sequence[Domain] = SPECIES,
    weight_by_area: bool = False,
) -> ConfusionMatrix:
    """Stand-level validation: each stand is predicted as its plurality map class.

    Ties go to the first class in ``labels`` (spruce < pine < deciduous).  Each
    stand counts once unless ``weight_by_area`` is set.
    """
    labels = list(labels)
    pos = {d: i for i, d in enumerate(labels)}
    cells = np.zeros((len(labels), len(labels)))
    for s in stands:
        if sum(s.pixel_counts.get(d, 0) for d in labels) <= 0:
            raise InputError(f"stand {s.stand_id} has no counted pixels")
        if s.reference not in pos:
            raise InputError(f"stand {s.stand_id}: reference {s.reference} not in {labels}")
        pred = _plurality(s.pixel_counts, labels)
        cells[pos[pred], pos[s.reference]] += s.area_m2 if weight_by_area else 1.0
    return ConfusionMatrix(labels, cells)


def confusion_to_csv(matrix: ConfusionMatrix, percent: bool = False) -> str:
    """CSV text with a one-line orientation header.

    Percent views are rounded to 0.1 and carry UA/PA margins; raw views keep
    full precision.
    """
    buf = io.StringIO()
    buf.write(ORIENTATION_HEADER + ("; values in %" if percent else "; values are summed weights") + "\n")
    w = csv.writer(buf, lineterminator="\n")
    labels = [str(lab) for lab in matrix.labels]
    cells = matrix.percent() if percent else matrix.cells

    def fmt(v):
        if v is None:
            return ""
        return f"{v:.1f}" if percent else repr(float(v))

    w.writerow(["prediction\\reference", *labels, "users_accuracy"])
    for i, lab in enumerate(matrix.labels):
        u = ua(matrix, lab)
        w.writerow([str(lab), *(fmt(c) for c in cells[i]), fmt(None if u is None else 100 * u if percent else u)])
    pas = [pa(matrix, lab) for lab in matrix.labels]
    w.writerow(["producers_accuracy", *(fmt(None if p is None else 100 * p if percent else p) for p in pas), ""])
    o = oa(matrix)
    w.writerow(["overall_accuracy", *([""] * len(labels)), fmt(None if o is None else 100 * o if percent else o)])
    return buf.getvalue()


def confusion_from_codes(ref_codes, pred_codes, labels: Sequence, weights=None) -> ConfusionMatrix:
    """Weighted cross-tabulation of integer class codes indexing ``labels``."""
    ref_codes = np.asarray(ref_codes, dtype=np.int64)
    pred_codes = np.asarray(pred_codes, dtype=np.int64)
    w = np.ones(ref_codes.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64)
    k = len(labels)
    cells = np.zeros((k, k))
    np.add.at(cells, (pred_codes, ref_codes), w)
    return ConfusionMatrix(list(labels), cells)
