"""Cross-validation, forward/backward variable selection and parameter tuning."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .. import accuracy
from ..errors import InputError
from .forest import default_mtry, encode_labels, gini_importance, train
from .rng import SplitMix64, mix64

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RFParams:
    ntrees: int = 500
    mtry: int | None = None
    n_jobs: int = 1

    def mtry_for(self, p: int) -> int:
        return default_mtry(p) if self.mtry is None else min(self.mtry, p)


def fold_assignment(n: int, k: int, seed: int) -> np.ndarray:
    """Fold index per sample: a seeded shuffle dealt round-robin into k folds."""
    perm = SplitMix64(mix64(seed)).permutation(n)
    folds = np.empty(n, dtype=np.int64)
    for pos, i in enumerate(perm):
        folds[i] = pos % k
    return folds


@dataclass
class CVResult:
    predictions: np.ndarray
    oa: float
    folds: np.ndarray
    class_labels: list

    def predicted_labels(self) -> list:
        return [self.class_labels[i] for i in self.predictions]


def kfold_cv(
    X,
    y: Sequence,
    k: int = 10,
    params: RFParams = RFParams(),
    seed: int = 0,
    weights=None,
    class_labels: Sequence | None = None,
) -> CVResult:
    """Out-of-fold predictions and their sampling-weighted overall accuracy."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if k < 2 or n < k:
        raise InputError(f"need 2 <= k <= n, got k={k}, n={n}")
    codes, labels = encode_labels(y, class_labels)
    folds = fold_assignment(n, k, seed)
    pred = np.empty(n, dtype=np.int64)
    mtry = params.mtry_for(X.shape[1])
    for f in range(k):
        test = folds == f
        train_idx = ~test
        present = set(np.unique(codes[train_idx]).tolist())
        missing = [labels[c] for c in range(len(labels)) if c not in present]
        if missing:
            log.warning("fold %d: classes %s absent from training folds", f, missing)
        if len(present) == 1:
            pred[test] = present.pop()
            continue
        forest = train(
            X[train_idx], [labels[c] for c in codes[train_idx]], params.ntrees, mtry,
            seed, class_labels=labels, n_jobs=params.n_jobs,
        )
        pred[test] = forest.predict_index(X[test])
    cm = accuracy.confusion_from_codes(codes, pred, labels, weights)
    return CVResult(pred, accuracy.oa(cm), folds, labels)


@dataclass(frozen=True)
class TraceStep:
    action: str  # add | skip | remove | keep
    feature: str
    oa_before: float
    oa_after: float


@dataclass
class SelectionTrace:
    steps: list[TraceStep] = field(default_factory=list)
    oa_kind: str = "10-fold cross-validated weighted OA"

    def __len__(self) -> int:
        return len(self.steps)

    def replay(self) -> list[str]:
        selected: list[str] = []
        for s in self.steps:
            if s.action == "add":
                selected.append(s.feature)
            elif s.action == "remove":
                selected.remove(s.feature)
        return selected

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# oa = {self.oa_kind}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "action", "feature", "oa_before", "oa_after"])
        for i, s in enumerate(self.steps):
            w.writerow([i, s.action, s.feature, repr(s.oa_before), repr(s.oa_after)])
        return buf.getvalue()


def _baseline_oa(y, weights) -> float:
    """Weighted OA of predicting the (weighted) majority class everywhere."""
    codes, labels = encode_labels(y)
    w = np.ones(len(codes)) if weights is None else np.asarray(weights, dtype=np.float64)
    per_class = np.bincount(codes, weights=w, minlength=len(labels))
    return float(per_class.max() / per_class.sum())


def select_variables(
    X,
    y: Sequence,
    candidate_features: Sequence[str],
    params: RFParams = RFParams(),
    seed: int = 0,
    weights=None,
    k: int = 10,
) -> tuple[list[str], SelectionTrace]:
    """Forward selection in candidate order, then backward elimination.

    Forward: a feature is added if it strictly improves the cross-validated
    OA of the current set (the empty set scores the majority-class OA).
    Backward: surviving features are visited in ascending Gini importance of
    a forest fit on all of them; a feature is dropped if the OA without it
    does not decrease.  The last remaining feature is never dropped.
    """
    X = np.asarray(X, dtype=np.float64)
    names = list(candidate_features)
    if not names:
        raise InputError("no candidate features")
    if X.shape[1] != len(names):
        raise InputError("candidate_features must name every column of X")
    col = {name: j for j, name in enumerate(names)}
    _, labels = encode_labels(y)

    cache: dict[tuple[str, ...], float] = {}

    def score(features: list[str]) -> float:
        key = tuple(features)
        if key not in cache:
            cols = [col[f] for f in features]
            cache[key] = kfold_cv(X[:, cols], y, k, params, seed, weights, labels).oa
        return cache[key]

    trace = SelectionTrace(oa_kind=f"{k}-fold cross-validated weighted OA")
    selected: list[str] = []
    current = _baseline_oa(y, weights)
    for f in names:
        oa_new = score(selected + [f])
        if oa_new > current:
            trace.steps.append(TraceStep("add", f, current, oa_new))
            selected.append(f)
            current = oa_new
        else:
            trace.steps.append(TraceStep("skip", f, current, oa_new))

    if not selected:
        best = max(names, key=lambda f: (cache[(f,)], -names.index(f)))
        log.warning("no feature beats the majority baseline; keeping best single feature %s", best)
        trace.steps = [TraceStep("add", best, current, cache[(best,)])]
        return [best], trace

    if len(selected) > 1:
        cols = [col[f] for f in selected]
        forest = train(
            X[:, cols], y, params.ntrees, params.mtry_for(len(cols)), seed,
            class_labels=labels, n_jobs=params.n_jobs,
        )
        imp = gini_importance(forest)
        order = [selected[j] for j in sorted(range(len(selected)), key=lambda j: (imp[j], j))]
        for f in order:
            if len(selected) == 1:
                break
            reduced = [g for g in selected if g != f]
            oa_new = score(reduced)
            if oa_new >= current:
                trace.steps.append(TraceStep("remove", f, current, oa_new))
                selected = reduced
                current = oa_new
            else:
                trace.steps.append(TraceStep("keep", f, current, oa_new))
    return selected, trace


@dataclass(frozen=True)
class TuneRow:
    ntrees: int
    mtry: int
    oa: float
    is_default: bool


def tune(
    X,
    y: Sequence,
    ntrees_grid: Sequence[int],
    mtry_grid: Sequence[int],
    seed: int = 0,
    weights=None,
    k: int = 10,
    n_jobs: int = 1,
) -> list[TuneRow]:
    """Cross-validated OA over an (ntrees, mtry) grid.  Nothing is auto-selected."""
    if not ntrees_grid or not mtry_grid:
        raise InputError("tuning grids must be non-empty")
    p = np.asarray(X).shape[1]
    rows = []
    for nt in ntrees_grid:
        for m in mtry_grid:
            res = kfold_cv(X, y, k, RFParams(nt, m, n_jobs), seed, weights)
            rows.append(TuneRow(nt, m, res.oa, nt == 500 and m == default_mtry(p)))
    return rows


def divisor_mtry_grid(p: int) -> list[int]:
    """mtry values p/1 ... p/10 (floored, at least 1, duplicates removed)."""
    out = []
    for d in range(1, 11):
        m = max(1, p // d)
        if m not in out:
            out.append(m)
    return out


def tune_to_csv(rows: Sequence[TuneRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["ntrees", "mtry", "oa", "default"])
    for r in rows:
        w.writerow([r.ntrees, r.mtry, repr(r.oa), int(r.is_default)])
    return buf.getvalue()
