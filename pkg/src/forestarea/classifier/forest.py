"""Random forest of bagged Gini CART trees."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import DegenerateModelError, InputError
from . import kernels
from .rng import tree_state

FORMAT_MAGIC = "FORESTAREA-RF-1"


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    importance: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, np.int64)
        for k in range(self.n_nodes):
            if self.feature[k] >= 0:
                depth[self.left[k]] = depth[self.right[k]] = depth[k] + 1
        return int(depth.max())


@dataclass
class Forest:
    trees: list[Tree]
    mtry: int
    seed: int
    feature_names: list[str]
    class_labels: list
    _flat: tuple | None = field(default=None, repr=False, compare=False)
    _lockstep: dict | None = field(default=None, repr=False, compare=False)

    @property
    def ntrees(self) -> int:
        return len(self.trees)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def flat(self) -> tuple:
        """Trees concatenated into single node arrays with global child indices."""
        if self._flat is None:
            offsets = np.cumsum([0] + [t.n_nodes for t in self.trees])
            feature = np.concatenate([t.feature for t in self.trees]).astype(np.int32)
            threshold = np.concatenate([t.threshold for t in self.trees]).astype(np.float64)
            value = np.concatenate([t.value for t in self.trees]).astype(np.int32)
            left = np.concatenate(
                [np.where(t.left >= 0, t.left + o, -1) for t, o in zip(self.trees, offsets)]
            ).astype(np.int32)
            right = np.concatenate(
                [np.where(t.right >= 0, t.right + o, -1) for t, o in zip(self.trees, offsets)]
            ).astype(np.int32)
            roots = offsets[:-1].astype(np.int64)
            self._flat = (feature, threshold, left, right, value, roots)
        return self._flat

    def lockstep(self) -> dict:
        """Node layout for the level-synchronous voting kernel."""
        if self._lockstep is None:
            feature, threshold, left, _, value, roots = self.flat()
            shift = max(1, int(np.ceil(np.log2(max(2, self.n_features)))))
            if len(feature) >= 2 ** (31 - shift):
                raise InputError("forest too large for the packed node layout")
            leaf = feature < 0
            ids = np.arange(len(feature), dtype=np.int64)
            child = np.where(leaf, ids, left).astype(np.int64)
            feat = np.where(leaf, 0, feature).astype(np.int64)
            packed = ((child << shift) | feat).astype(np.int32)
            t64 = np.where(leaf, np.inf, threshold)
            # For float32 inputs x <= t  <=>  x <= (t rounded down to float32).
            t32 = t64.astype(np.float32)
            up = t32.astype(np.float64) > t64
            t32[up] = np.nextafter(t32[up], np.float32(-np.inf))
            depths = np.array([t.depth() for t in self.trees], dtype=np.int64)
            self._lockstep = {
                "packed": packed, "t64": t64, "t32": t32, "value": value,
                "roots": roots, "depths": depths, "shift": shift,
            }
        return self._lockstep

    def predict_index(self, X, parallel: bool = True) -> np.ndarray:
        """Class indices for rows of ``X`` (m, p)."""
        X = np.asarray(X)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise InputError(f"expected {self.n_features} features, got {X.shape[1]}")
        if X.dtype not in (np.float32, np.float64):
            X = X.astype(np.float64)
        if not parallel:
            return kernels.vote_serial(np.ascontiguousarray(X), *self.flat(), len(self.class_labels))
        return self.predict_index_bandmajor(np.ascontiguousarray(X.T))

    def predict_index_bandmajor(self, XT: np.ndarray) -> np.ndarray:
        """Class indices for band-major features ``XT`` (p, m), float32 or float64."""
        ls = self.lockstep()
        thr = ls["t32"] if XT.dtype == np.float32 else ls["t64"]
        return kernels.vote(
            XT, ls["packed"], thr, ls["value"], ls["roots"], ls["depths"], ls["shift"],
            len(self.class_labels),
        )

    def predict(self, X) -> list:
        return [self.class_labels[i] for i in self.predict_index(X)]

    # serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_MAGIC,
            "ntrees": self.ntrees,
            "mtry": self.mtry,
            "seed": self.seed,
            "feature_names": list(self.feature_names),
            "class_labels": [str(c) for c in self.class_labels],
            "node_fields": ["feature", "threshold", "left", "right", "value"],
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "value": t.value.tolist(),
                    "importance": t.importance.tolist(),
                }
                for t in self.trees
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict, label_parser=None) -> Forest:
        if d.get("format") != FORMAT_MAGIC:
            raise InputError(f"not a {FORMAT_MAGIC} forest (format={d.get('format')!r})")
        labels = d["class_labels"]
        if label_parser is not None:
            labels = [label_parser(c) for c in labels]
        trees = [
            Tree(
                np.asarray(t["feature"], np.int32),
                np.asarray(t["threshold"], np.float64),
                np.asarray(t["left"], np.int32),
                np.asarray(t["right"], np.int32),
                np.asarray(t["value"], np.int32),
                np.asarray(t["importance"], np.float64),
            )
            for t in d["trees"]
        ]
        if len(trees) != d["ntrees"]:
            raise InputError("tree count does not match header")
        return cls(trees, int(d["mtry"]), int(d["seed"]), list(d["feature_names"]), labels)

    @classmethod
    def loads(cls, text: str, label_parser=None) -> Forest:
        return cls.from_dict(json.loads(text), label_parser)


def default_mtry(p: int) -> int:
    return max(1, p // 3)


def encode_labels(y: Sequence, class_labels: Sequence | None = None) -> tuple[np.ndarray, list]:
    y = list(y)
    if class_labels is None:
        seen = set(y)
        try:
            class_labels = sorted(seen)
        except TypeError:
            class_labels = sorted(seen, key=str)
    class_labels = list(class_labels)
    pos = {c: i for i, c in enumerate(class_labels)}
    try:
        codes = np.array([pos[v] for v in y], dtype=np.int64)
    except KeyError as e:
        raise InputError(f"label {e.args[0]!r} not in class labels {class_labels}") from None
    return codes, class_labels


def _grow_one(X, codes, n_classes, sample_weights, mtry, seed, t, bootstrap) -> Tree:
    state = np.array([tree_state(seed, t)], dtype=np.uint64)
    n = X.shape[0]
    if bootstrap:
        counts = kernels.bootstrap_counts(n, state)
    else:
        counts = np.ones(n, np.int64)
    weights = counts * sample_weights
    return Tree(*kernels.grow_tree(X, codes, n_classes, weights, counts, mtry, state))


def train(
    X,
    y: Sequence,
    ntrees: int = 500,
    mtry: int | None = None,
    seed: int = 0,
    sample_weights=None,
    feature_names: Sequence[str] | None = None,
    class_labels: Sequence | None = None,
    n_jobs: int = 1,
    bootstrap: bool = True,
) -> Forest:
    """Fit a random forest.

    Each tree draws a bootstrap sample of size n and considers ``mtry``
    features at every node (default ``floor(p/3)``, at least 1).  Trees are
    seeded independently, so ``n_jobs`` has no effect on the result.
    """
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    if X.ndim != 2:
        raise InputError("feature matrix must be 2-D")
    n, p = X.shape
    if len(y) != n:
        raise InputError(f"{n} feature rows but {len(y)} labels")
    if not np.isfinite(X).all():
        raise InputError("feature matrix contains missing or non-finite values")
    if ntrees < 1:
        raise InputError("ntrees must be >= 1")
    mtry = default_mtry(p) if mtry is None else int(mtry)
    if not 1 <= mtry <= p:
        raise InputError(f"mtry must be in [1, {p}], got {mtry}")
    codes, labels = encode_labels(y, class_labels)
    if len(np.unique(codes)) < 2:
        raise DegenerateModelError("training data contain a single class")
    if sample_weights is None:
        sw = np.ones(n)
    else:
        sw = np.asarray(sample_weights, dtype=np.float64)
        if sw.shape != (n,) or not (sw > 0).all():
            raise InputError("sample weights must be positive, one per row")
    names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(p)]
    if len(names) != p:
        raise InputError("feature_names length does not match columns")

    def grow(t):
        return _grow_one(X, codes, len(labels), sw, mtry, seed, t, bootstrap)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(grow, range(ntrees)))
    else:
        trees = [grow(t) for t in range(ntrees)]
    return Forest(trees, mtry, seed, names, labels)


def predict(forest: Forest, features) -> list:
    """Labels for one feature vector or a matrix of them."""
    return forest.predict(features)


def gini_importance(forest: Forest) -> np.ndarray:
    """Mean over trees of the summed weighted Gini decrease per feature."""
    total = np.zeros(forest.n_features)
    for t in forest.trees:
        total += t.importance
    return total / forest.ntrees

