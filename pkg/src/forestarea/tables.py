"""CSV formats for plots, strata, mapped areas and estimate reports.

Plot CSV (header mandatory, UTF-8, '.' decimals)::

    plot_id,x,y,stratum_id,observed,predicted,[predicted_exact_mask,]weight_km2,in_model_set,<features...>

``predicted`` and ``predicted_exact_mask`` may be empty.  ``weight_km2`` is
the land area represented by the plot (1 / inclusion probability).  Every
column after the fixed ones is a numeric predictor; empty cells are NaN.

Strata CSV: ``stratum_id,area_km2``.
Mapped-area CSV: ``stratum_id,domain,mapped_km2`` (mapped area of a domain
inside a stratum; forest-total is derived from the forest classes when absent).
"""

from __future__ import annotations

import csv
import io
import math
from typing import Mapping, Sequence

import numpy as np

from .domains import FOREST_CLASSES, Domain, SamplePlot
from .errors import InputError
from .estimation import Estimate, Stratum, format_re

PLOT_FIXED = ("plot_id", "x", "y", "stratum_id", "observed", "predicted", "weight_km2", "in_model_set")
PLOT_OPTIONAL = ("predicted_exact_mask",)
REPORT_COLUMNS = ("domain", "method", "total_km2", "variance", "se", "cv", "correction", "synthetic", "re",
                  "variance_status")

_TRUE = {"1", "true", "yes", "y", "t"}
_FALSE = {"0", "false", "no", "n", "f", ""}


def _float(text: str, what: str, where: str) -> float:
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise InputError(f"{where}: {what} {text!r} is not a number") from None
    return v


def _label(text: str | None, where: str) -> Domain | None:
    if text is None or not text.strip():
        return None
    try:
        return Domain.parse(text)
    except InputError as e:
        raise InputError(f"{where}: {e}") from None


def read_plots(path) -> tuple[list[SamplePlot], list[str]]:
    """Plots and the names of their predictor columns."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames
        if cols is None:
            raise InputError(f"{path}: empty file, header row required")
        missing = [c for c in PLOT_FIXED if c not in cols]
        if missing:
            raise InputError(f"{path}: missing column(s) {missing}")
        features = [c for c in cols if c not in PLOT_FIXED and c not in PLOT_OPTIONAL]
        plots, seen = [], set()
        for lineno, row in enumerate(reader, 2):
            where = f"{path}:{lineno}"
            pid = (row["plot_id"] or "").strip()
            if not pid:
                raise InputError(f"{where}: empty plot_id")
            if pid in seen:
                raise InputError(f"{where}: duplicate plot_id {pid!r}")
            seen.add(pid)
            try:
                stratum = int(row["stratum_id"])
            except (TypeError, ValueError):
                raise InputError(f"{where}: stratum_id {row['stratum_id']!r} is not an integer") from None
            weight = _float(row["weight_km2"], "weight_km2", where)
            if not (weight > 0 and math.isfinite(weight)):
                raise InputError(f"{where}: weight_km2 must be > 0")
            observed = _label(row["observed"], where)
            if observed is None:
                raise InputError(f"{where}: observed label is empty")
            flag = (row["in_model_set"] or "").strip().lower()
            if flag not in _TRUE | _FALSE:
                raise InputError(f"{where}: in_model_set {flag!r} is not a boolean")
            feats = []
            for f in features:
                cell = (row[f] or "").strip()
                feats.append(math.nan if cell == "" else _float(cell, f, where))
            try:
                plots.append(SamplePlot(
                    pid, stratum,
                    _float(row["x"], "x", where), _float(row["y"], "y", where),
                    observed, 1.0 / weight,
                    _label(row["predicted"], where),
                    _label(row.get("predicted_exact_mask"), where),
                    tuple(feats), flag in _TRUE,
                ))
            except InputError as e:
                raise InputError(f"{where}: {e}") from None
    return plots, features


def format_plots(plots: Sequence[SamplePlot], features: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    has_exact = any(p.predicted_exact_mask is not None for p in plots)
    head = list(PLOT_FIXED[:6]) + (["predicted_exact_mask"] if has_exact else []) + list(PLOT_FIXED[6:])
    w.writerow(head + list(features))
    for p in plots:
        row = [p.plot_id, repr(p.x), repr(p.y), p.stratum_id, p.observed.value,
               "" if p.predicted is None else p.predicted.value]
        if has_exact:
            row.append("" if p.predicted_exact_mask is None else p.predicted_exact_mask.value)
        row += [repr(p.sampling_weight), int(p.in_model_set)]
        row += ["" if math.isnan(v) else repr(float(v)) for v in p.predictors]
        w.writerow(row)
    return buf.getvalue()


def feature_matrix(plots: Sequence[SamplePlot], all_features: Sequence[str], use: Sequence[str]) -> np.ndarray:
    idx = []
    for f in use:
        if f not in all_features:
            raise InputError(f"feature {f!r} not among plot columns {list(all_features)}")
        idx.append(list(all_features).index(f))
    X = np.array([[p.predictors[i] for i in idx] for p in plots], dtype=np.float64).reshape(len(plots), len(idx))
    bad = np.flatnonzero(~np.isfinite(X).all(axis=1))
    if bad.size:
        raise InputError(f"plot {plots[bad[0]].plot_id} has a missing value in the selected features")
    return X


def read_strata(path) -> list[Stratum]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not {"stratum_id", "area_km2"} <= set(reader.fieldnames or []):
            raise InputError(f"{path}: header must contain stratum_id,area_km2")
        out, seen = [], set()
        for lineno, row in enumerate(reader, 2):
            where = f"{path}:{lineno}"
            try:
                h = int(row["stratum_id"])
            except (TypeError, ValueError):
                raise InputError(f"{where}: stratum_id {row['stratum_id']!r} is not an integer") from None
            if h in seen:
                raise InputError(f"{where}: duplicate stratum {h}")
            seen.add(h)
            a = _float(row["area_km2"], "area_km2", where)
            if not (a >= 0 and math.isfinite(a)):
                raise InputError(f"{where}: area_km2 must be >= 0")
            out.append(Stratum(h, a))
    if not out:
        raise InputError(f"{path}: no strata")
    return out


def read_mapped_areas(path) -> dict[Domain, dict[int, float]]:
    """{domain: {stratum_id: mapped km^2}}."""
    out: dict[Domain, dict[int, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not {"stratum_id", "domain", "mapped_km2"} <= set(reader.fieldnames or []):
            raise InputError(f"{path}: header must contain stratum_id,domain,mapped_km2")
        for lineno, row in enumerate(reader, 2):
            where = f"{path}:{lineno}"
            try:
                h = int(row["stratum_id"])
            except (TypeError, ValueError):
                raise InputError(f"{where}: stratum_id {row['stratum_id']!r} is not an integer") from None
            d = _label(row["domain"], where)
            if d is None:
                raise InputError(f"{where}: empty domain")
            a = _float(row["mapped_km2"], "mapped_km2", where)
            if not (a >= 0 and math.isfinite(a)):
                raise InputError(f"{where}: mapped_km2 must be >= 0")
            if h in out.setdefault(d, {}):
                raise InputError(f"{where}: duplicate ({h}, {d.value})")
            out[d][h] = a
    if Domain.FOREST_TOTAL not in out:
        total: dict[int, list[float]] = {}
        for d, per in out.items():
            if d in FOREST_CLASSES:
                for h, a in per.items():
                    total.setdefault(h, []).append(a)
        if total:
            out[Domain.FOREST_TOTAL] = {h: math.fsum(v) for h, v in total.items()}
    return out


def mapped_for(mapped: Mapping[Domain, Mapping[int, float]], target: Domain, where: str = "mapped areas") -> dict[int, float]:
    if target not in mapped:
        raise InputError(f"{where}: no mapped area for domain {target.value}")
    return dict(mapped[target])


def _num(v: float | None) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(float(v))


def format_report(estimates: Sequence[Estimate]) -> str:
    """Machine-readable report; full precision, RE as a number, ``inf`` or ``undefined``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for e in estimates:
        re = "" if e.method == "direct" else format_re(e.relative_efficiency)
        w.writerow([e.domain.value, e.method, _num(e.total), _num(e.variance), _num(e.se), _num(e.cv),
                    _num(e.correction), _num(e.synthetic), re, e.variance_status])
    return buf.getvalue()


def read_report(path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
