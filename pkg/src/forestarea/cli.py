"""Command-line interface: ``forestarea <subcommand> ...``.

Exit codes: 0 success, 2 input error, 3 numeric or degenerate-model error,
4 gate failure in ``smallarea --strict``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import warnings
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import accuracy, tables
from .classifier.forest import Forest, train
from .classifier.selection import RFParams, divisor_mtry_grid, select_variables, tune, tune_to_csv
from .domains import PLOT_LABELS, SPECIES, Domain
from .errors import (
    DegenerateModelError,
    EmptyGroupError,
    ForestAreaError,
    GateError,
    InputError,
    NumericError,
    VarianceUndefinedError,
)
from .estimation import (
    build_poststrata,
    direct_estimate,
    format_re,
    model_assisted_estimate,
    poststratified_estimate,
    relative_efficiency,
)
from .fileio import atomic_write
from .raster.extract import FALLBACK_RADIUS_M, PLOT_RADIUS_M, extract_plot_predictors
from .raster.grid import read_grid, read_stack, write_grid, write_stack
from .raster.mapping import DEFAULT_TILE, predict_map

log = logging.getLogger("forestarea")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_GATE = 0, 2, 3, 4
DEFAULT_SEED = 0
ALL_DOMAINS = (Domain.SPRUCE, Domain.PINE, Domain.DECIDUOUS, Domain.NON_FOREST, Domain.FOREST_TOTAL)

FORMATS = """\
file formats:
  plot CSV      plot_id,x,y,stratum_id,observed,predicted,[predicted_exact_mask,]
                weight_km2,in_model_set,<feature columns...>
                labels: spruce, pine, deciduous, non-forest, unstocked
                weight_km2 = area represented by the plot (1 / inclusion probability)
  strata CSV    stratum_id,area_km2
  mapped CSV    stratum_id,domain,mapped_km2  (forest-total derived if absent)
  subpop CSV    subpop_id,stratum_id,area_km2[,mapped_<domain>...]
  membership    plot_id,subpop_id
  stands CSV    stand_id,reference,count_spruce,count_pine,count_deciduous[,area_m2]
  kriging CSV   x,y,response,covariate  (covariate = raw elevation with --logit)
  grids         ESRI ASCII grid (.asc) or the binary twin (.bgrd, first line
                FORESTAREA-GRID-1); north-up, xllcorner/yllcorner
  stack         manifest text file, one 'band_name path' per line
  forest        JSON with magic FORESTAREA-RF-1
  class maps    uint8 codes 1 spruce, 2 pine, 3 deciduous, 4 non-forest,
                5 unstocked, 0 nodata
  report CSV    domain,method,total_km2,variance,se,cv,correction,synthetic,re,
                variance_status  (re: number, inf, or undefined for 0/0)

environment:
  FORESTAREA_THREADS   default for --threads
"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise InputError(f"{self.prog}: {message}")


def _threads(value: int | None) -> int:
    if value is None:
        env = os.environ.get("FORESTAREA_THREADS", "").strip()
        if env:
            try:
                value = int(env)
            except ValueError:
                raise InputError(f"FORESTAREA_THREADS={env!r} is not an integer") from None
        else:
            value = 1
    if value < 1:
        raise InputError("thread count must be >= 1")
    import numba

    numba.set_num_threads(min(value, numba.config.NUMBA_NUM_THREADS))
    return value


def _existing(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{what} {path!r} does not exist")
    return p


def _out(path: str) -> Path:
    p = Path(path)
    parent = p.parent if str(p.parent) else Path(".")
    if not parent.is_dir():
        raise InputError(f"output directory {str(parent)!r} does not exist")
    return p


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"expected a comma-separated integer list, got {text!r}") from None


def _domains(text: str) -> list[Domain]:
    if text == "all":
        return list(ALL_DOMAINS)
    return [Domain.parse(v) for v in text.split(",")]


def _training_set(args):
    plots, features = tables.read_plots(_existing(args.plots, "plot file"))
    if any(p.in_model_set for p in plots):
        plots = [p for p in plots if p.in_model_set]
    use = args.features.split(",") if getattr(args, "features", None) else features
    if not use:
        raise InputError(f"{args.plots}: no feature columns")
    X = tables.feature_matrix(plots, features, use)
    y = [p.observed for p in plots]
    w = np.array([p.sampling_weight for p in plots]) if getattr(args, "weighted", False) else None
    return plots, use, X, y, w


# -- subcommands ---------------------------------------------------------------

def cmd_composite(args) -> int:
    from .raster.ops import composite_stacks

    epochs = [read_stack(_existing(m, "stack manifest")) for m in args.epochs]
    out = _out(args.out)
    write_stack(out, composite_stacks(epochs), binary=args.binary)
    return EXIT_OK


def cmd_extract(args) -> int:
    stack = read_stack(_existing(args.stack, "stack manifest"))
    plots, features = tables.read_plots(_existing(args.plots, "plot file"))
    out = _out(args.out)
    new = [b for b in stack.band_names if b not in features]
    names = features + new
    rows = []
    for p in plots:
        try:
            ex = extract_plot_predictors(stack, p.x, p.y, args.radius, args.fallback_radius)
        except InputError as e:
            raise InputError(f"{args.plots}: plot {p.plot_id}: {e}") from None
        if ex.missing:
            log.warning("plot %s: no valid pixels within %.2f m for some band", p.plot_id, ex.radius_used)
        vals = dict(zip(features, p.predictors))
        vals.update(zip(stack.band_names, ex.values.tolist()))
        rows.append(replace(p, predictors=tuple(vals[n] for n in names)))
    atomic_write(out, tables.format_plots(rows, names))
    return EXIT_OK


def cmd_train(args) -> int:
    _, use, X, y, w = _training_set(args)
    out = _out(args.out)
    forest = train(X, y, args.ntrees, args.mtry, args.seed, w, use, n_jobs=args.threads)
    atomic_write(out, forest.dumps())
    return EXIT_OK


def cmd_select_vars(args) -> int:
    _, use, X, y, w = _training_set(args)
    out = _out(args.out)
    selected, trace = select_variables(X, y, use, RFParams(args.ntrees, args.mtry, args.threads), args.seed, w, args.k)
    atomic_write(out, trace.to_csv())
    print(",".join(selected))
    return EXIT_OK


def cmd_tune(args) -> int:
    _, use, X, y, w = _training_set(args)
    out = _out(args.out)
    mtry_grid = _int_list(args.mtry_grid) if args.mtry_grid else divisor_mtry_grid(len(use))
    rows = tune(X, y, _int_list(args.ntrees_grid), mtry_grid, args.seed, w, args.k, args.threads)
    atomic_write(out, tune_to_csv(rows))
    return EXIT_OK


def cmd_predict(args) -> int:
    stack = read_stack(_existing(args.stack, "stack manifest"))
    mask = read_grid(_existing(args.mask, "forest mask"))
    forest_path = _existing(args.forest, "forest file")
    try:
        forest = Forest.loads(forest_path.read_text(encoding="utf-8"), label_parser=Domain.parse)
    except (ValueError, KeyError) as e:
        raise InputError(f"{forest_path}: {e}") from None
    extra = {}
    for item in args.extra or []:
        name, sep, path = item.partition("=")
        if not sep:
            raise InputError(f"--extra expects name=path, got {item!r}")
        extra[name] = read_grid(_existing(path, "extra layer"))
    out = _out(args.out)
    write_grid(out, predict_map(stack, mask, forest, extra, args.tile_size))
    return EXIT_OK


def _read_stands(path) -> list[accuracy.StandRecord]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = {"stand_id", "reference"} | {f"count_{d.value}" for d in SPECIES}
        if not need <= set(reader.fieldnames or []):
            raise InputError(f"{path}: header must contain {sorted(need)}")
        for lineno, row in enumerate(reader, 2):
            try:
                counts = {d: int(row[f"count_{d.value}"]) for d in SPECIES}
                area = float(row.get("area_m2") or 0.0)
                ref = Domain.parse(row["reference"])
            except (ValueError, InputError) as e:
                raise InputError(f"{path}:{lineno}: {e}") from None
            if any(c < 0 for c in counts.values()):
                raise InputError(f"{path}:{lineno}: negative pixel count")
            out.append(accuracy.StandRecord(row["stand_id"], ref, counts, area))
    return out


def cmd_accuracy(args) -> int:
    out = _out(args.out)
    if args.stands:
        m = accuracy.stand_level_confusion(_read_stands(_existing(args.stands, "stand file")),
                                           weight_by_area=args.weight_by_area)
    else:
        if not args.plots:
            raise InputError("accuracy needs --plots or --stands")
        plots, _ = tables.read_plots(_existing(args.plots, "plot file"))
        plots = [p for p in plots if p.predicted is not None]
        if not plots:
            raise InputError(f"{args.plots}: no plot has a predicted label")
        labels = [Domain.parse(v) for v in args.labels.split(",")] if args.labels else None
        if labels is None:
            present = {p.observed for p in plots} | {p.predicted for p in plots}
            labels = [d for d in PLOT_LABELS if d in present]
        m = accuracy.weighted_confusion(plots, labels=labels)
    atomic_write(out, accuracy.confusion_to_csv(m, percent=args.percent))
    o = accuracy.oa(m)
    print("overall accuracy: " + ("undefined" if o is None else f"{100 * o:.1f}%"))
    return EXIT_OK


def cmd_estimate(args) -> int:
    plots, _ = tables.read_plots(_existing(args.plots, "plot file"))
    strata = tables.read_strata(_existing(args.strata, "strata file"))
    methods = ["direct", "ma", "ps"] if args.method == "all" else [args.method]
    mapped = tables.read_mapped_areas(_existing(args.mapped, "mapped-area file")) if args.mapped else None
    if mapped is None and set(methods) & {"ma", "ps"}:
        raise InputError("--mapped is required for model-assisted and poststratified estimates")
    out = _out(args.out)
    lenient = not args.require_variance
    results = []
    for d in _domains(args.domain):
        direct = direct_estimate(plots, strata, d, require_variance=not lenient)
        for m in methods:
            if m == "direct":
                results.append(direct)
                continue
            per = tables.mapped_for(mapped, d, args.mapped)
            if m == "ma":
                e = model_assisted_estimate(plots, strata, d, math.fsum(per.values()), require_variance=not lenient)
            else:
                groups = build_poststrata(plots, strata, d, per)
                e = poststratified_estimate(plots, strata, groups, d, require_variance=not lenient)
            results.append(e.with_re(relative_efficiency(direct.variance, e.variance)))
    atomic_write(out, tables.format_report(results))
    return EXIT_OK


def cmd_smallarea(args) -> int:
    from .smallarea import STATUS_INAPPLICABLE, STATUS_PARTIAL, estimate_subpop, read_subpopulations

    plots, _ = tables.read_plots(_existing(args.plots, "plot file"))
    subpops = read_subpopulations(_existing(args.subpops, "sub-population file"),
                                  _existing(args.membership, "membership file"))
    out = _out(args.out)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["subpop_id", "domain", "method", "scope", "status", "strata", "total_km2", "variance", "se", "re",
                "gate"])
    gate_failed = []
    for sp in subpops:
        for d in _domains(args.domain):
            r = estimate_subpop(sp, plots, args.method, d)
            gate = "" if r.verdict is None else "; ".join(
                f"{h}:{'pass' if ok else 'fail'} ({r.verdict.reasons[h]})" for h, ok in r.verdict.per_stratum.items()
            )
            if r.status in (STATUS_INAPPLICABLE, STATUS_PARTIAL):
                gate_failed.append(f"{sp.subpop_id}/{d.value}")
            e = r.estimate
            re = "" if e is None or args.method == "direct" else format_re(e.relative_efficiency)
            w.writerow([sp.subpop_id, d.value, args.method, "aggregate", r.status,
                        " ".join(str(h) for h in r.strata_used),
                        "" if e is None else repr(e.total), "" if e is None else repr(e.variance),
                        "" if e is None else repr(e.se), re, gate])
            for h, eh in sorted(r.per_stratum.items()):
                w.writerow([sp.subpop_id, d.value, args.method, f"stratum {h}", "ok", str(h), repr(eh.total),
                            repr(eh.variance), repr(eh.se), format_re(eh.relative_efficiency), ""])
    atomic_write(out, buf.getvalue())
    if args.strict and gate_failed:
        raise GateError("gate not passed in all strata for: " + ", ".join(gate_failed))
    return EXIT_OK


def cmd_krige_strata(args) -> int:
    from .geostat import (
        KrigingObservation,
        VariogramModel,
        logit_elevation,
        read_observations_csv,
        threshold_to_stratum,
        universal_kriging_predict,
    )

    obs = read_observations_csv(_existing(args.observations, "observation file"))
    elev = read_grid(_existing(args.elevation, "elevation grid"))
    out = _out(args.out)
    model = VariogramModel(args.nugget, args.sill, args.range)
    cov = elev.values.astype(np.float64)
    ok = elev.valid_mask()
    if args.logit:
        e_max = float(cov[ok].max()) if ok.any() else 0.0
        e_max = max([e_max] + [o.covariate for o in obs])
        cov = np.where(ok, logit_elevation(np.where(ok, cov, 0.0), e_max), np.nan)
        obs = [KrigingObservation(o.x, o.y, o.response, float(logit_elevation(o.covariate, e_max))) for o in obs]
    else:
        cov = np.where(ok, cov, np.nan)
    surface = universal_kriging_predict(obs, model, elev.spec, cov)
    if args.surface_out:
        write_grid(_out(args.surface_out), surface)
    write_grid(out, threshold_to_stratum(surface, args.cut))
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .simulation import LandscapeConfig, monte_carlo

    cfg = LandscapeConfig.read(_existing(args.config, "config file")) if args.config else LandscapeConfig()
    out = _out(args.out)
    rep = monte_carlo(cfg, args.estimators.split(","), args.replicates, args.seed, classifier=args.classifier,
                      design=args.design, n_h=args.n_per_stratum, n_jobs=args.threads)
    atomic_write(out, rep.to_csv())
    summary = rep.summary()
    if args.summary:
        atomic_write(_out(args.summary), summary)
    print(summary, end="")
    return EXIT_OK


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="forestarea", description="Forest area estimation by dominant species.",
                epilog=FORMATS, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: $FORESTAREA_THREADS or 1)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    # the global options are also accepted after the subcommand name
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    def add(name, func, help_):
        s = sub.add_parser(name, help=help_, description=help_, epilog=FORMATS, parents=[common],
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        s.set_defaults(func=func)
        return s

    def rf_opts(s, k=True):
        s.add_argument("--plots", required=True)
        s.add_argument("--features", help="comma-separated feature columns (default: all)")
        s.add_argument("--weighted", action="store_true", help="weight plots by weight_km2")
        s.add_argument("--seed", type=int, default=DEFAULT_SEED)
        s.add_argument("--out", required=True)
        if k:
            s.add_argument("--k", type=int, default=10, help="cross-validation folds (default 10)")

    s = add("composite", cmd_composite, "Medoid composite of several epoch stacks.")
    s.add_argument("--epochs", nargs="+", required=True, help="stack manifests, one per epoch")
    s.add_argument("--out", required=True, help="output manifest")
    s.add_argument("--binary", action="store_true", help="write bands as binary grids")

    s = add("extract", cmd_extract, "Append plot-level band means to a plot CSV.")
    s.add_argument("--stack", required=True)
    s.add_argument("--plots", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--radius", type=float, default=PLOT_RADIUS_M)
    s.add_argument("--fallback-radius", type=float, default=FALLBACK_RADIUS_M)

    s = add("train", cmd_train, "Train a random forest on the model plots (in_model_set=1, else all).")
    rf_opts(s, k=False)
    s.add_argument("--ntrees", type=int, default=500)
    s.add_argument("--mtry", type=int, default=None, help="default floor(p/3)")

    s = add("select-vars", cmd_select_vars, "Forward/backward variable selection by cross-validated OA.")
    rf_opts(s)
    s.add_argument("--ntrees", type=int, default=500)
    s.add_argument("--mtry", type=int, default=None)

    s = add("tune", cmd_tune, "Cross-validated OA over an ntrees x mtry grid.")
    rf_opts(s)
    s.add_argument("--ntrees-grid", default="100,500,1000,1500")
    s.add_argument("--mtry-grid", default=None, help="default p/1 ... p/10")

    s = add("predict", cmd_predict, "Wall-to-wall class map within a forest mask.")
    s.add_argument("--stack", required=True)
    s.add_argument("--mask", required=True, help="forest mask grid (0 non-forest, other forest)")
    s.add_argument("--forest", required=True)
    s.add_argument("--extra", action="append", help="name=grid for non-stack features (repeatable)")
    s.add_argument("--tile-size", type=int, default=DEFAULT_TILE)
    s.add_argument("--out", required=True)

    s = add("accuracy", cmd_accuracy, "Weighted confusion matrix (rows prediction, columns reference).")
    s.add_argument("--plots")
    s.add_argument("--stands")
    s.add_argument("--labels", help="comma-separated class order")
    s.add_argument("--weight-by-area", action="store_true", help="stand matrix weighted by area_m2")
    s.add_argument("--percent", action="store_true", help="percent view rounded to 0.1")
    s.add_argument("--out", required=True)

    s = add("estimate", cmd_estimate, "Direct, model-assisted and poststratified area estimates.")
    s.add_argument("--plots", required=True)
    s.add_argument("--strata", required=True)
    s.add_argument("--mapped", help="mapped-area CSV (needed for ma/ps)")
    s.add_argument("--method", choices=("direct", "ma", "ps", "all"), default="all")
    s.add_argument("--domain", default="all", help="comma list or 'all'")
    s.add_argument("--allow-partial-variance", dest="require_variance", action="store_false",
                   help="singleton strata contribute totals only; variance flagged partial")
    s.add_argument("--out", required=True)

    s = add("smallarea", cmd_smallarea, "Estimates per sub-population with minimum-plot gates.")
    s.add_argument("--plots", required=True)
    s.add_argument("--subpops", required=True)
    s.add_argument("--membership", required=True)
    s.add_argument("--method", choices=("direct", "ma", "ps"), default="ma")
    s.add_argument("--domain", default="all")
    s.add_argument("--strict", action="store_true", help="exit 4 if any gate fails")
    s.add_argument("--out", required=True)

    s = add("krige-strata", cmd_krige_strata, "Universal kriging of a stratum indicator, thresholded to strata.")
    s.add_argument("--observations", required=True)
    s.add_argument("--elevation", required=True, help="covariate grid defining the output grid")
    s.add_argument("--logit", action="store_true", help="use logit(e / (e_max + 1)) as covariate")
    s.add_argument("--nugget", type=float, default=0.0)
    s.add_argument("--sill", type=float, default=0.73)
    s.add_argument("--range", type=float, default=5600.0, help="variogram range in metres")
    s.add_argument("--cut", type=float, default=0.5)
    s.add_argument("--surface-out")
    s.add_argument("--out", required=True)

    s = add("simulate", cmd_simulate, "Monte Carlo check of the estimators on a synthetic landscape.")
    s.add_argument("--config", help="key = value landscape config (default built-in)")
    s.add_argument("--replicates", type=int, default=1000)
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.add_argument("--classifier", default="noisy:0.8", help="perfect | random | noisy:<acc> | rf[:ntrees[:pilot]]")
    s.add_argument("--design", choices=("srs", "systematic"), default="srs")
    s.add_argument("--n-per-stratum", type=int, default=50)
    s.add_argument("--estimators", default="direct,ma,ps")
    s.add_argument("--summary", help="also write the text summary here")
    s.add_argument("--out", required=True)
    return p


def run(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser = build_parser()
        try:
            args = parser.parse_args(argv)
        except SystemExit as e:  # --help
            return int(e.code or 0)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="forestarea: %(levelname)s: %(message)s")
        args.threads = _threads(args.threads)
        return args.func(args)
    except GateError as e:
        print(f"forestarea: gate: {e}", file=sys.stderr)
        return EXIT_GATE
    except (NumericError, DegenerateModelError, VarianceUndefinedError, EmptyGroupError) as e:
        print(f"forestarea: numeric: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, OSError, json.JSONDecodeError) as e:
        print(f"forestarea: input: {e}", file=sys.stderr)
        return EXIT_INPUT
    except ForestAreaError as e:
        print(f"forestarea: {e}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    # numba falls back to another threading layer on old TBB builds; the notice is noise for users
    warnings.filterwarnings("ignore", message="The TBB threading layer requires TBB version")
    sys.exit(run())
