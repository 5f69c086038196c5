"""Shared builders and an exact-arithmetic reference for the estimators."""

from __future__ import annotations

from fractions import Fraction

from forestarea.domains import Domain, SamplePlot

FOREST = {"spruce", "pine", "deciduous", "unstocked"}


def plot(pid, stratum, observed, pi, predicted=None, **kw):
    return SamplePlot(
        str(pid), stratum, 0.0, 0.0, Domain.parse(observed), pi,
        None if predicted is None else Domain.parse(predicted), **kw,
    )


def ind(label: str, target: str) -> int:
    if target == "forest-total":
        return int(label in FOREST)
    return int(label == target)


def _stratified(cells):
    """cells: list of (area, [values]) with Fraction arithmetic."""
    total = Fraction(0)
    var = Fraction(0)
    for area, vals in cells:
        n = len(vals)
        if n == 0:
            continue
        mean = sum(vals, Fraction(0)) / n
        total += area * mean
        s2 = sum(((v - mean) ** 2 for v in vals), Fraction(0)) / (n - 1)
        var += area * area * s2 / n
    return total, var


def oracle(instance, target):
    """Exact direct, MA and PS (total, variance) for a plain-data instance.

    instance = {"areas": {h: Fraction}, "plots": [(h, obs, pred, pi Fraction)],
                "mapped": {h: Fraction mapped target area}}
    """
    areas, plots, mapped = instance["areas"], instance["plots"], instance["mapped"]
    direct = _stratified([
        (areas[h], [Fraction(ind(o, target)) for (g, o, _, _) in plots if g == h]) for h in areas
    ])
    resid = [(g, Fraction(ind(o, target) - ind(p, target)), pi) for (g, o, p, pi) in plots]
    c = sum((e / pi for (_, e, pi) in resid), Fraction(0))
    synth = sum(mapped.values(), Fraction(0))
    _, ma_var = _stratified([(areas[h], [e for (g, e, _) in resid if g == h]) for h in areas])
    ps_cells = []
    for h in areas:
        inside = [Fraction(ind(o, target)) for (g, o, p, _) in plots if g == h and ind(p, target)]
        outside = [Fraction(ind(o, target)) for (g, o, p, _) in plots if g == h and not ind(p, target)]
        ps_cells += [(mapped[h], inside), (areas[h] - mapped[h], outside)]
    # a singleton map group leaves the poststratified variance undefined
    ps = None if any(len(v) == 1 for _, v in ps_cells) else _stratified(ps_cells)
    return {"direct": direct, "ma": (synth + c, ma_var), "ps": ps}
