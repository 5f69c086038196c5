"""Estimation domains, map codes and the plot record."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError


class Domain(str, enum.Enum):
    SPRUCE = "spruce"
    PINE = "pine"
    DECIDUOUS = "deciduous"
    NON_FOREST = "non-forest"
    UNSTOCKED = "unstocked"
    FOREST_TOTAL = "forest-total"

    @classmethod
    def parse(cls, value: str | Domain) -> Domain:
        if isinstance(value, Domain):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"nonforest": "non-forest", "forest": "forest-total"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise InputError(f"unknown domain label {value!r}") from None

    def __str__(self) -> str:
        return self.value


SPECIES = (Domain.SPRUCE, Domain.PINE, Domain.DECIDUOUS)
FOREST_CLASSES = frozenset({Domain.SPRUCE, Domain.PINE, Domain.DECIDUOUS, Domain.UNSTOCKED})

# Plot labels; forest-total is a target only, never stored on a plot.
PLOT_LABELS = (Domain.SPRUCE, Domain.PINE, Domain.DECIDUOUS, Domain.NON_FOREST, Domain.UNSTOCKED)

# Integer codes in class maps. 0 is reserved for nodata.
MAP_NODATA = 0
DOMAIN_CODES = {
    Domain.SPRUCE: 1,
    Domain.PINE: 2,
    Domain.DECIDUOUS: 3,
    Domain.NON_FOREST: 4,
    Domain.UNSTOCKED: 5,
}
CODE_DOMAINS = {code: d for d, code in DOMAIN_CODES.items()}


def indicator(label: Domain | None, target: Domain) -> int:
    """1 if ``label`` belongs to ``target``, else 0.

    ``forest-total`` is the union of the three species and unstocked forest.
    """
    if label is None:
        raise InputError("indicator requested for a missing label")
    if target is Domain.FOREST_TOTAL:
        return int(label in FOREST_CLASSES)
    return int(label is target)


def target_codes(target: Domain) -> list[int]:
    """Map codes that count towards ``target``."""
    if target is Domain.FOREST_TOTAL:
        return sorted(DOMAIN_CODES[d] for d in FOREST_CLASSES)
    return [DOMAIN_CODES[target]]


@dataclass(frozen=True)
class SamplePlot:
    plot_id: str
    stratum_id: int
    x: float
    y: float
    observed: Domain
    inclusion_probability: float
    predicted: Domain | None = None
    predicted_exact_mask: Domain | None = None
    predictors: tuple[float, ...] = field(default=(), compare=False)
    in_model_set: bool = False

    def __post_init__(self):
        if not self.inclusion_probability > 0:
            raise InputError(f"plot {self.plot_id}: inclusion probability must be > 0")
        if self.observed is Domain.FOREST_TOTAL:
            raise InputError(f"plot {self.plot_id}: forest-total cannot be an observed label")

    @property
    def sampling_weight(self) -> float:
        """Land area (km^2) represented by this plot."""
        return 1.0 / self.inclusion_probability

    def predictor_array(self) -> np.ndarray:
        return np.asarray(self.predictors, dtype=np.float64)
