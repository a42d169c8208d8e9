"""Trust rating from uncertainty evidence.

Quantification dispatches each observation by kind (bootstrap for samples,
fuzzy inference for labels) into a certainty vector; aggregation is the
weighted mean of that vector.  Weights default to ``5 - priority`` of the
facet's source so that severe sources dominate.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from . import fuzzy
from .errors import ContractError, NoEvidenceError, TaxonomyError
from .montecarlo import FALLBACK_SCORE, MonteCarloConfig, dispersion_to_certainty, monte_carlo_estimates
from .uncertainty import FacetKind, Taxonomy, UncertaintyFacet, UncertaintySet

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CertaintyVector:
    facets: tuple[UncertaintyFacet, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "facets", tuple(self.facets))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.facets) != len(self.values):
            raise ContractError("certainty vector needs one value per facet")
        for v in self.values:
            if not 0.0 <= v <= 1.0:
                raise ContractError(f"certainty value {v} outside [0, 1]")

    def __len__(self) -> int:
        return len(self.values)

    def _where(self, kind: FacetKind) -> tuple[float, ...]:
        return tuple(v for f, v in zip(self.facets, self.values) if f.kind is kind)

    @property
    def aleatoric(self) -> tuple[float, ...]:
        return self._where(FacetKind.ALEATORIC)

    @property
    def epistemic(self) -> tuple[float, ...]:
        return self._where(FacetKind.EPISTEMIC)


@dataclass(frozen=True)
class WeightSet:
    values: tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(w) for w in self.values)
        for w in values:
            if not (w > 0 and math.isfinite(w)):
                raise ContractError(f"weights must be positive and finite, got {w!r}")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class TrustRating:
    value: float
    evaluated_node: str = ""
    evaluator: str = ""
    round: int = 0

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ContractError(f"trust rating {self.value} outside [0, 1]")


@dataclass(frozen=True)
class KernelConfig:
    """Everything the two quantifiers and the weighting need."""

    taxonomy: Taxonomy = field(default_factory=Taxonomy.canonical)
    rulebase: fuzzy.RuleBase = field(default_factory=fuzzy.default_rule_base)
    montecarlo: MonteCarloConfig = field(default_factory=MonteCarloConfig)
    weight_overrides: Mapping[str, float] = field(default_factory=dict)
    resolution: int = fuzzy.DEFAULT_RESOLUTION
    _labels: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def label_score(self, term: str) -> float:
        try:
            return self._labels[term]
        except KeyError:
            var = self.rulebase.inputs[0]
            score = self._labels[term] = fuzzy.label_score(self.rulebase, var.name, term, self.resolution)
            return score


def black_box_1(uset: UncertaintySet, config: KernelConfig | None = None) -> CertaintyVector:
    """Quantify every element; output order follows input order."""
    config = config or KernelConfig()
    values: list[float | None] = [None] * len(uset)
    quant, quant_at = [], []
    for i, obs in enumerate(uset.elements):
        if obs.facet.kind is FacetKind.ALEATORIC:
            if len(obs.payload.values) < 2:
                log.warning("fewer than 2 samples for %s; using neutral score", obs.facet.name)
                values[i] = FALLBACK_SCORE
            else:
                quant.append(obs.payload)
                quant_at.append(i)
        else:
            term = obs.payload.term
            if term not in config.rulebase.inputs[0].terms:
                raise TaxonomyError(f"term {term!r} unknown to the rule base")
            values[i] = config.label_score(term)
    for i, est in zip(quant_at, monte_carlo_estimates(quant, config.montecarlo)):
        values[i] = dispersion_to_certainty(est, config.montecarlo)
    return CertaintyVector(uset.facets, values)


def default_weights(
    facets: Sequence[UncertaintyFacet],
    taxonomy: Taxonomy | None = None,
    overrides: Mapping[str, float] | None = None,
) -> WeightSet:
    """``5 - priority`` per facet, unless the source's name or id is overridden.

    Both facets of a mixed source carry the source's full weight.
    """
    taxonomy = taxonomy or Taxonomy.canonical()
    overrides = overrides or {}
    weights = []
    for facet in facets:
        src = taxonomy.source(facet.source_id)
        if src.name in overrides:
            weights.append(overrides[src.name])
        elif src.id in overrides:
            weights.append(overrides[src.id])
        else:
            if src.priority not in (1, 2, 3, 4):
                raise TaxonomyError(f"source {src.name!r} has no valid priority")
            weights.append(5 - src.priority)
    return WeightSet(tuple(weights))


def weighted_trust(q: Sequence[float], w: Sequence[float]) -> float:
    """Weighted mean of certainties; exact sums keep it inside [0, 1]."""
    if len(q) != len(w):
        raise ContractError(f"{len(q)} certainties but {len(w)} weights")
    if not q:
        raise NoEvidenceError("no evidence to rate")
    return math.fsum(a * b for a, b in zip(q, w)) / math.fsum(w)


def black_box_2(q: CertaintyVector, w: WeightSet, *, evaluated: str = "", evaluator: str = "", round: int = 0) -> TrustRating:
    return TrustRating(weighted_trust(q.values, w.values), evaluated, evaluator, round)


def evaluate_node(
    evidence: UncertaintySet,
    weights: WeightSet | None = None,
    config: KernelConfig | None = None,
    *,
    evaluated: str = "",
    evaluator: str = "",
    round: int = 0,
) -> TrustRating:
    config = config or KernelConfig()
    if not len(evidence):
        raise NoEvidenceError("no evidence to rate")
    if weights is None:
        weights = default_weights(evidence.facets, config.taxonomy, config.weight_overrides)
    q = black_box_1(evidence, config)
    return black_box_2(q, weights, evaluated=evaluated, evaluator=evaluator, round=round)
