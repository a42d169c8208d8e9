"""Mamdani fuzzy inference over piecewise-linear membership functions.

Pipeline: fuzzify a crisp input, fire each rule at the minimum of its
antecedent degrees, clip the consequent at that strength, aggregate by
pointwise maximum, and defuzzify by centroid on a midpoint grid over [0, 1].
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import EmptyInferenceError, FuzzyInputError, RuleBaseError, TaxonomyError
from .uncertainty import FacetKind, Observation, QualLabel

log = logging.getLogger(__name__)

DEFAULT_RESOLUTION = 1001
FALLBACK_SCORE = 0.5


@dataclass(frozen=True)
class Trapezoidal:
    """Membership rising on [a, b], flat at 1 on [b, c], falling on [c, d].

    ``a == b`` or ``c == d`` gives a shoulder (a vertical edge).
    """

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        pts = (self.a, self.b, self.c, self.d)
        if not all(math.isfinite(p) for p in pts):
            raise RuleBaseError(f"non-finite membership parameters {pts}")
        if not self.a <= self.b <= self.c <= self.d:
            raise RuleBaseError(f"membership parameters must be ordered, got {pts}")
        if self.a == self.d:
            raise RuleBaseError(f"membership function has zero width: {pts}")

    @property
    def params(self) -> tuple[float, ...]:
        return (self.a, self.b, self.c, self.d)

    @property
    def support(self) -> tuple[float, float]:
        return (self.a, self.d)

    def __call__(self, x):
        a, b, c, d = self.a, self.b, self.c, self.d
        if np.ndim(x) == 0:
            x = float(x)
            if x < a or x > d:
                return 0.0
            if x < b:
                return (x - a) / (b - a)
            if x <= c:
                return 1.0
            return (d - x) / (d - c)
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[(x >= b) & (x <= c)] = 1.0
        if b > a:
            m = (x >= a) & (x < b)
            out[m] = (x[m] - a) / (b - a)
        if d > c:
            m = (x > c) & (x <= d)
            out[m] = (d - x[m]) / (d - c)
        return out

    def centroid(self) -> float:
        """Exact centre of gravity of the membership curve."""
        a, b, c, d = self.a, self.b, self.c, self.d
        pieces = (
            ((b - a) / 2, a + 2 * (b - a) / 3),
            (c - b, (b + c) / 2),
            ((d - c) / 2, c + (d - c) / 3),
        )
        area = sum(w for w, _ in pieces)
        return sum(w * x for w, x in pieces) / area


class Triangular(Trapezoidal):
    """Triangle with feet at a and c and its peak at b."""

    def __init__(self, a: float, b: float, c: float):
        super().__init__(a, b, b, c)

    @property
    def params(self) -> tuple[float, ...]:
        return (self.a, self.b, self.d)

    def __repr__(self) -> str:
        return f"Triangular(a={self.a}, b={self.b}, c={self.d})"


MembershipFunction = Union[Triangular, Trapezoidal]


def membership(shape: str, params: Sequence[float]) -> MembershipFunction:
    shape = shape.lower()
    if shape == "triangular" and len(params) == 3:
        return Triangular(*map(float, params))
    if shape == "trapezoidal" and len(params) == 4:
        return Trapezoidal(*map(float, params))
    raise RuleBaseError(f"unsupported membership {shape!r} with {len(params)} parameters")


def shape_name(mf: MembershipFunction) -> str:
    return "triangular" if isinstance(mf, Triangular) else "trapezoidal"


@dataclass(frozen=True)
class LinguisticVariable:
    name: str
    universe: tuple[float, float]
    terms: Mapping[str, MembershipFunction]

    def __post_init__(self):
        lo, hi = map(float, self.universe)
        object.__setattr__(self, "universe", (lo, hi))
        object.__setattr__(self, "terms", dict(self.terms))
        if not lo < hi:
            raise RuleBaseError(f"variable {self.name!r}: empty universe [{lo}, {hi}]")
        if not self.terms:
            raise RuleBaseError(f"variable {self.name!r} has no terms")
        for term, mf in self.terms.items():
            a, d = mf.support
            if a < lo or d > hi:
                raise RuleBaseError(
                    f"variable {self.name!r}: term {term!r} support [{a}, {d}] leaves [{lo}, {hi}]"
                )

    def __hash__(self):
        return hash((self.name, self.universe, tuple(self.terms.items())))

    def term(self, name: str) -> MembershipFunction:
        try:
            return self.terms[name]
        except KeyError:
            raise TaxonomyError(f"variable {self.name!r} has no term {name!r}") from None

    def coverage_gaps(self, points: int = DEFAULT_RESOLUTION) -> list[float]:
        """Grid points where no term has positive membership."""
        grid = np.linspace(*self.universe, points)
        best = np.max([mf(grid) for mf in self.terms.values()], axis=0)
        return grid[best <= 0].tolist()


@dataclass(frozen=True)
class FuzzyRule:
    antecedents: tuple[tuple[str, str], ...]
    consequent: str

    def __post_init__(self):
        ants = tuple((str(v), str(t)) for v, t in self.antecedents)
        if not ants:
            raise RuleBaseError("rule needs at least one antecedent")
        object.__setattr__(self, "antecedents", ants)


@dataclass(frozen=True)
class RuleBase:
    inputs: tuple[LinguisticVariable, ...]
    output: LinguisticVariable
    rules: tuple[FuzzyRule, ...]
    _inputs: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "rules", tuple(self.rules))
        if self.output.universe != (0.0, 1.0):
            raise RuleBaseError(f"output universe must be [0, 1], got {list(self.output.universe)}")
        if not self.rules:
            raise RuleBaseError("rule base has no rules")
        by_name = {v.name: v for v in self.inputs}
        if len(by_name) != len(self.inputs):
            raise RuleBaseError("duplicate input variable names")
        for rule in self.rules:
            for var, term in rule.antecedents:
                if var not in by_name:
                    raise RuleBaseError(f"rule refers to unknown input variable {var!r}")
                if term not in by_name[var].terms:
                    raise RuleBaseError(f"rule refers to unknown term {term!r} of {var!r}")
            if rule.consequent not in self.output.terms:
                raise RuleBaseError(f"rule refers to unknown output term {rule.consequent!r}")
        object.__setattr__(self, "_inputs", by_name)

    def input(self, name: str) -> LinguisticVariable:
        try:
            return self._inputs[name]
        except KeyError:
            raise TaxonomyError(f"rule base has no input variable {name!r}") from None


def default_rule_base() -> RuleBase:
    """Three-term monotone rule base: low uncertainty maps to good certainty.

    End terms are shoulders so that the universe is covered without any
    support leaving [0, 1].
    """
    level = LinguisticVariable(
        "uncertainty-level",
        (0.0, 1.0),
        {
            "Low": Trapezoidal(0.0, 0.0, 0.17, 0.5),
            "Medium": Triangular(0.17, 0.5, 0.83),
            "High": Trapezoidal(0.5, 0.83, 1.0, 1.0),
        },
    )
    certainty = LinguisticVariable(
        "certainty",
        (0.0, 1.0),
        {
            "Poor": Trapezoidal(0.0, 0.0, 0.17, 0.5),
            "Fair": Triangular(0.17, 0.5, 0.83),
            "Good": Trapezoidal(0.5, 0.83, 1.0, 1.0),
        },
    )
    rules = (
        FuzzyRule((("uncertainty-level", "Low"),), "Good"),
        FuzzyRule((("uncertainty-level", "Medium"),), "Fair"),
        FuzzyRule((("uncertainty-level", "High"),), "Poor"),
    )
    return RuleBase((level,), certainty, rules)


def validate_rule_base(rulebase: RuleBase, points: int = DEFAULT_RESOLUTION) -> list[str]:
    """Grid scan for coverage gaps and inputs on which no rule fires."""
    problems = []
    for var in (*rulebase.inputs, rulebase.output):
        gaps = var.coverage_gaps(points)
        if gaps:
            problems.append(
                f"variable {var.name!r}: coverage gap on [{gaps[0]:.4g}, {gaps[-1]:.4g}] ({len(gaps)} grid points)"
            )
    # Completeness over the product grid of the inputs, coarser when there are many.
    per_axis = max(5, int(round(points ** (1 / len(rulebase.inputs)))))
    axes = [np.linspace(*v.universe, per_axis) for v in rulebase.inputs]
    mesh = np.meshgrid(*axes, indexing="ij")
    degrees = {
        v.name: {t: mf(m.ravel()) for t, mf in v.terms.items()} for v, m in zip(rulebase.inputs, mesh)
    }
    fired = np.zeros(mesh[0].size, dtype=bool)
    for rule in rulebase.rules:
        strength = np.min([degrees[v][t] for v, t in rule.antecedents], axis=0)
        fired |= strength > 0
    if not fired.all():
        names = ", ".join(repr(v.name) for v in rulebase.inputs)
        problems.append(f"no rule fires for {int((~fired).sum())} grid inputs of {names}")
    return problems


# -- inference -----------------------------------------------------------------


def fuzzify(value: float, variable: LinguisticVariable) -> dict[str, float]:
    value = float(value)
    if not math.isfinite(value):
        raise FuzzyInputError(f"cannot fuzzify non-finite value {value!r}")
    lo, hi = variable.universe
    value = min(max(value, lo), hi)
    return {term: mf(value) for term, mf in variable.terms.items()}


@dataclass(frozen=True)
class Aggregate:
    """Pointwise maximum of membership functions clipped at their heights."""

    parts: tuple[tuple[MembershipFunction, float], ...]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for mf, height in self.parts:
            np.maximum(out, np.minimum(mf(x), height), out=out)
        return out

    @property
    def support(self) -> tuple[float, float]:
        live = [mf.support for mf, h in self.parts if h > 0]
        return (min(a for a, _ in live), max(d for _, d in live))


def infer(rulebase: RuleBase, fuzzified: Mapping[str, Mapping[str, float]]) -> Aggregate:
    strengths: dict[str, float] = {}
    for rule in rulebase.rules:
        try:
            strength = min(fuzzified[var][term] for var, term in rule.antecedents)
        except KeyError as exc:
            raise FuzzyInputError(f"no fuzzified degree for {exc.args[0]!r}") from None
        if strength > strengths.get(rule.consequent, 0.0):
            strengths[rule.consequent] = strength
    if not strengths:
        raise EmptyInferenceError("no rule fired")
    parts = tuple((rulebase.output.terms[t], s) for t, s in sorted(strengths.items()))
    return Aggregate(parts)


def defuzzify(aggregate, resolution: int = DEFAULT_RESOLUTION) -> float:
    """Centroid of ``aggregate`` over [0, 1] by the midpoint rule."""
    if resolution < 1:
        raise ValueError("resolution must be positive")
    x = (np.arange(resolution) + 0.5) / resolution
    mu = np.asarray(aggregate(x), dtype=float)
    area = mu.sum()
    if not area > 0:
        raise EmptyInferenceError("aggregate has zero area")
    return float(np.dot(x, mu) / area)


def quantify_epistemic(
    observation: Observation,
    rulebase: RuleBase | None = None,
    *,
    variable: str | None = None,
    resolution: int = DEFAULT_RESOLUTION,
) -> float:
    """Certainty score in [0, 1] for a linguistic label; 1 is least uncertain.

    The label is fuzzified at the centroid of its own membership function.
    If no rule fires the neutral score 0.5 is returned and a warning logged.
    """
    if observation.facet.kind is not FacetKind.EPISTEMIC or not isinstance(observation.payload, QualLabel):
        raise TaxonomyError(f"facet {observation.facet.name!r} is not qualitative")
    rulebase = rulebase or _DEFAULT
    var = rulebase.input(variable) if variable else rulebase.inputs[0]
    return label_score(rulebase, var.name, observation.payload.term, resolution)


@lru_cache(maxsize=4096)
def label_score(rulebase: RuleBase, variable: str, term: str, resolution: int = DEFAULT_RESOLUTION) -> float:
    var = rulebase.input(variable)
    crisp = var.term(term).centroid()
    try:
        return defuzzify(infer(rulebase, {var.name: fuzzify(crisp, var)}), resolution)
    except EmptyInferenceError:
        log.warning("empty inference for %s=%s; using neutral score %.1f", variable, term, FALLBACK_SCORE)
        return FALLBACK_SCORE


_DEFAULT = default_rule_base()
