"""Uncertainty taxonomy, facet decomposition and observation records.

The eleven canonical sources carry a severity tier (1 = most severe) and a
category.  Sources that are both aleatoric and epistemic are split into
facets so that every piece of evidence is exactly one kind; quantification
works on facets, weighting works on sources.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

from .errors import ObservationError, TaxonomyError


class Category(str, enum.Enum):
    ALEATORIC = "Aleatoric"
    EPISTEMIC = "Epistemic"
    BOTH = "Both"


class FacetKind(str, enum.Enum):
    ALEATORIC = "Aleatoric"
    EPISTEMIC = "Epistemic"


DEFAULT_TERMS: tuple[str, ...] = ("Low", "Medium", "High")

# (name, priority, category) in severity order.
_CANONICAL = (
    ("Hardware Malfunctions", 1, Category.BOTH),
    ("Data Management", 2, Category.ALEATORIC),
    ("Network Design", 2, Category.BOTH),
    ("Network Stability", 2, Category.BOTH),
    ("Devices Heterogeneity", 3, Category.BOTH),
    ("Data Quality", 3, Category.ALEATORIC),
    ("Network Scalability", 3, Category.EPISTEMIC),
    ("Privacy Protection", 3, Category.BOTH),
    ("Quality of Service", 4, Category.ALEATORIC),
    ("Geographical Dispersal", 4, Category.ALEATORIC),
    ("Environmental Effects", 4, Category.BOTH),
)
CANONICAL_VALUES = {name: (prio, cat) for name, prio, cat in _CANONICAL}


def slugify(name: str) -> str:
    return "-".join(name.lower().split())


@dataclass(frozen=True)
class UncertaintySource:
    """A named source of uncertainty.

    No checks happen here: custom taxonomies may arrive malformed from a
    scenario file, and :func:`validate_scenario_taxonomy` reports on them
    instead of aborting.  ``category`` is a :class:`Category` when valid and
    the raw string otherwise.
    """

    id: str
    name: str
    priority: int
    category: Union[Category, str]


@dataclass(frozen=True)
class UncertaintyFacet:
    source_id: str
    kind: FacetKind
    name: str
    terms: tuple[str, ...] = DEFAULT_TERMS

    def __post_init__(self):
        if not isinstance(self.kind, FacetKind):
            try:
                object.__setattr__(self, "kind", FacetKind(self.kind))
            except ValueError:
                raise TaxonomyError(f"facet {self.name!r}: unknown kind {self.kind!r}") from None
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.kind is FacetKind.EPISTEMIC and not self.terms:
            raise TaxonomyError(f"epistemic facet {self.name!r} declares no terms")

    @property
    def id(self) -> str:
        return self.name


def canonical_taxonomy() -> list[UncertaintySource]:
    return [UncertaintySource(slugify(name), name, prio, cat) for name, prio, cat in _CANONICAL]


def default_facets(sources: Iterable[UncertaintySource]) -> list[UncertaintyFacet]:
    """Minimal decomposition: one facet per kind the source's category covers.

    Mixed sources yield ``<name>/measured`` (aleatoric) and
    ``<name>/assessed`` (epistemic); single-kind sources keep their name.
    """
    facets = []
    for src in sources:
        if src.category == Category.BOTH:
            facets.append(UncertaintyFacet(src.id, FacetKind.ALEATORIC, f"{src.name}/measured"))
            facets.append(UncertaintyFacet(src.id, FacetKind.EPISTEMIC, f"{src.name}/assessed"))
        elif src.category == Category.ALEATORIC:
            facets.append(UncertaintyFacet(src.id, FacetKind.ALEATORIC, src.name))
        elif src.category == Category.EPISTEMIC:
            facets.append(UncertaintyFacet(src.id, FacetKind.EPISTEMIC, src.name))
    return facets


@dataclass(frozen=True)
class Taxonomy:
    """Sources plus their facet decomposition, with lookups by id and name."""

    sources: tuple[UncertaintySource, ...]
    facets: tuple[UncertaintyFacet, ...]
    _by_source: dict = field(init=False, repr=False, compare=False, hash=False)
    _by_facet: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "facets", tuple(self.facets))
        object.__setattr__(self, "_by_source", {s.id: s for s in self.sources})
        object.__setattr__(self, "_by_facet", {f.name: f for f in self.facets})

    @classmethod
    def canonical(cls) -> Taxonomy:
        sources = canonical_taxonomy()
        return cls(tuple(sources), tuple(default_facets(sources)))

    def source(self, source_id: str) -> UncertaintySource:
        try:
            return self._by_source[source_id]
        except KeyError:
            raise TaxonomyError(f"unknown uncertainty source {source_id!r}") from None

    def source_by_name(self, name: str) -> UncertaintySource:
        for src in self.sources:
            if src.name == name or src.id == name:
                return src
        raise TaxonomyError(f"unknown uncertainty source {name!r}")

    def facet(self, name: str) -> UncertaintyFacet:
        try:
            return self._by_facet[name]
        except KeyError:
            raise TaxonomyError(f"unknown facet {name!r}") from None

    def source_of(self, facet: UncertaintyFacet) -> UncertaintySource:
        return self.source(facet.source_id)

    def __contains__(self, facet: object) -> bool:
        return isinstance(facet, UncertaintyFacet) and self._by_facet.get(facet.name) == facet


# -- observations -----------------------------------------------------------


@dataclass(frozen=True)
class QuantSamples:
    values: tuple[float, ...]
    unit: str = ""

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not values:
            raise ObservationError("quantitative samples must be nonempty")
        if not all(math.isfinite(v) for v in values):
            raise ObservationError("quantitative samples must be finite")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class QualLabel:
    term: str


@dataclass(frozen=True)
class Observation:
    """One piece of evidence about one facet.

    Quantitative samples go with aleatoric facets, linguistic labels with
    epistemic ones; anything else is rejected here, so a constructed
    observation is always consistent.
    """

    facet: UncertaintyFacet
    payload: Union[QuantSamples, QualLabel]

    def __post_init__(self):
        kind = self.facet.kind
        if isinstance(self.payload, QuantSamples):
            if kind is not FacetKind.ALEATORIC:
                raise ObservationError(f"facet {self.facet.name!r} is {kind.value}; got samples")
        elif isinstance(self.payload, QualLabel):
            if kind is not FacetKind.EPISTEMIC:
                raise ObservationError(f"facet {self.facet.name!r} is {kind.value}; got a label")
            if self.payload.term not in self.facet.terms:
                raise TaxonomyError(
                    f"term {self.payload.term!r} not in term set {self.facet.terms} of {self.facet.name!r}"
                )
        else:
            raise ObservationError(f"unsupported payload {type(self.payload).__name__}")

    @property
    def kind(self) -> FacetKind:
        return self.facet.kind


@dataclass(frozen=True)
class UncertaintySet:
    elements: tuple[Observation, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    @property
    def facets(self) -> list[UncertaintyFacet]:
        return [obs.facet for obs in self.elements]


def partition(
    uset: UncertaintySet, taxonomy: Taxonomy | None = None
) -> tuple[tuple[Observation, ...], tuple[Observation, ...]]:
    """Split into (aleatoric, epistemic), keeping input order inside each part.

    With a taxonomy, every element's facet must belong to it.
    """
    aleatoric, epistemic = [], []
    for obs in uset.elements:
        if taxonomy is not None and obs.facet not in taxonomy:
            raise TaxonomyError(f"facet {obs.facet.name!r} is not part of the taxonomy")
        if obs.facet.kind is FacetKind.ALEATORIC:
            aleatoric.append(obs)
        elif obs.facet.kind is FacetKind.EPISTEMIC:
            epistemic.append(obs)
        else:  # pragma: no cover - UncertaintyFacet coerces kinds
            raise TaxonomyError(f"facet {obs.facet.name!r} has no usable kind")
    return tuple(aleatoric), tuple(epistemic)


# -- validation ---------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.subject}: {self.message}"


def validate_scenario_taxonomy(
    custom: Sequence[UncertaintySource],
    facets: Sequence[UncertaintyFacet] | None = None,
) -> list[Violation]:
    """Report taxonomy problems without raising.

    ``facets`` defaults to :func:`default_facets` of the valid sources, which
    always decomposes correctly; pass an explicit decomposition to check it.
    """
    found: list[Violation] = []
    ids = Counter(src.id for src in custom)
    for dup in sorted(i for i, c in ids.items() if c > 1):
        found.append(Violation(dup, "duplicate source id"))

    for src in custom:
        if not isinstance(src.priority, int) or isinstance(src.priority, bool) or not 1 <= src.priority <= 4:
            found.append(Violation(src.name, f"priority out of range: {src.priority!r}"))
        if not isinstance(src.category, Category):
            try:
                Category(src.category)
            except ValueError:
                found.append(Violation(src.name, f"undeclared category {src.category!r}"))
                continue
        canon = CANONICAL_VALUES.get(src.name)
        if canon is not None and (src.priority, Category(src.category)) != canon:
            found.append(
                Violation(
                    src.name,
                    f"canonical source must have priority {canon[0]} and category {canon[1].value}",
                )
            )

    if facets is None:
        facets = default_facets(s for s in custom if isinstance(s.category, Category))

    known = {src.id for src in custom}
    kinds: dict[str, list[FacetKind]] = {src.id: [] for src in custom}
    names = Counter(f.name for f in facets)
    for dup in sorted(n for n, c in names.items() if c > 1):
        found.append(Violation(dup, "duplicate facet name"))
    for facet in facets:
        if facet.source_id not in known:
            found.append(Violation(facet.name, f"facet refers to unknown source {facet.source_id!r}"))
            continue
        kinds[facet.source_id].append(facet.kind)

    for src in custom:
        try:
            cat = Category(src.category)
        except ValueError:
            continue
        have = kinds.get(src.id, [])
        if cat is Category.BOTH:
            if FacetKind.ALEATORIC not in have:
                found.append(Violation(src.name, "missing aleatoric facet"))
            if FacetKind.EPISTEMIC not in have:
                found.append(Violation(src.name, "missing epistemic facet"))
        else:
            want = FacetKind(cat.value)
            if want not in have:
                found.append(Violation(src.name, f"missing {want.value.lower()} facet"))
            elif have.count(want) > 1:
                found.append(Violation(src.name, f"{cat.value} source must have exactly one facet"))
            if any(k is not want for k in have):
                found.append(Violation(src.name, f"{cat.value} source has a facet of the other kind"))
    return found
