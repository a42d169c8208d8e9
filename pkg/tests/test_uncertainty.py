from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trustframe.errors import ObservationError, TaxonomyError
from trustframe.uncertainty import (
    Category,
    FacetKind,
    Observation,
    QualLabel,
    QuantSamples,
    Taxonomy,
    UncertaintyFacet,
    UncertaintySet,
    UncertaintySource,
    canonical_taxonomy,
    default_facets,
    partition,
    validate_scenario_taxonomy,
)

# Expected canonical sources: (name, priority, category).
TABLE = [
    ("Hardware Malfunctions", 1, "Both"),
    ("Data Management", 2, "Aleatoric"),
    ("Network Design", 2, "Both"),
    ("Network Stability", 2, "Both"),
    ("Devices Heterogeneity", 3, "Both"),
    ("Data Quality", 3, "Aleatoric"),
    ("Network Scalability", 3, "Epistemic"),
    ("Privacy Protection", 3, "Both"),
    ("Quality of Service", 4, "Aleatoric"),
    ("Geographical Dispersal", 4, "Aleatoric"),
    ("Environmental Effects", 4, "Both"),
]


def test_canonical_matches_table():
    got = [(s.name, s.priority, s.category.value) for s in canonical_taxonomy()]
    assert got == TABLE


def test_canonical_spot_checks():
    by_name = {s.name: s for s in canonical_taxonomy()}
    assert (by_name["Hardware Malfunctions"].priority, by_name["Hardware Malfunctions"].category) == (1, Category.BOTH)
    assert (by_name["Network Scalability"].priority, by_name["Network Scalability"].category) == (3, Category.EPISTEMIC)
    assert len(by_name) == 11
    assert {s.priority for s in by_name.values()} <= {1, 2, 3, 4}


def test_default_facets_split_mixed_sources():
    facets = default_facets(canonical_taxonomy())
    kinds = Counter(f.source_id for f in facets)
    for src in canonical_taxonomy():
        assert kinds[src.id] == (2 if src.category is Category.BOTH else 1)
    assert len(facets) == 17


def test_canonical_validates_clean():
    assert validate_scenario_taxonomy(canonical_taxonomy()) == []


def test_priority_out_of_range():
    bad = [UncertaintySource("x", "Sensor Drift", 5, Category.ALEATORIC)]
    msgs = [v.message for v in validate_scenario_taxonomy(bad)]
    assert any("priority out of range" in m for m in msgs)


def test_undeclared_category():
    bad = [UncertaintySource("x", "Sensor Drift", 2, "Mystery")]
    msgs = [v.message for v in validate_scenario_taxonomy(bad)]
    assert any("undeclared category" in m for m in msgs)


def test_both_source_missing_epistemic_facet():
    src = UncertaintySource("hw", "Sensor Drift", 1, Category.BOTH)
    facets = [UncertaintyFacet("hw", FacetKind.ALEATORIC, "Sensor Drift/measured")]
    msgs = [v.message for v in validate_scenario_taxonomy([src], facets)]
    assert "missing epistemic facet" in msgs


def test_canonical_source_with_altered_priority():
    src = UncertaintySource("hardware-malfunctions", "Hardware Malfunctions", 3, Category.BOTH)
    assert validate_scenario_taxonomy([src])


def test_duplicate_ids_reported():
    a = UncertaintySource("dup", "A", 1, Category.ALEATORIC)
    b = UncertaintySource("dup", "B", 2, Category.ALEATORIC)
    assert any(v.message == "duplicate source id" for v in validate_scenario_taxonomy([a, b]))


def test_observation_kind_must_match_payload():
    tax = Taxonomy.canonical()
    measured = tax.facet("Hardware Malfunctions/measured")
    assessed = tax.facet("Hardware Malfunctions/assessed")
    with pytest.raises(ObservationError):
        Observation(measured, QualLabel("Low"))
    with pytest.raises(ObservationError):
        Observation(assessed, QuantSamples((1.0, 2.0)))
    with pytest.raises(TaxonomyError):
        Observation(assessed, QualLabel("Unknown"))


@pytest.mark.parametrize("values", [(), (1.0, float("nan")), (float("inf"),)])
def test_samples_must_be_finite_and_nonempty(values):
    with pytest.raises(ObservationError):
        QuantSamples(values)


def test_unknown_facet_kind():
    with pytest.raises(TaxonomyError):
        UncertaintyFacet("x", "Sideways", "x")


def test_partition_empty():
    assert partition(UncertaintySet()) == ((), ())


def test_partition_counts():
    tax = Taxonomy.canonical()
    al = [Observation(tax.facet(n), QuantSamples((1.0, 2.0))) for n in ("Data Quality", "Quality of Service", "Data Management")]
    ep = [Observation(tax.facet(n), QualLabel("Low")) for n in ("Network Scalability", "Privacy Protection/assessed")]
    a, e = partition(UncertaintySet(tuple(al[:2] + ep[:1] + al[2:] + ep[1:])))
    assert (len(a), len(e)) == (3, 2)
    assert list(a) == al and list(e) == ep


def test_partition_rejects_foreign_facet():
    foreign = UncertaintyFacet("elsewhere", FacetKind.ALEATORIC, "Elsewhere")
    uset = UncertaintySet((Observation(foreign, QuantSamples((1.0,))),))
    with pytest.raises(TaxonomyError):
        partition(uset, Taxonomy.canonical())


_FACETS = Taxonomy.canonical().facets


@st.composite
def uncertainty_sets(draw, max_size=50):
    n = draw(st.integers(0, max_size))
    elems = []
    for _ in range(n):
        facet = draw(st.sampled_from(_FACETS))
        if facet.kind is FacetKind.ALEATORIC:
            vals = draw(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=4))
            elems.append(Observation(facet, QuantSamples(tuple(vals))))
        else:
            elems.append(Observation(facet, QualLabel(draw(st.sampled_from(facet.terms)))))
    return UncertaintySet(tuple(elems))


@settings(max_examples=300, deadline=None)
@given(uncertainty_sets())
def test_partition_reconstructs_input(uset):
    a, e = partition(uset, Taxonomy.canonical())
    assert len(a) + len(e) == len(uset)
    assert Counter(a + e) == Counter(uset.elements)
    assert all(o.kind is FacetKind.ALEATORIC for o in a)
    assert all(o.kind is FacetKind.EPISTEMIC for o in e)
