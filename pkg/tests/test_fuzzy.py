import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import integrate_centroid, mamdani_grid, piecewise_membership
from trustframe.errors import EmptyInferenceError, FuzzyInputError, RuleBaseError
from trustframe.fuzzy import (
    Aggregate,
    FuzzyRule,
    LinguisticVariable,
    RuleBase,
    Trapezoidal,
    Triangular,
    default_rule_base,
    defuzzify,
    fuzzify,
    infer,
    label_score,
    membership,
    quantify_epistemic,
    validate_rule_base,
)
from trustframe.uncertainty import FacetKind, Observation, QualLabel, UncertaintyFacet

GRID = (np.arange(1001) + 0.5) / 1001


def test_triangle_peak_and_support():
    tri = Triangular(0.2, 0.5, 0.9)
    assert tri(0.5) == 1.0
    assert tri(0.1) == 0.0 and tri(0.95) == 0.0
    assert tri(0.35) == pytest.approx(0.5)


def test_trapezoid_plateau_and_edges():
    trap = Trapezoidal(0.1, 0.3, 0.6, 0.8)
    assert trap(0.45) == 1.0
    assert trap(0.2) == pytest.approx(0.5)
    assert trap(0.7) == pytest.approx(0.5)
    np.testing.assert_allclose(trap(GRID), piecewise_membership((0.1, 0.3, 0.6, 0.8), GRID), atol=1e-15)


def test_scalar_and_vector_evaluation_agree():
    trap = Trapezoidal(0.0, 0.0, 0.17, 0.5)
    vec = trap(GRID)
    assert all(trap(float(x)) == v for x, v in zip(GRID[::50], vec[::50]))


@pytest.mark.parametrize("params", [(0.5, 0.4, 0.6, 0.7), (0.3, 0.3, 0.3, 0.3), (0.0, float("nan"), 0.5, 1.0)])
def test_bad_membership_parameters(params):
    with pytest.raises(RuleBaseError):
        Trapezoidal(*params)


def test_membership_factory():
    assert membership("triangular", [0, 0.5, 1]) == Triangular(0.0, 0.5, 1.0)
    with pytest.raises(RuleBaseError):
        membership("gaussian", [0.5, 0.1])


def test_analytic_centroid_matches_integration():
    for params in [(0.0, 0.0, 0.17, 0.5), (0.17, 0.5, 0.5, 0.83), (0.1, 0.2, 0.7, 0.75)]:
        mf = Trapezoidal(*params)
        assert mf.centroid() == pytest.approx(integrate_centroid(mf), abs=1e-6)


def test_variable_support_must_stay_in_universe():
    with pytest.raises(RuleBaseError):
        LinguisticVariable("v", (0.0, 1.0), {"Wide": Triangular(-0.2, 0.5, 1.0)})


def test_fuzzify_clamps_and_rejects_nonfinite():
    var = default_rule_base().inputs[0]
    assert fuzzify(-3.0, var) == fuzzify(0.0, var)
    assert fuzzify(0.0, var)["Low"] == 1.0
    with pytest.raises(FuzzyInputError):
        fuzzify(float("nan"), var)


def test_single_rule_full_strength_reproduces_consequent():
    rb = default_rule_base()
    agg = infer(rb, {"uncertainty-level": {"Low": 1.0, "Medium": 0.0, "High": 0.0}})
    np.testing.assert_array_equal(agg(GRID), rb.output.terms["Good"](GRID))


def test_single_rule_half_strength_clips():
    rb = default_rule_base()
    agg = infer(rb, {"uncertainty-level": {"Low": 0.5, "Medium": 0.0, "High": 0.0}})
    np.testing.assert_array_equal(agg(GRID), np.minimum(rb.output.terms["Good"](GRID), 0.5))


def test_same_consequent_keeps_strongest():
    level = LinguisticVariable("x", (0, 1), {"A": Trapezoidal(0, 0, 0.4, 0.6), "B": Trapezoidal(0.4, 0.6, 1, 1)})
    out = LinguisticVariable("y", (0, 1), {"C": Triangular(0.2, 0.5, 0.8)})
    rb = RuleBase((level,), out, (FuzzyRule((("x", "A"),), "C"), FuzzyRule((("x", "B"),), "C")))
    both = infer(rb, {"x": {"A": 0.3, "B": 0.6}})(GRID)
    single = np.minimum(Triangular(0.2, 0.5, 0.8)(GRID), 0.6)
    np.testing.assert_array_equal(both, single)


def test_no_rule_fires():
    rb = default_rule_base()
    with pytest.raises(EmptyInferenceError):
        infer(rb, {"uncertainty-level": {"Low": 0.0, "Medium": 0.0, "High": 0.0}})
    with pytest.raises(EmptyInferenceError):
        defuzzify(lambda x: np.zeros_like(x))


def test_defuzzify_symmetric_and_uniform():
    assert defuzzify(Triangular(0.2, 0.5, 0.8)) == pytest.approx(0.5, abs=1 / 1001)
    assert defuzzify(lambda x: np.ones_like(x)) == pytest.approx(0.5, abs=1e-12)


def test_clipped_asymmetric_trapezoid_against_dense_oracle():
    agg = Aggregate(((Trapezoidal(0.05, 0.3, 0.4, 0.95), 0.7),))
    assert abs(defuzzify(agg, 1001) - integrate_centroid(agg)) < 1e-4


def test_default_label_scores_are_ordered():
    rb = default_rule_base()
    low, med, high = (label_score(rb, "uncertainty-level", t) for t in ("Low", "Medium", "High"))
    assert high < med < low
    assert low > 2 / 3
    assert med == pytest.approx(0.5, abs=1e-9)
    assert low + high == pytest.approx(1.0, abs=1e-9)  # mirror-symmetric rule base


def test_label_score_matches_grid_oracle():
    rb = default_rule_base()
    inputs = {"uncertainty-level": {t: mf.params for t, mf in rb.inputs[0].terms.items()}}
    outs = {t: mf.params for t, mf in rb.output.terms.items()}
    rules = [(r.antecedents, r.consequent) for r in rb.rules]
    for term, mf in rb.inputs[0].terms.items():
        agg = mamdani_grid(rules, inputs, outs, {"uncertainty-level": mf.centroid()}, GRID)
        expect = float(np.dot(GRID, agg) / agg.sum())
        assert label_score(rb, "uncertainty-level", term) == pytest.approx(expect, abs=1e-12)


def test_quantify_epistemic_on_observation():
    facet = UncertaintyFacet("s", FacetKind.EPISTEMIC, "s")
    q_low = quantify_epistemic(Observation(facet, QualLabel("Low")))
    q_high = quantify_epistemic(Observation(facet, QualLabel("High")))
    assert 2 / 3 <= q_low <= 1 and q_high < q_low


def test_degenerate_rule_base_returns_consequent_centroid():
    anything = LinguisticVariable("level", (0, 1), {"Any": Trapezoidal(0, 0, 1, 1)})
    certain = LinguisticVariable("certainty", (0, 1), {"Certain": Triangular(0, 1, 1)})
    rb = RuleBase((anything,), certain, (FuzzyRule((("level", "Any"),), "Certain"),))
    facet = UncertaintyFacet("s", FacetKind.EPISTEMIC, "s", ("Any",))
    q = quantify_epistemic(Observation(facet, QualLabel("Any")), rb)
    assert q == pytest.approx(2 / 3, abs=1e-6)


def test_validate_default_rule_base_clean():
    assert validate_rule_base(default_rule_base()) == []


def test_validate_reports_gap_by_variable_name():
    gappy = LinguisticVariable("gappy", (0, 1), {"L": Trapezoidal(0, 0, 0.2, 0.4), "H": Trapezoidal(0.6, 0.8, 1, 1)})
    out = default_rule_base().output
    rb = RuleBase((gappy,), out, (FuzzyRule((("gappy", "L"),), "Good"), FuzzyRule((("gappy", "H"),), "Poor")))
    problems = validate_rule_base(rb)
    assert any("'gappy'" in p and "coverage gap" in p for p in problems)
    assert any("no rule fires" in p for p in problems)


def test_validate_reports_incomplete_rule_set():
    rb = default_rule_base()
    partial = RuleBase(rb.inputs, rb.output, rb.rules[:2])
    assert any("no rule fires" in p for p in validate_rule_base(partial))


def test_rule_base_rejects_unknown_references():
    rb = default_rule_base()
    with pytest.raises(RuleBaseError):
        RuleBase(rb.inputs, rb.output, (FuzzyRule((("uncertainty-level", "Extreme"),), "Good"),))
    with pytest.raises(RuleBaseError):
        RuleBase(rb.inputs, rb.output, (FuzzyRule((("uncertainty-level", "Low"),), "Perfect"),))


def test_two_input_rule_base_against_grid_oracle():
    a = LinguisticVariable("a", (0, 1), {"lo": Trapezoidal(0, 0, 0.3, 0.7), "hi": Trapezoidal(0.3, 0.7, 1, 1)})
    b = LinguisticVariable("b", (0, 1), {"lo": Trapezoidal(0, 0, 0.4, 0.6), "hi": Trapezoidal(0.4, 0.6, 1, 1)})
    out = default_rule_base().output
    rules = [
        ((("a", "lo"), ("b", "lo")), "Good"),
        ((("a", "lo"), ("b", "hi")), "Fair"),
        ((("a", "hi"), ("b", "lo")), "Fair"),
        ((("a", "hi"), ("b", "hi")), "Poor"),
    ]
    rb = RuleBase((a, b), out, tuple(FuzzyRule(ants, c) for ants, c in rules))
    inputs = {v.name: {t: mf.params for t, mf in v.terms.items()} for v in (a, b)}
    outs = {t: mf.params for t, mf in out.terms.items()}
    rng = np.random.default_rng(3)
    for xa, xb in rng.random((50, 2)):
        got = defuzzify(infer(rb, {"a": fuzzify(xa, a), "b": fuzzify(xb, b)}))
        agg = mamdani_grid(rules, inputs, outs, {"a": xa, "b": xb}, GRID)
        assert got == pytest.approx(float(np.dot(GRID, agg) / agg.sum()), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=4, max_size=4), st.floats(0.01, 1.0))
def test_defuzzified_value_stays_in_support(pts, height):
    a, b, c, d = sorted(pts)
    if d - a < 3e-3:
        return
    agg = Aggregate(((Trapezoidal(a, b, c, d), height),))
    value = defuzzify(agg)
    assert a - 1e-3 <= value <= d + 1e-3
    assert 0.0 <= value <= 1.0 and math.isfinite(value)
