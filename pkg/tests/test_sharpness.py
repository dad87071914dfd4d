import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carnot_hardy.fields import preset
from carnot_hardy.groups import euclidean
from carnot_hardy.sharpness import (
    DegenerateFamily,
    critical_problem,
    get_problem,
    hardy_problem,
    monotone_widths,
    probe,
    problems,
    rayleigh,
    rayleigh_of_field,
    refined_vs_plain,
    weighted_hardy_problem,
)

E3 = euclidean(3)


def test_problem_table():
    assert set(problems()) == {"hardy_euclid3", "hardy_heis2", "refined_hardy_heis2",
                               "weighted_hardy_euclid3", "critical_hardy_euclid3"}
    with pytest.raises(KeyError):
        get_problem("nope")
    assert get_problem("hardy_heis2").target == 1.0
    assert get_problem("weighted_hardy_euclid3").target == pytest.approx(0.0625)
    assert get_problem("critical_hardy_euclid3").target == 0.25
    with pytest.raises(ValueError):
        hardy_problem("euclid:2")
    with pytest.raises(ValueError):
        weighted_hardy_problem("heis:1", 0.25)
    with pytest.raises(ValueError):
        critical_problem("heis:1")


@pytest.mark.parametrize("c", [3.0, -0.5, 1e-3])
def test_quotient_is_scale_invariant(c):
    p = hardy_problem(E3)
    f = preset("nonradial", E3, [1, 0.6])
    a = rayleigh_of_field(p, f).quotient
    b = rayleigh_of_field(p, f.scaled(c)).quotient
    assert b == pytest.approx(a, rel=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.005, 0.5), st.floats(1.0, 12.0))
def test_hardy_quotient_never_below_sharp_constant(eps, s):
    p = hardy_problem(E3)
    v = rayleigh(p, (eps, s))
    assert v.quotient >= p.target - 10 * v.err


@pytest.mark.parametrize("name", ["logbump", "nonradial", "complex"])
def test_hardy_quotient_of_other_fields(name):
    p = hardy_problem(E3)
    v = rayleigh_of_field(p, preset(name, E3, [1, 0.7]))
    assert v.quotient >= p.target


def test_quotient_decreases_with_width():
    vals = [v.quotient for v in monotone_widths(hardy_problem(E3), 0.05)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 0.25


# the width-3 log cutoff at eps = 0.05 is claimed to land within 15% of 1/4;
# this family gives about 0.595, see the decision ledger
@pytest.mark.xfail(strict=True, reason="width-3 cutoff excess stays near 0.35 for this family")
def test_width_three_within_fifteen_percent():
    v = rayleigh(hardy_problem(E3), (0.05, 3.0))
    assert v.quotient <= 1.15 * 0.25


def test_width_three_value_frozen():
    # frozen from the quadrature at 48 nodes and cross-checked at 96
    v = rayleigh(hardy_problem(E3), (0.05, 3.0))
    w = rayleigh(hardy_problem(E3), (0.05, 3.0), nodes=96)
    assert v.quotient == pytest.approx(0.594754362, abs=1e-8)
    assert abs(v.quotient - w.quotient) <= 10 * (v.err + w.err) + 1e-8


def test_refined_not_above_plain():
    d = refined_vs_plain(E3, preset("nonradial", E3, [1, 0.6]))
    assert d["q_refined"] < d["q_plain"]
    r = refined_vs_plain(E3, preset("logbump", E3, [1, 0.6]))
    # for a radial field the two numerators coincide
    assert r["q_refined"] == pytest.approx(r["q_plain"], rel=1e-12)


def test_probe_doubled_nodes_agree():
    p = get_problem("hardy_euclid3")
    r = probe(p, budget=12)
    again = rayleigh(p, tuple(r.best_params.values()), nodes=2 * p.nodes)
    assert abs(again.quotient - r.best_quotient) <= 10 * (again.err + r.total_err) + 1e-8 * r.best_quotient
    assert r.respects_bound
    assert r.evaluations <= 12


def test_probe_is_deterministic():
    p = get_problem("weighted_hardy_euclid3")
    assert probe(p, budget=8).to_dict() == probe(p, budget=8).to_dict()


def test_probe_report_fields():
    d = probe(get_problem("critical_hardy_euclid3"), budget=5).to_dict()
    assert set(d) == {"problem_id", "target", "best_params", "best_quotient", "total_err", "gap", "budget",
                      "evaluations", "node_counts", "clamped", "respects_bound"}
    assert d["gap"] == pytest.approx(d["best_quotient"] - d["target"])
    assert d["node_counts"]["nodes_per_axis"] == 48
    with pytest.raises(ValueError):
        probe(get_problem("hardy_euclid3"), budget=0)


def test_parameters_outside_box_rejected():
    p = hardy_problem(E3)
    with pytest.raises(ValueError):
        rayleigh(p, (0.05, 100.0))
    with pytest.raises(ValueError):
        rayleigh(p, (-1.0, 3.0))


def test_degenerate_denominator():
    p = hardy_problem(E3)
    with pytest.raises(DegenerateFamily):
        rayleigh_of_field(p, preset("logbump", E3, [1, 0.5]).scaled(1e-20))


def test_critical_family_approaches_quarter():
    p = critical_problem(E3)
    a = rayleigh(p, (0.05, 4.0)).quotient
    b = rayleigh(p, (0.05, 12.0)).quotient
    assert 0.25 <= b < a
    assert not math.isnan(b)
