import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carnot_hardy.fields import parse_field, preset
from carnot_hardy.groups import euclidean, heisenberg
from carnot_hardy.opalgebra import Applied, Calculus
from carnot_hardy.quadrature import (
    ErrorCapExceeded,
    PolarLayout,
    QuadratureError,
    QuadratureSpec,
    gauss_legendre_1d,
    integrate,
    spec_for_field,
    weighted_inner,
    weighted_l2_sq,
)

H1 = heisenberg(1)
E3 = euclidean(3)


def test_constant_on_unit_cube():
    spec = QuadratureSpec(box=((0, 1),) * 3, nodes_per_axis=8)
    r = integrate(lambda p: np.ones(len(p)), spec)
    assert r.value == pytest.approx(1.0, abs=1e-14)
    assert r.err_estimate <= 1e-14
    assert r.nodes_used == (8**3, 16**3)


def test_separable_integrand_is_product_of_1d_rules():
    a = lambda x: np.cos(3 * x) + x**2
    b = lambda y: np.exp(-y) * np.sin(y + 0.3)
    spec = QuadratureSpec(box=((-1, 2), (0, 1.5)), nodes_per_axis=24)
    r = integrate(lambda p: a(p[:, 0]) * b(p[:, 1]), spec)
    t1, w1 = gauss_legendre_1d(24, -1, 2)
    t2, w2 = gauss_legendre_1d(24, 0, 1.5)
    want = math.fsum(w1 * a(t1)) * math.fsum(w2 * b(t2))
    assert r.value == pytest.approx(want, rel=1e-12)


def test_bump_stable_under_refinement():
    f = preset("logbump", E3, [1, 0.5])
    v32 = weighted_l2_sq(f, 0, spec_for_field(f, nodes=32, angular_nodes=8)).value
    v64 = weighted_l2_sq(f, 0, spec_for_field(f, nodes=64, angular_nodes=8)).value
    assert abs(v32 - v64) <= 1e-8 * v64


def test_weighted_norms_basic_relations():
    f = preset("nonradial", E3, [3, 0.4])
    spec = spec_for_field(f, nodes=32, angular_nodes=8)
    plain = weighted_l2_sq(f, 0, spec)
    direct = integrate(lambda p: np.abs(f.value(p)) ** 2, spec, f.support_box, f.support.annulus)
    assert plain.value == direct.value
    assert f.stratum_margin >= 2
    assert weighted_l2_sq(f, -1, spec).value <= plain.value / 4
    inner = weighted_inner(f, f, 0, spec)
    assert inner.value == pytest.approx(plain.value, rel=1e-14)


def test_heisenberg_weighted_norm_two_specs():
    f = preset("logbump", H1, [1, 1])
    a = weighted_l2_sq(f, -2, spec_for_field(f, nodes=32, angular_nodes=8))
    b = weighted_l2_sq(f, -2, spec_for_field(f, nodes=48, angular_nodes=12))
    assert a.value > 0
    assert abs(a.value - b.value) <= 10 * (a.err_estimate + b.err_estimate)


def test_zt_term_of_radial_product_field_vanishes():
    f = preset("logbump", H1, [1, 1])
    c = Calculus(H1)
    spec = spec_for_field(f, nodes=24, angular_nodes=8)
    r = weighted_inner(Applied(c.Z, f), Applied(c.T, f), -1, spec)
    assert abs(r.value) <= 1e-15


def test_zt_term_of_complex_field_is_real():
    f = preset("complex", H1, [1, 1])
    c = Calculus(H1)
    spec = spec_for_field(f, nodes=32, angular_nodes=8)
    r = weighted_inner(Applied(c.Z, f), Applied(c.T, f), -1, spec)
    assert abs(r.value.real) > 1e-3
    assert abs(r.value.imag) <= 10 * r.err_estimate + 1e-14 * abs(r.value)


@pytest.mark.parametrize("j", ["X1", "Y1", "T"])
def test_vector_fields_are_skew(j):
    f = preset("nonradial", H1, [1, 1])
    g = preset("complex", H1, [1, 1])
    c = Calculus(H1)
    spec = spec_for_field([f, g], nodes=32, angular_nodes=8)
    op = c.prims[j]
    lhs = weighted_inner(Applied(op, f), g, 0, spec)
    rhs = weighted_inner(f, Applied(op, g), 0, spec)
    assert abs(lhs.value + rhs.value) <= 10 * (lhs.err_estimate + rhs.err_estimate) + 1e-13


def test_sublaplacian_is_symmetric():
    f = preset("nonradial", H1, [1, 1])
    g = preset("logbump", H1, [1, 0.8])
    c = Calculus(H1)
    spec = spec_for_field([f, g], nodes=32, angular_nodes=8)
    lhs = weighted_inner(Applied(c.L, f), g, 0, spec)
    rhs = weighted_inner(f, Applied(c.L, g), 0, spec)
    assert abs(lhs.value - rhs.value) <= 10 * (lhs.err_estimate + rhs.err_estimate) + 1e-13


def test_deterministic_across_worker_counts():
    f = preset("complex", H1, [1, 1])
    spec = spec_for_field(f, nodes=16, angular_nodes=8)
    g = lambda p: np.stack([np.abs(f.value(p)) ** 2, f.value(p)], axis=1)
    a = integrate(g, spec, chunk=257, workers=1)
    b = integrate(g, spec, chunk=257, workers=4)
    c = integrate(g, spec, chunk=4096, workers=2)
    np.testing.assert_array_equal(a.value, b.value)
    np.testing.assert_array_equal(a.value, c.value)


def test_support_and_cap_errors():
    f = preset("logbump", E3, [1, 1])
    small = QuadratureSpec(box=((-1, 1),) * 3, nodes_per_axis=8)
    with pytest.raises(QuadratureError):
        weighted_l2_sq(f, 0, small)
    capped = spec_for_field(f, nodes=4, angular_nodes=4, err_cap=1e-30)
    with pytest.raises(ErrorCapExceeded):
        weighted_l2_sq(f, 0, capped)
    g = parse_field("(cut (x 0) 0 1)", 3)
    with pytest.raises(QuadratureError):
        spec_for_field(g)


def test_negative_weight_needs_margin():
    g = parse_field("(mul (cut (x 0) 0 1) (cut (x 1) 0 1) (cut (x 2) 0 1))", 3)
    spec = spec_for_field(g, nodes=8, coords="cartesian")
    assert weighted_l2_sq(g, 0, spec).value > 0
    with pytest.raises(QuadratureError):
        weighted_l2_sq(g, -1, spec)


def test_spec_validation_and_serialization():
    with pytest.raises(ValueError):
        QuadratureSpec(box=((0, 1),), nodes_per_axis=3)
    with pytest.raises(ValueError):
        QuadratureSpec(box=((0, 1),), refinement_factor=1)
    with pytest.raises(ValueError):
        PolarLayout(3, (0.0, 1.0), "log")
    d = QuadratureSpec(box=((0, 1), (2, 3)), nodes_per_axis=12).to_dict()
    assert d == {"nodes_per_axis": 12, "refinement_factor": 2, "box": [[0.0, 1.0], [2.0, 3.0]]}


@settings(max_examples=25, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(0.2, 1.0), st.floats(0.5, 4.0))
def test_integral_scales_homogeneously(r0, s, c):
    f = preset("logbump", E3, [r0, s])
    spec = spec_for_field(f, nodes=16, angular_nodes=8)
    a = weighted_l2_sq(f, 0, spec).value
    b = weighted_l2_sq(f.scaled(c), 0, spec).value
    assert b == pytest.approx(c * c * a, rel=1e-12)
