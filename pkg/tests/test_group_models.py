import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carnot_hardy.fields import ScalarField, coord, mul, norm1, parse_field, power
from carnot_hardy.groups import (
    DilationStructure,
    GroupModel,
    QuasiNormSpec,
    anisotropic,
    dilate,
    euclidean,
    heisenberg,
    parse_model,
    polar_consistency_ratio,
    quasi_norm,
    radial_derivative,
)
from carnot_hardy.quadrature import QuadratureSpec


def test_dilate_examples():
    np.testing.assert_array_equal(dilate(DilationStructure((1, 1)), 2, [1, 1]), [2, 2])
    np.testing.assert_array_equal(dilate(DilationStructure((1, 2)), 3, [1, 1]), [3, 9])
    np.testing.assert_array_equal(dilate(DilationStructure((1, 2)), 1, [5, 7]), [5, 7])
    with pytest.raises(ValueError):
        dilate(DilationStructure((1, 2)), 0, [1, 1])


def test_dilation_weights_validated_and_q_exact():
    d = DilationStructure((Fraction(1, 3), Fraction(2, 3), 2))
    assert d.q_hom == 3 and isinstance(d.q_hom, Fraction)
    with pytest.raises(ValueError):
        DilationStructure((1, 0))


def test_quasi_norm_examples():
    assert quasi_norm(euclidean(3), [3, 4, 0]) == pytest.approx(5)
    d, q = DilationStructure((1, 2)), QuasiNormSpec("anisotropic", 2)
    assert quasi_norm((d, q), [0, 4]) == pytest.approx(2)
    x = np.array([1.0, 1.0])
    assert quasi_norm((d, q), dilate(d, 2, x)) == pytest.approx(2 * quasi_norm((d, q), x))


def test_invalid_quasi_norm_specs():
    with pytest.raises(ValueError):
        quasi_norm((DilationStructure((1, 2)), QuasiNormSpec("euclidean")), [1, 1])
    with pytest.raises(ValueError):
        QuasiNormSpec("anisotropic", 1).validate(DilationStructure((1, 3)))


def test_model_dimensions():
    h = heisenberg(2)
    assert (h.ambient_dim, h.N, h.q_hom, h.step) == (5, 4, 6, 2)
    e = euclidean(3)
    assert (e.ambient_dim, e.N, e.q_hom, e.step) == (3, 3, 3, 1)
    a = anisotropic([1, 2])
    assert a.quasi.m == 2 and a.q_hom == 3


@pytest.mark.parametrize("text", ["euclid:3", "heis:1", "heis:2", "aniso:1,2", "aniso:1/2,1"])
def test_config_round_trip(text):
    m = parse_model(text)
    assert GroupModel.from_config(m.to_config()) == m
    assert parse_model(m.label) == m


@pytest.mark.parametrize("text", ["euclid", "heis:0", "torus:2", "aniso:1,-1"])
def test_bad_model_text(text):
    with pytest.raises(ValueError):
        parse_model(text)


@settings(max_examples=100, deadline=None)
@given(
    st.sampled_from(["euclid:3", "aniso:1,2", "aniso:1,1,2", "heis:1"]),
    st.lists(st.floats(-5, 5), min_size=5, max_size=5),
    st.floats(0.01, 100),
)
def test_quasi_norm_homogeneous(text, xs, lam):
    m = parse_model(text)
    x = np.array(xs[: m.ambient_dim])
    r = m.quasi_norm(x)
    r_l = m.quasi_norm(dilate(m.dilation, lam, x))
    assert abs(r_l - lam * r) <= 1e-12 * max(lam * r, 1e-300)


def _field(m, text):
    return parse_field(text, m.ambient_dim, m.stratum)


def test_radial_derivative_examples():
    e3 = euclidean(3)
    f = ScalarField(3, power(norm1(), 2))
    x = np.array([1.0, 2.0, 2.0])
    assert radial_derivative(e3, f, x).real == pytest.approx(2 * 3)
    g = _field(e3, "(exp (mul -1 (pow (norm1) 2)))")
    assert radial_derivative(e3, g, [1, 0, 0]).real == pytest.approx(-2 * math.exp(-1), rel=1e-14)
    a = anisotropic([1, 2])
    r = _field(a, "(qnorm 4 4 2)")
    for pt in ([0.3, 0.7], [-1.2, 0.1], [2.0, -3.0]):
        assert radial_derivative(a, r, pt).real == pytest.approx(1.0, rel=1e-13)


def test_radial_derivative_rejects_origin_and_heisenberg():
    with pytest.raises(ValueError):
        radial_derivative(euclidean(2), _field(euclidean(2), "(x 0)"), [0.0, 0.0])
    with pytest.raises(ValueError):
        radial_derivative(heisenberg(1), _field(heisenberg(1), "(x 0)"), [1.0, 0.0, 0.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.1, 3), min_size=3, max_size=3), st.lists(st.booleans(), min_size=3, max_size=3))
def test_radial_derivative_kills_zero_homogeneous(xs, signs):
    x = np.array([v if s else -v for v, s in zip(xs, signs)])
    e3 = euclidean(3)
    f = ScalarField(3, mul(coord(0), coord(0), power(norm1(), -2)))
    assert abs(radial_derivative(e3, f, x)) <= 1e-12


@pytest.mark.parametrize("gamma", [-2, -1, 1, 2, 3])
def test_radial_derivative_of_norm_powers(gamma):
    e3 = euclidean(3)
    f = ScalarField(3, power(norm1(), gamma))
    rng = np.random.default_rng(gamma + 10)
    for _ in range(5):
        x = rng.uniform(-2, 2, 3)
        r = np.linalg.norm(x)
        assert radial_derivative(e3, f, x).real == pytest.approx(gamma * r ** (gamma - 1), rel=1e-12)


def _profile(lo, hi):
    def h(r):
        r = np.asarray(r, dtype=float)
        u = (2 * r - lo - hi) / (hi - lo)
        out = np.zeros_like(r)
        m = np.abs(u) < 1
        out[m] = np.exp(-1 / (1 - u[m] ** 2))
        return out

    return h


def test_polar_ratio_sphere_areas():
    quad = QuadratureSpec(box=((0, 1),), nodes_per_axis=64)
    r3 = polar_consistency_ratio(euclidean(3), _profile(0.5, 1.5), (0.5, 1.5), quad)
    assert abs(r3.value - 4 * math.pi) <= 10 * r3.err_estimate
    assert r3.value == pytest.approx(4 * math.pi, rel=1e-4)
    r2 = polar_consistency_ratio(euclidean(2), _profile(0.5, 1.5), (0.5, 1.5), quad)
    assert abs(r2.value - 2 * math.pi) <= 10 * r2.err_estimate
    assert r2.value == pytest.approx(2 * math.pi, rel=1e-4)


def test_polar_ratio_profile_independent_anisotropic():
    m = anisotropic([1, 2])
    quad = QuadratureSpec(box=((0, 1),), nodes_per_axis=96)
    a = polar_consistency_ratio(m, _profile(0.4, 0.9), (0.4, 0.9), quad)
    b = polar_consistency_ratio(m, _profile(1.1, 1.6), (1.1, 1.6), quad)
    assert abs(a.value - b.value) <= 10 * (a.err_estimate + b.err_estimate)
