from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from carnot_hardy.fields import parse_field
from carnot_hardy.groups import euclidean, heisenberg
from carnot_hardy.identities import IdentityCase, check_identity, trial_input
from carnot_hardy.opalgebra import (
    IDENTITY,
    Calculus,
    Compose,
    MulCoord,
    MulStratumNormPow,
    Partial,
    Scale,
    Sum,
    apply_exact,
    commutator,
    factorization_pair,
    heisenberg_primitives,
    order,
    to_text,
)

H1 = heisenberg(1)
F = Fraction


def _f(model, text):
    return parse_field(text, model.ambient_dim, model.stratum)


def _at(*v):
    return [F(x) for x in v]


def test_heisenberg_primitive_values():
    p = heisenberg_primitives(1)
    assert apply_exact(p["X1"], _f(H1, "(x 2)"), _at(2, 6, 0)) == -3
    assert apply_exact(p["L"], _f(H1, "(add (mul (x 0) (x 0)) (mul (x 1) (x 1)))"), _at(3, -2, 5)) == 4
    assert apply_exact(p["L"], _f(H1, "(x 2)"), _at(1, 7, 2)) == 0
    with pytest.raises(ValueError):
        heisenberg_primitives(0)


def test_apply_exact_examples():
    e3 = euclidean(3)
    assert apply_exact(Partial(0) @ Partial(0), _f(e3, "(pow (x 0) 3)"), _at(2, 1, 1)) == 12
    assert apply_exact(MulStratumNormPow(-2), _f(H1, "1"), _at(1, 2, 0)) == F(1, 5)


def test_apply_exact_rejects_odd_norm_powers_and_high_order():
    with pytest.raises((ValueError, TypeError)):
        apply_exact(MulStratumNormPow(1), _f(H1, "1"), _at(1, 2, 0))
    d = Partial(0)
    with pytest.raises(ValueError):
        apply_exact(d @ d @ d @ d @ d, _f(H1, "(pow (x 0) 6)"), _at(1, 1, 1))


def test_sublaplacian_squared_against_sympy():
    x, y, t = sp.symbols("x y t")
    X = lambda g: sp.diff(g, x) - y / 2 * sp.diff(g, t)
    Y = lambda g: sp.diff(g, y) + x / 2 * sp.diff(g, t)
    L = lambda g: X(X(g)) + Y(Y(g))
    g = x**2 * y**2 * t
    want = L(L(g)).subs({x: 1, y: 1, t: 1})
    c = Calculus(H1)
    got = apply_exact(c.L @ c.L, _f(H1, "(mul (x 0) (x 0) (x 1) (x 1) (x 2))"), _at(1, 1, 1))
    assert got == F(int(sp.numer(want)), int(sp.denom(want)))


def test_tangential_sum_spot_value():
    c = Calculus(H1)
    f = _f(H1, "(x 2)")
    pt = _at(1, 2, 3)
    rhs = c.Z + Scale(F(1, 2)) @ c.M(2) @ c.T
    assert apply_exact(c.tangential, f, pt) == F(5, 2)
    assert apply_exact(rhs, f, pt) == F(5, 2)


def _case(lhs, rhs, models=("heis:1",)):
    return IdentityCase("adhoc", lambda c, p: lhs(c), lambda c, p: rhs(c), models)


def test_commutator_examples():
    c = Calculus(H1)
    X1, Y1, T = c.prims["X1"], c.prims["Y1"], c.prims["T"]
    assert check_identity(_case(lambda c: commutator(X1, Y1), lambda c: T), H1).passed
    assert check_identity(_case(lambda c: commutator(X1, T), lambda c: Scale(0)), H1).passed
    e1 = euclidean(1)
    leib = _case(lambda c: commutator(Partial(0), MulCoord(0)), lambda c: IDENTITY, ("euclid:1",))
    assert check_identity(leib, e1).passed


def test_commutator_order_overflow():
    d = Partial(0)
    with pytest.raises(ValueError):
        commutator(d @ d @ d, d @ d)


def test_false_identity_gives_witness():
    c = Calculus(H1)
    X1, Y1 = c.prims["X1"], c.prims["Y1"]
    r = check_identity(_case(lambda c: commutator(X1, Y1), lambda c: Scale(0)), H1, trials=5)
    assert not r.passed
    w = r.to_dict()["witness"]
    assert {"point", "input_poly", "lhs_value", "rhs_value"} <= set(w)
    assert w["lhs_value"] != w["rhs_value"]


def test_factorization_pair_zero_parameters():
    for m in (H1, heisenberg(2), euclidean(3)):
        T, Tp = factorization_pair(m, 0, 0)
        c = Calculus(m)
        for op in (T, Tp):
            case = IdentityCase("adhoc", lambda c, p, op=op: op, lambda c, p: Scale(-1) @ c.L, (m.label,))
            assert check_identity(case, m, trials=5).passed


def test_adjoint_zero_order_coefficient_on_h1():
    # N = 2: the alpha (N-2) part vanishes, leaving +beta/|x'|^2
    _, Tp = factorization_pair(H1, F(3), F(5))
    c = Calculus(H1)
    rhs = Scale(-1) @ c.L - Scale(3) @ c.M(-2) @ c.x_dot_grad + Scale(5) @ c.M(-2)
    assert check_identity(IdentityCase("adhoc", lambda c, p: Tp, lambda c, p: rhs, ("heis:1",)), H1).passed


def test_order_and_text():
    c = Calculus(H1)
    assert order(c.L) == 2 and order(c.L @ c.L) == 4 and order(c.M(-2)) == 0
    assert order(Sum((Partial(0), Partial(0) @ Partial(1)))) == 2
    assert to_text(c.L) == "L"
    assert "X1" in to_text(c.L.body)


_PRIMS = [Partial(0), Partial(1), Partial(2), MulCoord(0), MulCoord(2), MulStratumNormPow(-2),
          MulStratumNormPow(2), Scale(F(3, 7))]


def _op(draw_idx):
    return Compose(tuple(_PRIMS[i] for i in draw_idx))


ops = st.lists(st.integers(0, len(_PRIMS) - 1), min_size=1, max_size=3).map(_op)


def _poly(seed, degree):
    pt, poly = trial_input(3, 2, seed, 0, degree)
    return list(pt), (lambda xq, k: poly.jet(pt, k))


@settings(max_examples=60, deadline=None)
@given(ops, ops, st.integers(0, 10**6))
def test_linearity(a, b, seed):
    pt, f = _poly(seed, 4)
    assert apply_exact(Sum((a, b)), f, pt, H1.stratum) == (apply_exact(a, f, pt, H1.stratum)
                                                     + apply_exact(b, f, pt, H1.stratum))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2), st.integers(0, 10**6))
def test_leibniz_consistency(i, seed):
    pt, f = _poly(seed, 5)
    s = H1.stratum
    lhs = apply_exact(Partial(i) @ MulCoord(i), f, pt, s)
    assert lhs == apply_exact(IDENTITY, f, pt, s) + pt[i] * apply_exact(Partial(i), f, pt, s)


def test_named_primitives_match_expansions():
    x, y, t = sp.symbols("x y t")
    g = 3 * x**3 * y - x * t**2 + y**2 * t / 5
    c = Calculus(H1)
    f = _f(H1, "(add (mul 3 (pow (x 0) 3) (x 1)) (mul -1 (x 0) (x 2) (x 2)) (mul 1/5 (x 1) (x 1) (x 2)))")
    want = {
        "X1": sp.diff(g, x) - y / 2 * sp.diff(g, t),
        "Y1": sp.diff(g, y) + x / 2 * sp.diff(g, t),
        "T": sp.diff(g, t),
        "Z": x * sp.diff(g, y) - y * sp.diff(g, x),
        "Delta": sp.diff(g, x, 2) + sp.diff(g, y, 2),
    }
    pt = _at(F(2, 3), F(-5, 4), F(7, 2))
    for name, expr in want.items():
        v = sp.Rational(expr.subs({x: sp.Rational(2, 3), y: sp.Rational(-5, 4), t: sp.Rational(7, 2)}))
        assert apply_exact(c.prims[name], f, pt) == F(int(v.p), int(v.q)), name
