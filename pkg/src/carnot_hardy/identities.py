"""Catalog of operator identities and their randomized exact verification.

Each identity ``lhs == rhs`` is checked by applying both sides to random
dense polynomials at random rational points and comparing exactly. A
nonzero difference of two distinct operators with coefficients in
Q[x, t][|x'|^-2] survives a random point with high probability, so a run
of agreeing trials is strong evidence, and one disagreement is a proof of
failure (returned as a witness).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from math import comb
from typing import Callable

import numpy as np
from gmpy2 import mpq

from . import groups
from .jets import Jet, basis
from .opalgebra import ApplyContext, Calculus, Op, Scale, apply, commutator, factorization_pair, order

COORD_NUM = 64
COORD_DEN = 16


# ----------------------------------------------------------------------------
# random inputs


@dataclass(frozen=True)
class Polynomial:
    dim: int
    terms: tuple  # ((exponents), Fraction)

    def to_text(self) -> str:
        parts = []
        for e, c in self.terms:
            mono = "*".join(f"x{i}" + (f"^{k}" if k > 1 else "") for i, k in enumerate(e) if k)
            parts.append(f"{c}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts) if parts else "0"

    def jet(self, point, order_: int) -> Jet:
        """Taylor coefficients at ``point`` by shifting one variable at a time."""
        x = [mpq(v.numerator, v.denominator) for v in point]
        cur: dict = {}
        for e, c in self.terms:
            cur[e] = cur.get(e, 0) + mpq(c.numerator, c.denominator)
        for i in range(self.dim):
            nxt: dict = {}
            for e, c in cur.items():
                k = e[i]
                used = sum(e[:i])
                for j in range(min(k, order_ - used) + 1):
                    ne = e[:i] + (j,) + e[i + 1:]
                    nxt[ne] = nxt.get(ne, 0) + c * comb(k, j) * x[i] ** (k - j)
            cur = nxt
        jb = basis(self.dim, order_)
        c = np.empty((jb.ncoef, 1), dtype=object)
        c[...] = mpq(0)
        for e, v in cur.items():
            c[jb.position[e], 0] = v
        return Jet(jb, c)


def _rational(rng: np.random.Generator) -> Fraction:
    return Fraction(int(rng.integers(-COORD_NUM, COORD_NUM + 1)), int(rng.integers(1, COORD_DEN + 1)))


def _monomials(dim: int, degree: int):
    return [e for e in product(range(degree + 1), repeat=dim) if sum(e) <= degree]


def trial_input(dim: int, stratum_dim: int, seed: int, trial: int, degree: int = 6):
    """Deterministic (point, polynomial) for one trial; x' = 0 is redrawn."""
    return _trial_input(dim, stratum_dim, seed, trial, degree)


@lru_cache(maxsize=4096)
def _trial_input(dim, stratum_dim, seed, trial, degree):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))
    while True:
        point = tuple(_rational(rng) for _ in range(dim))
        if any(point[:stratum_dim]):
            break
    terms = []
    for e in _monomials(dim, degree):
        c = _rational(rng)
        if c:
            terms.append((e, c))
    return point, Polynomial(dim, tuple(terms))


@lru_cache(maxsize=4096)
def _trial_jet(dim, stratum_dim, seed, trial, degree, order_):
    point, poly = _trial_input(dim, stratum_dim, seed, trial, degree)
    return point, poly, poly.jet(point, order_)


# ----------------------------------------------------------------------------
# catalog


Builder = Callable[[Calculus, dict], Op]

HEIS_MODELS = ("heis:1", "heis:2")
ALL_MODELS = ("heis:1", "heis:2", "euclid:2", "euclid:3")
AB_PARAMS = (
    {"alpha": Fraction(1), "beta": Fraction(0)},
    {"alpha": Fraction(0), "beta": Fraction(1)},
    {"alpha": Fraction(2), "beta": Fraction(-1)},
    {"alpha": Fraction(-3, 2), "beta": Fraction(5, 3)},
)
GAMMA_PARAMS = ({"gamma": -2}, {"gamma": 2}, {"gamma": 4})


@dataclass(frozen=True)
class IdentityCase:
    id: str
    lhs: Builder
    rhs: Builder
    models: tuple[str, ...]
    params: tuple[dict, ...] = ({},)
    statement: str = ""

    def build(self, model, params: dict | None = None) -> tuple[Op, Op]:
        c = Calculus(model)
        p = dict(params or {})
        return self.lhs(c, p), self.rhs(c, p)


def _S(v) -> Op:
    return Scale(Fraction(v))


def _formula1_lhs(c: Calculus, p) -> Op:
    g = p["gamma"]
    terms = [commutator(X, c.M(g)) for X in c.horizontal]
    return _sum([t @ t for t in terms])


def _formula1_rhs(c: Calculus, p) -> Op:
    g = p["gamma"]
    return _S(g * g) @ c.M(2 * g - 2)


def _formula2_lhs(c: Calculus, p) -> Op:
    from .opalgebra import MulCoord

    g = p["gamma"]
    return _sum([commutator(X, MulCoord(j) @ c.M(-g)) for j, X in enumerate(c.horizontal)])


def _formula2_rhs(c: Calculus, p) -> Op:
    g = p["gamma"]
    return _S(c.N - g) @ c.M(-g)


def _formula3_rhs(c: Calculus, p) -> Op:
    return c.M(-2) @ c.L - _S(4) @ c.M(-4) @ c.x_dot_grad - _S(2 * c.N - 8) @ c.M(-4)


def _formula4_rhs(c: Calculus, p) -> Op:
    return _S(-2) @ c.M(-4) + c.M(-4) @ c.x_dot_grad


def _tt_pair(c: Calculus, p):
    return factorization_pair(c.model, Fraction(p["alpha"]), Fraction(p["beta"]))


def _strat_sum_lhs(c: Calculus, p) -> Op:
    T, Tp = _tt_pair(c, p)
    return Tp @ T + T @ Tp


def _strat_sum_rhs(c: Calculus, p) -> Op:
    a, b, N = Fraction(p["alpha"]), Fraction(p["beta"]), c.N
    return (
        _S(2) @ c.L @ c.L
        + _S(2 * a * (N - 2) - 4 * b) @ c.M(-2) @ c.L
        + _S(-4 * a * (N - 2) - 2 * a * a * (N - 3) + 8 * b) @ c.M(-4) @ c.x_dot_grad
        + _S(2 * a * (N - 2) * (4 - N) + 2 * a * a * (N - 2) - 2 * a * b * (N - 2) + (4 * N - 16) * b + 2 * b * b)
        @ c.M(-4)
        - _S(2 * a * a) @ c.M(-4) @ c.xx_hess
    )


def _heis_tt_lhs(c: Calculus, p) -> Op:
    T, Tp = _tt_pair(c, p)
    return Tp @ T


def _heis_tt_rhs(c: Calculus, p, with_commutator: bool = True) -> Op:
    a, b, N = Fraction(p["alpha"]), Fraction(p["beta"]), c.N
    out = (
        c.L @ c.L
        - _S(2 * b - (N - 4) * a) @ c.M(-2) @ c.L
        + _S(2 * (N - 2) * a + 4 * b - (N - 3) * a * a) @ c.M(-4) @ c.x_dot_grad
        + _S(b * b + 2 * (N - 4) * b - (N - 4) * a * b) @ c.M(-4)
        - _S(a * (a - 4)) @ c.M(-4) @ c.xx_hess
    )
    if with_commutator and c.model.is_heisenberg:
        out = out + _S(2 * a) @ c.M(-2) @ c.tangential @ c.T
    return out


def _heis_ttstar_lhs(c: Calculus, p) -> Op:
    T, Tp = _tt_pair(c, p)
    return T @ Tp


def _heis_ttstar_rhs(c: Calculus, p) -> Op:
    a, b, N = Fraction(p["alpha"]), Fraction(p["beta"]), c.N
    out = (
        c.L @ c.L
        - _S(2 * b - N * a) @ c.M(-2) @ c.L
        + _S(6 * (2 - N) * a + 4 * b - (N - 3) * a * a) @ c.M(-4) @ c.x_dot_grad
        + _S(b * b + 2 * (N - 4) * b - N * a * b + 2 * a * a * (N - 2) - 2 * a * (N - 4) * (N - 2)) @ c.M(-4)
        - _S(a * (a + 4)) @ c.M(-4) @ c.xx_hess
    )
    if c.model.is_heisenberg:
        out = out - _S(2 * a) @ c.M(-2) @ c.tangential @ c.T
    return out


def _hardy_ttilde_lhs(c: Calculus, p) -> Op:
    from .opalgebra import MulCoord

    a = Fraction(p["alpha"])
    terms = []
    for j, X in enumerate(c.horizontal):
        Tj = X + _S(a) @ MulCoord(j) @ c.M(-2)
        Tj_adj = _S(-1) @ X + _S(a) @ c.M(-2) @ MulCoord(j)
        terms.append(Tj_adj @ Tj)
    return _sum(terms)


def _hardy_ttilde_rhs(c: Calculus, p) -> Op:
    a = Fraction(p["alpha"])
    return _S(-1) @ c.L + _S(a * (a + 2 - c.N)) @ c.M(-2)


def _refined_lhs(c: Calculus, p) -> Op:
    a = Fraction(p["alpha"])
    left = _S(-1) @ c.x_dot_grad + _S(a - c.N)
    right = c.x_dot_grad + _S(a)
    return left @ c.M(-2) @ right


def _refined_rhs(c: Calculus, p) -> Op:
    a = Fraction(p["alpha"])
    return (_S(-1) @ c.M(-2) @ c.xx_hess - _S(c.N - 1) @ c.M(-2) @ c.x_dot_grad
            + _S(a * (a + 2 - c.N)) @ c.M(-2))


def _commutator_reduction_lhs(c: Calculus, p) -> Op:
    from .opalgebra import MulCoord

    terms = [_S(-1) @ MulCoord(k) @ c.M(-2) @ c.L @ X for k, X in enumerate(c.horizontal)]
    return _sum(terms) + c.M(-2) @ c.x_dot_grad @ c.L


def _sum(ops) -> Op:
    out = ops[0]
    for o in ops[1:]:
        out = out + o
    return out


_QUARTER = Fraction(1, 4)
_HALF = Fraction(1, 2)

CATALOG: tuple[IdentityCase, ...] = (
    IdentityCase("formula1", _formula1_lhs, _formula1_rhs, ALL_MODELS, GAMMA_PARAMS,
                 "sum_j (X_j |x'|^g)^2 = g^2 |x'|^(2g-2)"),
    IdentityCase("formula2", _formula2_lhs, _formula2_rhs, ALL_MODELS, GAMMA_PARAMS,
                 "div_H(x' |x'|^-g) = (N-g) |x'|^-g"),
    IdentityCase("formula3", lambda c, p: c.L @ c.M(-2), _formula3_rhs, ALL_MODELS, ({},),
                 "L(f/|x'|^2) = L f/|x'|^2 - 4 (x'.grad f)/|x'|^4 - (2N-8) f/|x'|^4"),
    IdentityCase("formula4", lambda c, p: c.M(-2) @ c.x_dot_grad @ c.M(-2), _formula4_rhs, ALL_MODELS, ({},),
                 "(x'.grad)(f/|x'|^2)/|x'|^2 = -2 f/|x'|^4 + (x'.grad f)/|x'|^4"),
    IdentityCase("strat_tt_sum", _strat_sum_lhs, _strat_sum_rhs, ALL_MODELS, AB_PARAMS,
                 "T+T + TT+ expanded without commutator terms"),
    IdentityCase("heis_tt", _heis_tt_lhs, _heis_tt_rhs, ALL_MODELS, AB_PARAMS,
                 "T+T expanded, with the 2a sum(x_j Y_j - y_j X_j) T/|x'|^2 term on H_n"),
    IdentityCase("heis_ttstar", _heis_ttstar_lhs, _heis_ttstar_rhs, ALL_MODELS, AB_PARAMS,
                 "TT+ expanded, with the -2a sum(x_j Y_j - y_j X_j) T/|x'|^2 term on H_n"),
    IdentityCase("lap_decomp", lambda c, p: c.L,
                 lambda c, p: c.Delta + _S(_QUARTER) @ c.M(2) @ c.T @ c.T + c.Z @ c.T, HEIS_MODELS, ({},),
                 "L = Delta + |x'|^2 T^2/4 + Z T"),
    IdentityCase("lap3", lambda c, p: c.Z @ c.T,
                 lambda c, p: c.L - c.Delta - _S(_QUARTER) @ c.M(2) @ c.T @ c.T, HEIS_MODELS, ({},),
                 "Z T = L - Delta - |x'|^2 T^2/4"),
    IdentityCase("tangential_sum", lambda c, p: c.tangential,
                 lambda c, p: c.Z + _S(_HALF) @ c.M(2) @ c.T, HEIS_MODELS, ({},),
                 "sum_j (x_j Y_j - y_j X_j) = Z + |x'|^2 T/2"),
    IdentityCase("zt_commute", lambda c, p: c.Z @ c.T, lambda c, p: c.T @ c.Z, HEIS_MODELS, ({},),
                 "Z T = T Z"),
    IdentityCase("hardy_ttilde", _hardy_ttilde_lhs, _hardy_ttilde_rhs, ALL_MODELS,
                 ({"alpha": Fraction(1)}, {"alpha": Fraction(1, 2)}, {"alpha": Fraction(-3)}),
                 "sum_j (-X_j + a x_j/|x'|^2)(X_j + a x_j/|x'|^2) = -L + a(a+2-N)/|x'|^2"),
    IdentityCase("refined_that", _refined_lhs, _refined_rhs, ALL_MODELS,
                 ({"alpha": Fraction(1)}, {"alpha": Fraction(1, 2)}, {"alpha": Fraction(-3)}),
                 "adjoint product of (x'.grad)/|x'| + a/|x'|"),
    IdentityCase("commutator_reduction", _commutator_reduction_lhs,
                 lambda c, p: _S(2) @ c.M(-2) @ c.tangential @ c.T, HEIS_MODELS, ({},),
                 "sum_k x'_k [X_k, L]/|x'|^2 = 2 sum_j (x_j Y_j - y_j X_j) T/|x'|^2"),
)

NEGATIVE_CONTROLS = {
    "heis_tt_no_commutator": IdentityCase(
        "heis_tt_no_commutator", _heis_tt_lhs, lambda c, p: _heis_tt_rhs(c, p, with_commutator=False),
        HEIS_MODELS, ({"alpha": Fraction(1), "beta": Fraction(0)},),
        "heis_tt with the commutator term deleted (must fail for a != 0)"),
}


def identity_catalog() -> list[IdentityCase]:
    return list(CATALOG)


def get_case(case_id: str) -> IdentityCase:
    for c in CATALOG:
        if c.id == case_id:
            return c
    if case_id in NEGATIVE_CONTROLS:
        return NEGATIVE_CONTROLS[case_id]
    raise KeyError(f"unknown identity {case_id!r}")


# ----------------------------------------------------------------------------
# checking


@dataclass
class IdentityResult:
    id: str
    model: str
    params: dict
    trials: int
    passed: bool
    witness: dict | None = None
    lhs_order: int = 0
    rhs_order: int = 0

    def to_dict(self) -> dict:
        out = {
            "id": self.id,
            "model": self.model,
            "params": {k: str(v) for k, v in self.params.items()},
            "trials": self.trials,
            "pass": self.passed,
        }
        if self.witness is not None:
            out["witness"] = self.witness
        return out


def check_identity(case: IdentityCase, model, params: dict | None = None, trials: int = 20,
                   seed: int = 0, degree: int = 6) -> IdentityResult:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if isinstance(model, str):
        model = groups.parse_model(model)
    params = dict(params or {})
    lhs, rhs = case.build(model, params)
    lo, ro = order(lhs), order(rhs)
    k = max(lo, ro)
    if k > 4:
        raise ValueError("identity order above 4")
    dim, N = model.ambient_dim, model.N
    for t in range(trials):
        point, poly, jet = _trial_jet(dim, N, seed, t, degree, 4)
        jet = jet.truncate(k)
        xq = np.array([[mpq(v.numerator, v.denominator) for v in point]], dtype=object)
        ctx = ApplyContext(xq, model.stratum)
        lv = apply(lhs, jet, ctx).value[0]
        rv = apply(rhs, jet, ctx).value[0]
        if lv != rv:
            witness = {
                "point": [str(v) for v in point],
                "input_poly": poly.to_text(),
                "lhs_value": str(Fraction(int(lv.numerator), int(lv.denominator))),
                "rhs_value": str(Fraction(int(rv.numerator), int(rv.denominator))),
                "trial": t,
            }
            return IdentityResult(case.id, model.label, params, t + 1, False, witness, lo, ro)
    return IdentityResult(case.id, model.label, params, trials, True, None, lo, ro)


def check_all(trials: int = 20, seed: int = 0, models=None, ids=None) -> list[IdentityResult]:
    out = []
    for case in CATALOG:
        if ids is not None and case.id not in ids:
            continue
        for m in case.models:
            if models is not None and m not in models:
                continue
            for p in case.params:
                out.append(check_identity(case, m, p, trials, seed))
    return out


def check_commutators(model, trials: int = 20, seed: int = 0, degree: int = 6) -> list[IdentityResult]:
    """[X_j, Y_j] = T and every other pair of basis fields commutes (H_n)."""
    if isinstance(model, str):
        model = groups.parse_model(model)
    if not model.is_heisenberg:
        raise ValueError("commutation relations are checked on Heisenberg models")
    c = Calculus(model)
    n = model.n
    names = [f"X{j + 1}" for j in range(n)] + [f"Y{j + 1}" for j in range(n)] + ["T"]
    out = []
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            expected = "T" if a[0] == "X" and b == "Y" + a[1:] else None
            rhs = c.prims["T"] if expected else Scale(0)
            case = IdentityCase(f"[{a},{b}]", lambda c_, p, a=a, b=b: commutator(c_.prims[a], c_.prims[b]),
                                lambda c_, p, r=rhs: r, (model.label,), ({},), f"[{a},{b}] = {expected or 0}")
            out.append(check_identity(case, model, {}, trials, seed, degree))
    return out
