"""Inequality catalog, deficit evaluation and parameter sweeps.

An inequality instance is a pair of term lists. Each term is a coefficient
formula (text in alpha, beta, a, b, c, d, N, n, Q) times a functional of the
field:

    l2     integral of w |op f|^2, summed over the components of op
    inner  integral of w (op1 f) conj(op2 f); the real part enters the sum

Every distinct functional is integrated once per (model, field, layout) in a
single vector-valued quadrature pass; sweeps then only recombine numbers.
"""

from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np

from .fields import RadialWeight, ScalarField, preset
from .groups import GroupModel, parse_model
from .opalgebra import IDENTITY, ApplyContext, Calculus, Op, apply, factorization_pair, order, to_text
from .quadrature import QuadratureError, QuadratureSpec, integrate, spec_for_field

TOL_ERR_FACTOR = 10.0
TOL_REL_FLOOR = 1e-8


class Inadmissible(ValueError):
    """Parameters or model violate the hypothesis of an inequality."""


# ----------------------------------------------------------------------------
# coefficient formulas

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_CMPOPS = {ast.GtE: operator.ge, ast.Gt: operator.gt, ast.LtE: operator.le, ast.Lt: operator.lt,
           ast.Eq: operator.eq}


def _eval_node(node, env):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body, env)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return Fraction(str(node.value)) if isinstance(node.value, float) else Fraction(node.value)
    if isinstance(node, ast.Name):
        if node.id not in env:
            raise KeyError(f"unbound symbol {node.id!r}")
        return env[node.id]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_node(node.operand, env)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        a, b = _eval_node(node.left, env), _eval_node(node.right, env)
        if isinstance(node.op, ast.Pow):
            if isinstance(b, Fraction) and b.denominator == 1:
                return a ** int(b)
            return float(a) ** float(b)
        return _BINOPS[type(node.op)](a, b)
    if isinstance(node, ast.Compare) and len(node.ops) == 1:
        a, b = _eval_node(node.left, env), _eval_node(node.comparators[0], env)
        return _CMPOPS[type(node.ops[0])](a, b)
    raise ValueError(f"unsupported formula element {ast.dump(node)}")


@lru_cache(maxsize=None)
def _parse_formula(text: str):
    return ast.parse(text, mode="eval")


def eval_formula(text: str, env: dict):
    """Evaluate an arithmetic formula exactly (Fractions) where possible."""
    return _eval_node(_parse_formula(text), env)


# ----------------------------------------------------------------------------
# weights and functionals


@dataclass(frozen=True)
class Weight:
    """A multiplier w(x) >= 0 or signed, identified by ``key``."""

    key: str
    fn: Callable = field(compare=False, repr=False)

    def values(self, model: GroupModel, pts: np.ndarray) -> np.ndarray:
        return self.fn(model, pts)


def stratum_weight(k: int) -> Weight:
    """|x'|^k, set to 0 where x' = 0 (never inside a field support)."""
    if k == 0:
        return Weight("1", lambda m, p: np.ones(p.shape[0]))

    def fn(model, pts):
        r2 = np.sum(pts[:, : model.N] ** 2, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(r2 > 0, r2 ** (k / 2), 0.0)

    return Weight(f"|x'|^{k}", fn)


def log_stratum_weight() -> Weight:
    def fn(model, pts):
        r2 = np.sum(pts[:, : model.N] ** 2, axis=1)
        with np.errstate(divide="ignore"):
            return np.where(r2 > 0, np.log(np.where(r2 > 0, r2, 1.0)), 0.0)

    return Weight("log|x'|^2", fn)


def radial_weight(key: str, profile: Callable) -> Weight:
    """profile(r) with r the model's quasi-norm."""

    def fn(model, pts):
        r = model.quasi_norm(pts)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(r > 0, profile(np.where(r > 0, r, 1.0)), 0.0)

    return Weight(key, fn)


@dataclass(frozen=True, eq=False)
class FunctionalTerm:
    kind: str  # "l2" | "inner"
    ops: tuple
    weight: Weight
    label: str

    def __post_init__(self):
        if self.kind not in ("l2", "inner"):
            raise ValueError(f"unknown functional kind {self.kind!r}")
        if self.kind == "inner" and len(self.ops) != 2:
            raise ValueError("inner products take two operators")
        if any(order(op) > 2 for op in self.ops):
            raise ValueError("functional operators are limited to order 2")

    @property
    def key(self) -> tuple:
        return (self.kind, tuple(to_text(o) for o in self.ops), self.weight.key)

    @property
    def order(self) -> int:
        return max(order(o) for o in self.ops)


def l2_term(ops, weight: Weight, label: str) -> FunctionalTerm:
    ops = tuple(ops) if isinstance(ops, (list, tuple)) else (ops,)
    return FunctionalTerm("l2", ops, weight, label)


def plain_term(weight: Weight, label: str) -> FunctionalTerm:
    return FunctionalTerm("l2", (IDENTITY,), weight, label)


def inner_term(op1: Op, op2: Op, weight: Weight, label: str) -> FunctionalTerm:
    return FunctionalTerm("inner", (op1, op2), weight, label)


# ----------------------------------------------------------------------------
# term bank


@dataclass
class TermValue:
    value: complex | float
    err: float


class TermBank:
    """Integrates a set of functionals of one field in one quadrature pass."""

    def __init__(self, model: GroupModel, f: ScalarField, spec: QuadratureSpec):
        self.model, self.field, self.spec = model, f, spec
        self._terms: dict = {}
        self._values: dict = {}

    def add(self, term: FunctionalTerm) -> None:
        if term.key not in self._terms and term.key not in self._values:
            self._terms[term.key] = term

    def get(self, term: FunctionalTerm) -> TermValue:
        if term.key not in self._values:
            self.add(term)
            self.compute()
        return self._values[term.key]

    def compute(self) -> None:
        pending = [t for k, t in self._terms.items() if k not in self._values]
        if not pending:
            return
        f, model = self.field, self.model
        if any(t.weight.key.startswith("|x'|^-") for t in pending) and f.stratum_margin <= 0:
            raise QuadratureError("singular weights need a field supported away from x' = 0")
        k = max(t.order for t in pending)
        stratum = tuple(model.stratum)

        def g(pts):
            re, im = f.jet(pts, k)
            ctx = ApplyContext(pts, stratum)
            vals: dict = {}

            def val(op):
                key = id(op)
                if key not in vals:
                    v = apply(op, re, ctx).value
                    if im is not None:
                        v = v + 1j * apply(op, im, ctx).value
                    vals[key] = v
                return vals[key]

            cols = []
            for t in pending:
                w = t.weight.values(model, pts)
                if t.kind == "l2":
                    s = sum(np.abs(val(op)) ** 2 for op in t.ops)
                    cols.append(w * s + 0j)
                else:
                    cols.append(w * val(t.ops[0]) * np.conj(val(t.ops[1])))
            return np.stack(cols, axis=1)

        res = integrate(g, self.spec, f.support_box, f.support.annulus)
        value = np.atleast_1d(res.value)
        err = np.atleast_1d(res.err_estimate)
        for i, t in enumerate(pending):
            v = complex(value[i])
            e = float(np.hypot(err[i], err[i + len(pending)])) if err.size == 2 * len(pending) else float(err[i])
            if t.kind == "l2":
                v = v.real
            self._values[t.key] = TermValue(v, e)
        self.nodes_used = res.nodes_used


# ----------------------------------------------------------------------------
# instances


@dataclass(frozen=True)
class Term:
    coeff: str
    functional: FunctionalTerm
    part: str = "re"  # which part of an inner product enters the sum


@dataclass
class InequalityInstance:
    id: str
    model: GroupModel
    params: dict
    lhs: list
    rhs: list
    conditions: tuple = ()  # (formula, failure text) pairs
    statement: str = ""

    def env(self) -> dict:
        m = self.model
        env = {"N": Fraction(m.N), "n": Fraction(m.N), "Q": Fraction(m.q_hom)}
        env.update(self.params)
        return env

    def check_admissible(self) -> None:
        env = self.env()
        for cond, msg in self.conditions:
            if not eval_formula(cond, env):
                raise Inadmissible(f"inadmissible: {msg}")

    def is_admissible(self) -> bool:
        try:
            self.check_admissible()
        except Inadmissible:
            return False
        return True

    def coefficient(self, term: Term) -> Fraction | float:
        return eval_formula(term.coeff, self.env())

    def terms(self):
        for side, lst in (("lhs", self.lhs), ("rhs", self.rhs)):
            for t in lst:
                yield side, t


@dataclass
class DeficitReport:
    id: str
    model: str
    params: dict
    field: str
    quadrature: dict
    terms: list
    lhs: float
    rhs: float
    deficit: float
    total_err: float
    scale: float
    tolerance: float
    verdict: bool
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "id": self.id, "model": self.model,
            "params": {k: _num_out(v) for k, v in self.params.items()},
            "field": self.field, "quadrature": self.quadrature, "terms": self.terms,
            "lhs": self.lhs, "rhs": self.rhs, "deficit": self.deficit,
            "total_err": self.total_err, "scale": self.scale, "tolerance": self.tolerance,
            "verdict": "pass" if self.verdict else "fail", "diagnostics": self.diagnostics,
        }


def _num_out(v):
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else float(v)
    return v


def verdict_of(deficit: float, total_err: float, scale: float) -> tuple[bool, float]:
    tol = max(TOL_ERR_FACTOR * total_err, TOL_REL_FLOOR * scale)
    return deficit >= -tol, tol


def _report(inst: InequalityInstance, bank: TermBank) -> DeficitReport:
    inst.check_admissible()
    sums = {"lhs": 0.0, "rhs": 0.0}
    total_err = 0.0
    scale = 0.0
    rows = []
    diags = {}
    for side, t in inst.terms():
        c = float(inst.coefficient(t))
        tv = bank.get(t.functional)
        v = tv.value.real if t.part == "re" else tv.value.imag
        if t.functional.kind == "inner" and t.part == "re":
            diags[f"imag[{t.functional.label}]"] = float(tv.value.imag)
        contrib = c * v
        sums[side] += contrib
        total_err += abs(c) * tv.err
        scale += abs(contrib)
        rows.append({"name": t.functional.label, "side": side, "coeff": c, "value": float(v), "err": tv.err})
    lhs, rhs = sums["lhs"], sums["rhs"]
    deficit = lhs - rhs
    ok, tol = verdict_of(deficit, total_err, scale)
    return DeficitReport(inst.id, inst.model.label, dict(inst.params), bank.field.name or bank.field.to_text(),
                         bank.spec.to_dict(), rows, lhs, rhs, deficit, total_err, scale, tol, ok, diags)


def evaluate(inst: InequalityInstance, f: ScalarField, spec: QuadratureSpec, bank: TermBank | None = None) -> DeficitReport:
    """Deficit of one instance on one field."""
    inst.check_admissible()
    bank = bank or TermBank(inst.model, f, spec)
    for _, t in inst.terms():
        bank.add(t.functional)
    bank.compute()
    return _report(inst, bank)


# ----------------------------------------------------------------------------
# catalog


@lru_cache(maxsize=None)
def calculus(model: GroupModel) -> Calculus:
    return Calculus(model)


@lru_cache(maxsize=None)
def _stratum_terms(model: GroupModel) -> dict:
    """Shared functionals of the stratified and Heisenberg instances."""
    c = calculus(model)
    w = stratum_weight
    out = {
        "Lf": l2_term(c.L, w(0), "||L f||^2"),
        "grad/x": l2_term(c.horizontal, w(-2), "||grad_H f/|x'|||^2"),
        "grad": l2_term(c.horizontal, w(0), "||grad_H f||^2"),
        "xgrad/x2": l2_term(c.x_dot_grad, w(-4), "||x'.grad_H f/|x'|^2||^2"),
        "xgrad/x": l2_term(c.x_dot_grad, w(-2), "||x'.grad_H f/|x'|||^2"),
        "f/x2": plain_term(w(-4), "||f/|x'|^2||^2"),
        "f/x": plain_term(w(-2), "||f/|x'|||^2"),
    }
    if model.is_heisenberg:
        out["ZT"] = inner_term(c.Z, c.T, w(-2), "(Zf/|x'|, Tf/|x'|)")
        out["Tf"] = l2_term(c.T, w(0), "||T f||^2")
        out["Lf,f"] = inner_term(c.L, IDENTITY, w(-2), "(L f/|x'|, f/|x'|)")
        out["Df,f"] = inner_term(c.Delta, IDENTITY, w(-2), "(Delta_x' f/|x'|, f/|x'|)")
    return out


def _frac(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    return Fraction(str(v))


def _params(given: dict, names: tuple, defaults: dict) -> dict:
    out = {}
    for k in names:
        v = given.get(k)
        out[k] = _frac(defaults[k] if v is None else v)
    extra = set(k for k, v in given.items() if v is not None) - set(names)
    if extra:
        raise ValueError(f"unexpected parameters {sorted(extra)}")
    return out


def _need_euclidean(model: GroupModel, isotropic: bool = True):
    if model.is_heisenberg or (isotropic and not model.isotropic):
        raise ValueError("defined on isotropic Euclidean models" if isotropic else "defined on Euclidean models")


def _need_stratified(model: GroupModel):
    if not (model.is_heisenberg or model.isotropic):
        raise ValueError("defined on isotropic Euclidean and Heisenberg models")


def _need_heisenberg(model: GroupModel):
    if not model.is_heisenberg:
        raise ValueError("defined on Heisenberg models")


GL_GRAD = "(n-4)*alpha-2*beta"
GL_XGRAD = "-alpha*(alpha-4)"
GL_ZERO = "beta*((n-4)*(alpha-2)-beta)"
GLC_GRAD = "n*alpha-2*beta"
GLC_XGRAD = "-alpha*(alpha+4)"
GLC_ZERO = "2*(n-4)*(alpha*(n-2)-beta)-2*alpha**2*(n-2)+alpha*beta*n-beta**2"
SR_GRAD = "alpha*(N-2)-2*beta"
SR_XGRAD = "-alpha**2"
SR_ZERO = "alpha*(N-4)*(N-2)-alpha**2*(N-2)+2*beta*(4-N)-beta**2+alpha*beta*(N-2)"


def _b_hardy_euclid(model, **p):
    _need_euclidean(model)
    s = _stratum_terms(model)
    return InequalityInstance(
        "hardy_euclid", model, _params(p, (), {}),
        [Term("1", s["grad"])], [Term("((n-2)/2)**2", s["f/x"])],
        (("n >= 3", "n < 3"),), "||grad f||^2 >= ((n-2)/2)^2 ||f/|x|||^2")


def _rellich_type(id_, model, p, coeffs, need, statement, extra=()):
    need(model)
    s = _stratum_terms(model)
    prm = _params(p, ("alpha", "beta"), {"alpha": 1, "beta": 0})
    g, xg, z = coeffs
    rhs = [Term(g, s["grad/x"])]
    if xg is not None:
        rhs.append(Term(xg, s["xgrad/x2"]))
    rhs.append(Term(z, s["f/x2"]))
    rhs.extend(extra)
    conds = (("N >= 2", "N < 2"),)
    return InequalityInstance(id_, model, prm, [Term("1", s["Lf"])], rhs, conds, statement)


def _b_gl_rellich(model, **p):
    return _rellich_type("gl_rellich", model, p, (GL_GRAD, GL_XGRAD, GL_ZERO), _need_euclidean,
                         "Rellich-type bound from the nonnegativity of T+T on R^n")


def _b_gl_counterpart(model, **p):
    return _rellich_type("gl_counterpart", model, p, (GLC_GRAD, GLC_XGRAD, GLC_ZERO), _need_euclidean,
                         "Rellich-type bound from the nonnegativity of TT+ on R^n")


def _b_strat_rellich(model, **p):
    return _rellich_type("strat_rellich", model, p, (SR_GRAD, SR_XGRAD, SR_ZERO), _need_stratified,
                         "two-parameter Rellich bound for the sub-Laplacian")


def _b_strat_rellich_cs(model, **p):
    return _rellich_type("strat_rellich_cs", model, p, (SR_GRAD + "-alpha**2", None, SR_ZERO), _need_stratified,
                         "two-parameter Rellich bound with the radial term absorbed")


def _b_euclid_rellich_ab(model, **p):
    return _rellich_type("euclid_rellich_ab", model, p,
                         (SR_GRAD.replace("N", "n"), SR_XGRAD, SR_ZERO.replace("N", "n")), _need_euclidean,
                         "two-parameter Rellich bound specialised to R^n")


def _b_hardy_strat(model, **p):
    _need_stratified(model)
    s = _stratum_terms(model)
    return InequalityInstance(
        "hardy_strat", model, _params(p, (), {}),
        [Term("1", s["grad"])], [Term("((N-2)/2)**2", s["f/x"])],
        (("N >= 3", "N < 3"),), "||grad_H f||^2 >= ((N-2)/2)^2 ||f/|x'|||^2")


def _b_refined_hardy_strat(model, **p):
    _need_stratified(model)
    s = _stratum_terms(model)
    prm = _params(p, ("alpha",), {"alpha": Fraction(model.N - 2, 2)})
    return InequalityInstance(
        "refined_hardy_strat", model, prm,
        [Term("1", s["xgrad/x"])], [Term("alpha*(N-2-alpha)", s["f/x"])],
        (("N >= 3", "N < 3"),), "||x'.grad_H f/|x'|||^2 >= alpha(N-2-alpha) ||f/|x'|||^2")


def _heis(id_, model, p, coeffs, sign, rewrite=False, cond=None):
    _need_heisenberg(model)
    s = _stratum_terms(model)
    pm = "" if sign > 0 else "-"
    mp = "-" if sign > 0 else ""
    if rewrite:
        extra = [Term(mp + "2*alpha", s["Lf,f"]), Term(pm + "2*alpha", s["Df,f"]),
                 Term(pm + "alpha/2", s["Tf"])]
    else:
        extra = [Term(pm + "2*alpha", s["ZT"]), Term(pm + "alpha", s["Tf"])]
    inst = _rellich_type(id_, model, p, coeffs, _need_heisenberg, "", extra)
    if cond:
        inst.conditions = inst.conditions + (cond,)
    inst.statement = "Rellich bound on H_n with central-derivative terms"
    return inst


def _b_heis_1(model, **p):
    return _heis("heis_1", model, p, (GL_GRAD.replace("n", "N"), GL_XGRAD, GL_ZERO.replace("n", "N")), +1)


def _b_heis_11(model, **p):
    return _heis("heis_11", model, p, (GLC_GRAD.replace("n", "N"), GLC_XGRAD, GLC_ZERO.replace("n", "N")), -1)


def _b_heis_2(model, **p):
    return _heis("heis_2", model, p, ("(N-alpha)*alpha-2*beta", None, GL_ZERO.replace("n", "N")), +1,
                 cond=("alpha*(alpha-4) >= 0", "α(α−4) < 0"))


def _b_heis_22(model, **p):
    return _heis("heis_22", model, p, ("-2*beta+alpha*(N-alpha)-4*alpha", None, GLC_ZERO.replace("n", "N")), -1,
                 cond=("alpha*(alpha+4) >= 0", "α(α+4) < 0"))


def _b_heis_1_rewrite(model, **p):
    return _heis("heis_1_rewrite", model, p,
                 (GL_GRAD.replace("n", "N"), GL_XGRAD, GL_ZERO.replace("n", "N")), +1, rewrite=True)


def _b_heis_11_rewrite(model, **p):
    return _heis("heis_11_rewrite", model, p,
                 (GLC_GRAD.replace("n", "N"), GLC_XGRAD, GLC_ZERO.replace("n", "N")), -1, rewrite=True)


# homogeneous-group instances --------------------------------------------------


def _rw(a, c=0) -> RadialWeight:
    return RadialWeight(float(a), int(c))


def _prof(key: str, fn) -> Weight:
    return radial_weight(key, fn)


@lru_cache(maxsize=None)
def _radial_op(model: GroupModel) -> Op:
    return calculus(model).radial()


def _hom_common(model):
    _need_euclidean(model, isotropic=False)
    return _radial_op(model)


def _Rf(model, weight: Weight, label: str) -> FunctionalTerm:
    return l2_term(_hom_common(model), weight, label)


def _hom_conditions():
    return (("Q >= 3", "Q < 3"),)


def _b_hom_fac(id_, model, p):
    prm = _params(p, ("alpha", "a", "b", "c", "d"), {"alpha": 1, "a": 0, "b": 1, "c": 0, "d": 0})
    phi, psi = _rw(prm["a"], prm["c"]), _rw(prm["b"], prm["d"])
    Q = float(model.q_hom)
    tag = f"phi={phi.label()},psi={psi.label()}"
    lhs = [Term("1", _Rf(model, _prof(f"phi^2[{tag}]", lambda r: phi.value(r) ** 2), "||phi R f||^2"))]
    sgn = "" if id_ == "hom_fac1" else "-"
    rhs = [
        Term(sgn + "alpha", plain_term(_prof(f"phi*R psi[{tag}]", lambda r: phi.value(r) * psi.d1(r)),
                                       "int phi R(psi) |f|^2")),
        Term("alpha", plain_term(_prof(f"psi*R phi[{tag}]", lambda r: psi.value(r) * phi.d1(r)),
                                 "int psi R(phi) |f|^2")),
        Term("alpha*(Q-1)", plain_term(_prof(f"phi*psi/r[{tag}]", lambda r: phi.value(r) * psi.value(r) / r),
                                       "int phi psi/|x| |f|^2")),
        Term("-alpha**2", plain_term(_prof(f"psi^2[{tag}]", lambda r: psi.value(r) ** 2), "int psi^2 |f|^2")),
    ]
    if id_ == "hom_fac2":
        rhs.append(Term("1", plain_term(
            _prof(f"phi-extra[{tag}]",
                  lambda r: (Q - 1) * phi.value(r) * phi.d1(r) / r - (Q - 1) * phi.value(r) ** 2 / r**2
                  + phi.value(r) * phi.d2(r)),
            "int ((Q-1) phi R(phi)/|x| - (Q-1) phi^2/|x|^2 + phi R^2(phi)) |f|^2")))
    return InequalityInstance(id_, model, prm, lhs, rhs, _hom_conditions(),
                              "weighted Hardy bound with radial weights phi, psi")


def _b_hom_fac1(model, **p):
    return _b_hom_fac("hom_fac1", model, p)


def _b_hom_fac2(model, **p):
    return _b_hom_fac("hom_fac2", model, p)


def _pw(e: float) -> Weight:
    """|x|^e for the quasi-norm."""
    return _prof(f"|x|^{e!r}", lambda r: r**e)


def _b_hom_power(model, **p):
    Q = model.q_hom
    prm = _params(p, ("alpha", "a", "b"), {"alpha": Fraction(Q - 2, 2), "a": 0, "b": 1})
    a, b = float(prm["a"]), float(prm["b"])
    lhs = [Term("1", _Rf(model, _pw(-2 * a), "|| R f/|x|^a ||^2"))]
    rhs = [Term("alpha*(Q-a-b-1)", plain_term(_pw(-(a + b + 1)), "int |f|^2/|x|^(a+b+1)")),
           Term("-alpha**2", plain_term(_pw(-2 * b), "int |f|^2/|x|^(2b)"))]
    return InequalityInstance("hom_power", model, prm, lhs, rhs, _hom_conditions(),
                              "power-weight Hardy bound")


def _b_hom_weighted_hardy(model, **p):
    prm = _params(p, ("a",), {"a": 0})
    a = float(prm["a"])
    lhs = [Term("1", _Rf(model, _pw(-2 * a), "|| R f/|x|^a ||^2"))]
    rhs = [Term("(Q-2*a-2)**2/4", plain_term(_pw(-(2 * a + 2)), "int |f|^2/|x|^(2a+2)"))]
    return InequalityInstance("hom_weighted_hardy", model, prm, lhs, rhs, _hom_conditions(),
                              "sharp weighted Hardy bound")


def _logpw(e: float, k: int) -> Weight:
    """|x|^e (log|x|)^k."""
    if k == 0:
        return _pw(e)
    return _prof(f"|x|^{e!r}(log|x|)^{k}", lambda r: r**e * np.log(r) ** k)


def _b_hom_log(model, **p):
    Q = model.q_hom
    prm = _params(p, ("alpha", "a", "b", "c", "d"),
                  {"alpha": Fraction(1, 2), "a": Fraction(Q - 2, 2), "b": Fraction(Q, 2), "c": 1, "d": 0})
    for k in ("c", "d"):
        if prm[k].denominator != 1 or prm[k] < 0:
            raise ValueError(f"{k} must be a nonnegative integer")
    a, b = float(prm["a"]), float(prm["b"])
    c, d = int(prm["c"]), int(prm["d"])
    lhs = [Term("1", _Rf(model, _logpw(-2 * a, 2 * c), "|| (log|x|)^c R f/|x|^a ||^2"))]
    rhs = []
    if c + d > 0:
        rhs.append(Term("alpha*(c+d)", plain_term(_logpw(-(a + b + 1), c + d - 1),
                                                  "int (log|x|)^(c+d-1) |f|^2/|x|^(a+b+1)")))
    rhs.append(Term("alpha*(Q-1-a-b)", plain_term(_logpw(-(a + b + 1), c + d),
                                                  "int (log|x|)^(c+d) |f|^2/|x|^(a+b+1)")))
    rhs.append(Term("-alpha**2", plain_term(_logpw(-2 * b, 2 * d), "int (log|x|)^(2d) |f|^2/|x|^(2b)")))
    return InequalityInstance("hom_log", model, prm, lhs, rhs, _hom_conditions(),
                              "log-weighted Hardy bound")


def _critical_terms(model):
    Q = float(model.q_hom)
    lhs = _Rf(model, _logpw(-(Q - 2), 2), "|| log|x| R f/|x|^((Q-2)/2) ||^2")
    rhs = plain_term(_pw(-Q), "int |f|^2/|x|^Q")
    return lhs, rhs


def _b_hom_log_critical_pre(model, **p):
    prm = _params(p, ("alpha",), {"alpha": Fraction(1, 2)})
    lhs, rhs = _critical_terms(model)
    return InequalityInstance("hom_log_critical_pre", model, prm, [Term("1", lhs)], [Term("alpha-alpha**2", rhs)],
                              _hom_conditions(), "critical Hardy bound with free parameter")


def _b_hom_critical(model, **p):
    prm = _params(p, (), {})
    lhs, rhs = _critical_terms(model)
    return InequalityInstance("hom_critical", model, prm, [Term("1", lhs)], [Term("1/4", rhs)],
                              _hom_conditions(), "critical Hardy bound")


_BUILDERS: dict[str, Callable] = {
    "hardy_euclid": _b_hardy_euclid,
    "gl_rellich": _b_gl_rellich,
    "gl_counterpart": _b_gl_counterpart,
    "hom_fac1": _b_hom_fac1,
    "hom_fac2": _b_hom_fac2,
    "hom_power": _b_hom_power,
    "hom_weighted_hardy": _b_hom_weighted_hardy,
    "hom_log": _b_hom_log,
    "hom_log_critical_pre": _b_hom_log_critical_pre,
    "hom_critical": _b_hom_critical,
    "strat_rellich": _b_strat_rellich,
    "strat_rellich_cs": _b_strat_rellich_cs,
    "euclid_rellich_ab": _b_euclid_rellich_ab,
    "hardy_strat": _b_hardy_strat,
    "refined_hardy_strat": _b_refined_hardy_strat,
    "heis_1": _b_heis_1,
    "heis_11": _b_heis_11,
    "heis_2": _b_heis_2,
    "heis_22": _b_heis_22,
    "heis_1_rewrite": _b_heis_1_rewrite,
    "heis_11_rewrite": _b_heis_11_rewrite,
}

PARAM_NAMES = ("alpha", "beta", "a", "b", "c", "d")


def catalog() -> dict[str, Callable]:
    """Builders ``(model, **params) -> InequalityInstance`` by id."""
    return dict(_BUILDERS)


def build(id_: str, model: GroupModel | str, **params) -> InequalityInstance:
    if id_ not in _BUILDERS:
        raise KeyError(f"unknown inequality id {id_!r}")
    if isinstance(model, str):
        model = parse_model(model)
    return _BUILDERS[id_](model, **{k: v for k, v in params.items() if v is not None})


def best_alpha_hardy(N: int) -> tuple[Fraction, Fraction]:
    """Maximiser of alpha(N-2-alpha) and the resulting constant."""
    if N < 3:
        raise ValueError("N must be at least 3")
    a = Fraction(N - 2, 2)
    return a, a * a


# ----------------------------------------------------------------------------
# sweeps


@dataclass
class SweepCell:
    params: dict
    admissible: bool
    report: DeficitReport | None = None

    def to_dict(self) -> dict:
        out = {"params": {k: _num_out(v) for k, v in self.params.items()}, "admissible": self.admissible}
        if self.report is not None:
            out["report"] = self.report.to_dict()
        return out


@dataclass
class SweepResult:
    id: str
    model: str
    field: str
    cells: list

    @property
    def evaluated(self) -> list:
        return [c for c in self.cells if c.report is not None]

    @property
    def min_deficit(self) -> float:
        vals = [c.report.deficit for c in self.evaluated]
        return min(vals) if vals else math.nan

    @property
    def all_pass(self) -> bool:
        return all(c.report.verdict for c in self.evaluated)

    def to_dict(self) -> dict:
        return {"id": self.id, "model": self.model, "field": self.field,
                "min_deficit": self.min_deficit, "all_pass": self.all_pass,
                "cells": [c.to_dict() for c in self.cells]}


def sweep(id_: str, model: GroupModel, grid: dict, f: ScalarField, spec: QuadratureSpec,
          fixed: dict | None = None, bank: TermBank | None = None) -> SweepResult:
    """Evaluate ``id_`` on the Cartesian product of the grid values.

    Inadmissible cells are recorded and skipped. All cells share one term
    bank, so the field is integrated once.
    """
    fixed = dict(fixed or {})
    names = list(grid)
    bank = bank or TermBank(model, f, spec)
    cells = []
    combos = [()]
    for k in names:
        combos = [c + (v,) for c in combos for v in grid[k]]
    insts = []
    for combo in combos:
        params = {**fixed, **dict(zip(names, combo))}
        inst = build(id_, model, **params)
        if inst.is_admissible():
            for _, t in inst.terms():
                bank.add(t.functional)
        insts.append(inst)
    bank.compute()
    for inst in insts:
        if inst.is_admissible():
            cells.append(SweepCell(inst.params, True, _report(inst, bank)))
        else:
            cells.append(SweepCell(inst.params, False))
    return SweepResult(id_, model.label, f.name or f.to_text(), cells)


# ----------------------------------------------------------------------------
# default evaluation plan

AB_GRID = {"alpha": [-2, -1, 0, 1, 2], "beta": [-2, -1, 0, 1, 2]}
ALPHA_GRID = {"alpha": [-1, 0, Fraction(1, 2), 1, 2]}

DEFAULT_MODELS = {
    "hardy_euclid": ["euclid:3"],
    "gl_rellich": ["euclid:3"],
    "gl_counterpart": ["euclid:3"],
    "euclid_rellich_ab": ["euclid:3"],
    "hom_fac1": ["euclid:3", "aniso:1,2"],
    "hom_fac2": ["euclid:3", "aniso:1,2"],
    "hom_power": ["euclid:3", "aniso:1,2"],
    "hom_weighted_hardy": ["euclid:3", "aniso:1,2"],
    "hom_log": ["euclid:3", "aniso:1,2"],
    "hom_log_critical_pre": ["euclid:3", "aniso:1,2"],
    "hom_critical": ["euclid:3", "aniso:1,2"],
    "strat_rellich": ["euclid:3", "heis:1", "heis:2"],
    "strat_rellich_cs": ["euclid:3", "heis:1", "heis:2"],
    "hardy_strat": ["euclid:3", "heis:2"],
    "refined_hardy_strat": ["euclid:3", "heis:2"],
    "heis_1": ["heis:1", "heis:2"],
    "heis_11": ["heis:1", "heis:2"],
    "heis_2": ["heis:1", "heis:2"],
    "heis_22": ["heis:1", "heis:2"],
    "heis_1_rewrite": ["heis:1", "heis:2"],
    "heis_11_rewrite": ["heis:1", "heis:2"],
}

DEFAULT_GRIDS = {
    "hardy_euclid": {}, "hardy_strat": {}, "hom_critical": {},
    "hom_weighted_hardy": {"a": [-1, Fraction(-1, 2), 0, Fraction(1, 4), Fraction(1, 2)]},
    "refined_hardy_strat": ALPHA_GRID,
    "hom_log_critical_pre": ALPHA_GRID,
    "hom_fac1": ALPHA_GRID, "hom_fac2": ALPHA_GRID, "hom_power": ALPHA_GRID, "hom_log": ALPHA_GRID,
}

DEFAULT_FIELDS = ("logbump:1,1", "nonradial:1,1", "complex:1,1")


def default_grid(id_: str) -> dict:
    return DEFAULT_GRIDS.get(id_, AB_GRID)


def default_nodes(model: GroupModel) -> int:
    return 32 if model.is_heisenberg and model.n >= 2 else 48


def default_angular_nodes(model: GroupModel) -> int:
    if not model.isotropic and not model.is_heisenberg:
        return 64
    return 8 if model.N <= 3 else 4


def default_spec(model: GroupModel, f: ScalarField, nodes: int | None = None, err_cap=None) -> QuadratureSpec:
    return spec_for_field(f, nodes=nodes or default_nodes(model), angular_nodes=default_angular_nodes(model),
                          err_cap=err_cap)


def field_for(model: GroupModel, text: str) -> ScalarField:
    from .fields import parse_preset

    return parse_preset(text, model)


def default_plan() -> list[tuple[str, str]]:
    """(id, model label) pairs evaluated by the deficit suite, ordered by id."""
    return [(i, m) for i in sorted(_BUILDERS) for m in DEFAULT_MODELS[i]]


# ----------------------------------------------------------------------------
# integration-by-parts, real-term and adjointness checks


@dataclass
class IdentityCheck:
    name: str
    model: str
    field: str
    lhs: complex
    rhs: complex
    err: float
    passed: bool
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "model": self.model, "field": self.field,
                "lhs": [self.lhs.real, self.lhs.imag], "rhs": [self.rhs.real, self.rhs.imag],
                "err": float(self.err), "pass": bool(self.passed), **self.extra}


ROUNDOFF = 64 * np.finfo(float).eps


def _close(lhs: complex, rhs: complex, err: float, scale: float) -> bool:
    # quadrature error bound plus a roundoff allowance relative to the summands
    return abs(lhs - rhs) <= TOL_ERR_FACTOR * err + ROUNDOFF * scale


def _combo(bank: TermBank, parts) -> tuple[complex, float, float]:
    """sum of c * <term>, its error and its magnitude scale."""
    v, e, s = 0j, 0.0, 0.0
    for c, t in parts:
        tv = bank.get(t)
        v += c * tv.value
        e += abs(c) * tv.err
        s += abs(c * tv.value)
    return v, e, s


def ibp_checks(model: GroupModel, f: ScalarField, spec: QuadratureSpec) -> list[IdentityCheck]:
    """Weighted integration-by-parts identities used by the Rellich proofs."""
    _need_stratified(model)
    c = calculus(model)
    w = stratum_weight
    N = model.N
    bank = TermBank(model, f, spec)
    I = IDENTITY
    lap = inner_term(c.L, I, w(-2), "int conj(f) L f/|x'|^2")
    xg4 = inner_term(c.x_dot_grad, I, w(-4), "int conj(f) x'.grad_H f/|x'|^4")
    xg2 = inner_term(c.x_dot_grad, I, w(-2), "int conj(f) x'.grad_H f/|x'|^2")
    grad2 = l2_term(c.horizontal, w(-2), "||grad_H f/|x'|||^2")
    hess4 = inner_term(c.xx_hess, I, w(-4), "int conj(f) x'_j x'_k X_j X_k f/|x'|^4")
    hess2 = inner_term(c.xx_hess, I, w(-2), "int conj(f) x'_j x'_k X_j X_k f/|x'|^2")
    xgsq4 = l2_term(c.x_dot_grad, w(-4), "||x'.grad_H f/|x'|^2||^2")
    xgsq2 = l2_term(c.x_dot_grad, w(-2), "||x'.grad_H f/|x'|||^2")
    for t in (lap, xg4, xg2, grad2, hess4, hess2, xgsq4, xgsq2):
        bank.add(t)
    bank.compute()
    out = []
    specs = [
        ("sublaplacian_weighted_ibp", [(1, lap)], [(2, xg4), (-1, grad2)]),
        ("radial_hessian_ibp_w4", [(1, hess4)], [(-(N - 3), xg4), (-1, xgsq4)]),
        ("radial_hessian_ibp_w2", [(1, hess2)], [(-(N - 1), xg2), (-1, xgsq2)]),
    ]
    for name, lhs, rhs in specs:
        lv, le, ls = _combo(bank, lhs)
        rv, re_, rs = _combo(bank, rhs)
        out.append(IdentityCheck(name, model.label, f.name, lv, rv, le + re_, _close(lv, rv, le + re_, ls + rs)))
    return out


def real_term_check(model: GroupModel, f: ScalarField, spec: QuadratureSpec) -> IdentityCheck:
    """(Zf/|x'|, Tf/|x'|) is real and equals -sum_j int log|x'|^2 Re(d_yj f conj(d_t d_xj f))."""
    from .opalgebra import Partial

    _need_heisenberg(model)
    c = calculus(model)
    n, t = model.n, model.ambient_dim - 1
    bank = TermBank(model, f, spec)
    zt = inner_term(c.Z, c.T, stratum_weight(-2), "(Zf/|x'|, Tf/|x'|)")
    logs = [inner_term(Partial(n + j), Partial(t) @ Partial(j), log_stratum_weight(),
                       f"int log|x'|^2 d_y{j + 1} f conj(d_t d_x{j + 1} f)") for j in range(n)]
    for term in [zt, *logs]:
        bank.add(term)
    bank.compute()
    lhs = bank.get(zt)
    rv, re_, rs = _combo(bank, [(-1, term) for term in logs])
    rhs = complex(rv.real, 0.0)
    err = lhs.err + re_
    scale = abs(lhs.value) + rs
    ok = _close(complex(lhs.value.real, 0.0), rhs, err, scale)
    im_ok = abs(lhs.value.imag) <= TOL_ERR_FACTOR * lhs.err + ROUNDOFF * scale
    return IdentityCheck("zt_real_term", model.label, f.name, lhs.value, rhs, err, ok and im_ok,
                         {"imag": lhs.value.imag, "imag_ok": im_ok})


def rewrite_check(model: GroupModel, f: ScalarField, spec: QuadratureSpec) -> IdentityCheck:
    """(Zf, Tf)/|x'|^2 = -(L f, f)/|x'|^2 + (Delta f, f)/|x'|^2 - ||T f||^2/4 (real parts)."""
    _need_heisenberg(model)
    s = _stratum_terms(model)
    bank = TermBank(model, f, spec)
    lv, le, ls = _combo(bank, [(1, s["ZT"])])
    rv, re_, rs = _combo(bank, [(-1, s["Lf,f"]), (1, s["Df,f"]), (Fraction(-1, 4), s["Tf"])])
    lv, rv = complex(lv.real, 0), complex(rv.real, 0)
    return IdentityCheck("zt_rewrite", model.label, f.name, lv, rv, le + re_, _close(lv, rv, le + re_, ls + rs))


def reduction_checks(model: GroupModel, f: ScalarField, spec: QuadratureSpec, a=Fraction(1, 4)) -> list[IdentityCheck]:
    """Special parameter choices that turn one catalog entry into another.

    hom_power at b = a+1, alpha = (Q-2a-2)/2 against hom_weighted_hardy, and
    hom_log_critical_pre at alpha = 1/2 against hom_critical. Deficits must
    agree within the combined quadrature error of both evaluations.
    """
    a = _frac(a)
    Q = Fraction(model.q_hom)
    pairs = [
        ("power_to_weighted_hardy", build("hom_power", model, alpha=(Q - 2 * a - 2) / 2, a=a, b=a + 1),
         build("hom_weighted_hardy", model, a=a)),
        ("log_pre_to_critical", build("hom_log_critical_pre", model, alpha=Fraction(1, 2)),
         build("hom_critical", model)),
    ]
    bank = TermBank(model, f, spec)
    out = []
    for name, x, y in pairs:
        rx, ry = evaluate(x, f, spec, bank), evaluate(y, f, spec, bank)
        err = rx.total_err + ry.total_err
        ok = abs(rx.deficit - ry.deficit) <= err + ROUNDOFF * (rx.scale + ry.scale)
        out.append(IdentityCheck(name, model.label, f.name, complex(rx.deficit), complex(ry.deficit), err, ok,
                                 {"rhs_from": rx.rhs, "rhs_to": ry.rhs}))
    return out


def adjointness_check(model: GroupModel, f: ScalarField, g: ScalarField, alpha, beta,
                      spec: QuadratureSpec) -> IdentityCheck:
    """<T f, g> = <f, T+ g> for the two-parameter factorization pair."""
    _need_stratified(model)
    T, Tp = factorization_pair(model, _frac(alpha), _frac(beta))
    stratum = tuple(model.stratum)

    def values(op, fld, pts, k):
        re, im = fld.jet(pts, k)
        ctx = ApplyContext(pts, stratum)
        v = apply(op, re, ctx).value
        return v if im is None else v + 1j * apply(op, im, ctx).value

    def h(pts):
        f0 = values(IDENTITY, f, pts, 0)
        g0 = values(IDENTITY, g, pts, 0)
        tf = values(T, f, pts, 2)
        tg = values(Tp, g, pts, 2)
        a = tf * np.conj(g0)
        b = f0 * np.conj(tg)
        return np.stack([a, b, np.abs(a), np.abs(b)], axis=1)

    box = [(min(x[0], y[0]), max(x[1], y[1])) for x, y in zip(f.support_box, g.support_box)]
    res = integrate(h, spec, box, _hull(f.support.annulus, g.support.annulus))
    v = np.asarray(res.value)
    e = np.asarray(res.err_estimate)
    err = float(e[0] + e[1])
    scale = float(v[2].real + v[3].real)
    lhs, rhs = complex(v[0]), complex(v[1])
    return IdentityCheck("adjointness", model.label, f"{f.name} | {g.name}", lhs, rhs, err,
                         _close(lhs, rhs, err, scale),
                         {"alpha": float(alpha), "beta": float(beta)})


def _hull(a, b):
    if a is None or b is None:
        return None
    return (min(a[0], b[0]), max(a[1], b[1]))
