"""Rayleigh-quotient probes of the sharp Hardy constants.

Each problem pairs a numerator and denominator functional with a parametric
field family concentrating near the extremal profile. Quotients are computed
with the deterministic quadrature and minimized derivative-free from a fixed
starting simplex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .fields import ScalarField, bump, cut, coord, mul, norm1, power, qnorm, preset
from .groups import GroupModel, parse_model
from .inequalities import (TOL_ERR_FACTOR, FunctionalTerm, TermBank, calculus, l2_term, plain_term,
                           radial_weight, stratum_weight, _radial_op)
from .quadrature import QuadratureSpec, spec_for_field

DEGENERATE = 1e-30
# Heisenberg t-bumps are this many times wider than |x'|^2 on the support,
# so the central-derivative part of the horizontal gradient stays negligible
T_WIDTH_FACTOR = 100.0


class DegenerateFamily(ValueError):
    pass


@dataclass
class RayleighProblem:
    id: str
    model: GroupModel
    numerator: FunctionalTerm
    denominator: FunctionalTerm
    family: Callable  # params -> ScalarField
    names: tuple
    box: tuple  # ((lo, hi), ...) per parameter
    start: tuple
    target: float
    nodes: int = 48
    angular_nodes: int = 4
    radial_map: str = "log"

    def spec(self, f: ScalarField, nodes: int | None = None) -> QuadratureSpec:
        return spec_for_field(f, nodes=nodes or self.nodes, angular_nodes=self.angular_nodes,
                              radial_map=self.radial_map)


@dataclass
class RayleighValue:
    quotient: float
    err: float
    numerator: float
    denominator: float

    def to_dict(self) -> dict:
        return {"quotient": self.quotient, "err": self.err, "numerator": self.numerator,
                "denominator": self.denominator}


def rayleigh_of_field(problem: RayleighProblem, f: ScalarField, spec: QuadratureSpec | None = None) -> RayleighValue:
    spec = spec or problem.spec(f)
    bank = TermBank(problem.model, f, spec)
    bank.add(problem.numerator)
    bank.add(problem.denominator)
    bank.compute()
    num, den = bank.get(problem.numerator), bank.get(problem.denominator)
    if not den.value > DEGENERATE:
        raise DegenerateFamily(f"denominator {den.value:.3e} below {DEGENERATE:g}")
    q = num.value / den.value
    err = abs(q) * (num.err / abs(num.value) + den.err / den.value) if num.value else den.err
    return RayleighValue(float(q), float(err), float(num.value), float(den.value))


def rayleigh(problem: RayleighProblem, params, spec: QuadratureSpec | None = None, nodes: int | None = None) -> RayleighValue:
    params = tuple(float(v) for v in params)
    for v, (lo, hi), name in zip(params, problem.box, problem.names):
        if not lo <= v <= hi:
            raise ValueError(f"{name}={v} outside the family box [{lo}, {hi}]")
    f = problem.family(params)
    return rayleigh_of_field(problem, f, spec or problem.spec(f, nodes))


# ----------------------------------------------------------------------------
# families


def power_log_bump(model: GroupModel, p: float, s: float, r0: float = 1.0, radius=None) -> ScalarField:
    """|x|^p cutoff(log(|x|/r0)/s), with |x| the stratum norm unless ``radius`` is given.

    On H_n the field is multiplied by a t-bump much wider than the squared
    outer radius.
    """
    r = norm1() if radius is None else radius
    body = bump(r, r0, s)
    re = body if p == 0 else mul(power(r, p), body)
    if model.is_heisenberg:
        R = r0 * math.exp(s)
        L = T_WIDTH_FACTOR * R * R
        re = mul(re, cut(coord(model.ambient_dim - 1), 0, L))
    return ScalarField(model.ambient_dim, re, None, model.stratum, f"powerbump:{p!r},{s!r}")


def _quasi_radius(model: GroupModel):
    if model.isotropic:
        return norm1()
    return qnorm(model.quasi.power(), model.quasi.exponents(model.dilation))


def hardy_problem(model: GroupModel | str, refined: bool = False) -> RayleighProblem:
    model = parse_model(model) if isinstance(model, str) else model
    N = model.N
    if N < 3:
        raise ValueError("Hardy probes need N >= 3")
    c = calculus(model)
    if refined:
        num = l2_term(c.x_dot_grad, stratum_weight(-2), "||x'.grad_H f/|x'|||^2")
    else:
        num = l2_term(c.horizontal, stratum_weight(0), "||grad_H f||^2")
    den = plain_term(stratum_weight(-2), "||f/|x'|||^2")
    base = -(N - 2) / 2

    def family(p):
        eps, s = p
        return power_log_bump(model, base + eps, s)

    heis = model.is_heisenberg
    pid = ("refined_" if refined else "") + "hardy_" + model.label.replace(":", "")
    return RayleighProblem(pid, model, num, den, family, ("eps", "s"),
                           ((0.005, 0.5), (1.0, 16.0 if heis else 30.0)), (0.05, 10.0 if heis else 20.0),
                           (N - 2) ** 2 / 4,
                           nodes=32 if heis else 48, angular_nodes=4)


def weighted_hardy_problem(model: GroupModel | str, a: float) -> RayleighProblem:
    model = parse_model(model) if isinstance(model, str) else model
    if model.is_heisenberg:
        raise ValueError("weighted Hardy probes run on Euclidean models")
    Q = float(model.q_hom)
    R = _radial_op(model)
    num = l2_term(R, radial_weight(f"|x|^{-2 * a!r}", lambda r: r ** (-2 * a)), "||R f/|x|^a||^2")
    den = plain_term(radial_weight(f"|x|^{-(2 * a + 2)!r}", lambda r: r ** (-(2 * a + 2))), "int |f|^2/|x|^(2a+2)")
    base = -(Q - 2 * a - 2) / 2
    rad = _quasi_radius(model)

    def family(p):
        eps, s = p
        return power_log_bump(model, base + eps, s, radius=None if model.isotropic else rad)

    target = (Q - 2 * a - 2) ** 2 / 4
    return RayleighProblem(f"weighted_hardy_{model.label.replace(':', '')}_a{a!r}", model, num, den, family,
                           ("eps", "s"), ((0.005, 0.5), (1.0, 30.0)), (0.05, 20.0), target,
                           nodes=48, angular_nodes=4 if model.isotropic else 64)


CRITICAL_OUTER = 100.0  # largest log|x| on the support


def critical_problem(model: GroupModel | str, outer: float = CRITICAL_OUTER) -> RayleighProblem:
    """(log|x|)^2 |x|^(2-Q) |R f|^2 against |f|^2 |x|^-Q, target 1/4.

    Family: (log r)^(-1/2+eps) times a bump in log(log r) of half-width s
    whose outer edge sits at log r = ``outer``.
    """
    model = parse_model(model) if isinstance(model, str) else model
    if model.is_heisenberg:
        raise ValueError("critical Hardy probes run on Euclidean models")
    Q = float(model.q_hom)
    if Q * outer >= 700:
        raise ValueError("outer radius overflows |x|^Q in double precision")
    R = _radial_op(model)
    num = l2_term(R, radial_weight("|x|^(2-Q)(log|x|)^2", lambda r: r ** (2 - Q) * np.log(r) ** 2),
                  "||log|x| R f/|x|^((Q-2)/2)||^2")
    den = plain_term(radial_weight("|x|^-Q", lambda r: r ** (-Q)), "int |f|^2/|x|^Q")

    def family(p):
        eps, s = p
        return preset("critical", model, [eps, outer * math.exp(-s), s])

    return RayleighProblem(f"critical_hardy_{model.label.replace(':', '')}", model, num, den, family,
                           ("eps", "s"), ((0.005, 0.5), (0.5, 14.5)), (0.05, 10.0), 0.25,
                           nodes=48, angular_nodes=4 if model.isotropic else 64, radial_map="loglog")


def problems() -> dict[str, Callable[[], RayleighProblem]]:
    return {
        "hardy_euclid3": lambda: hardy_problem("euclid:3"),
        "hardy_heis2": lambda: hardy_problem("heis:2"),
        "refined_hardy_heis2": lambda: hardy_problem("heis:2", refined=True),
        "weighted_hardy_euclid3": lambda: weighted_hardy_problem("euclid:3", 0.25),
        "critical_hardy_euclid3": lambda: critical_problem("euclid:3"),
    }


def get_problem(pid: str) -> RayleighProblem:
    table = problems()
    if pid not in table:
        raise KeyError(f"unknown sharpness problem {pid!r}")
    p = table[pid]()
    p.id = pid
    return p


# ----------------------------------------------------------------------------
# probing


@dataclass
class ProbeResult:
    problem_id: str
    target: float
    best_params: dict
    best_quotient: float
    total_err: float
    gap: float
    budget: int
    evaluations: int
    node_counts: dict
    clamped: list = field(default_factory=list)

    @property
    def respects_bound(self) -> bool:
        return self.best_quotient >= self.target - TOL_ERR_FACTOR * self.total_err

    def to_dict(self) -> dict:
        return {"problem_id": self.problem_id, "target": self.target, "best_params": self.best_params,
                "best_quotient": self.best_quotient, "total_err": self.total_err, "gap": self.gap,
                "budget": self.budget, "evaluations": self.evaluations, "node_counts": self.node_counts,
                "clamped": self.clamped, "respects_bound": self.respects_bound}


def _golden(fn, lo: float, hi: float, budget: int) -> float:
    g = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = fn(c), fn(d)
    used = 2
    while used < budget:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = fn(d)
        used += 1
    return c if fc <= fd else d


def probe(problem: RayleighProblem, budget: int = 60, nodes: int | None = None) -> ProbeResult:
    """Minimize the quotient over the family box within ``budget`` evaluations."""
    if budget < 1:
        raise ValueError("budget must be at least one evaluation")
    cache: dict = {}
    box = np.array(problem.box, dtype=float)
    clamped_any: set = set()

    def clamp(x):
        x = np.asarray(x, dtype=float)
        y = np.clip(x, box[:, 0], box[:, 1])
        for i in np.nonzero(y != x)[0]:
            clamped_any.add(problem.names[i])
        return tuple(float(v) for v in y)

    def fn(x):
        key = clamp(x)
        if key not in cache:
            if len(cache) >= budget:
                return math.inf
            cache[key] = rayleigh(problem, key, nodes=nodes)
        return cache[key].quotient

    x0 = np.array(problem.start, dtype=float)
    if len(x0) == 1:
        _golden(lambda v: fn([v]), box[0, 0], box[0, 1], budget)
    else:
        span = 0.25 * (box[:, 1] - box[:, 0])
        simplex = [x0]
        for i in range(len(x0)):
            v = x0.copy()
            v[i] = min(box[i, 1], v[i] + span[i])
            simplex.append(v)
        minimize(fn, x0, method="Nelder-Mead", bounds=list(map(tuple, box)),
                 options={"maxfev": budget, "initial_simplex": np.array(simplex), "xatol": 1e-4, "fatol": 1e-6})
    best = min(cache, key=lambda k: cache[k].quotient)
    val = cache[best]
    f = problem.family(best)
    spec = problem.spec(f, nodes)
    at_bound = [n for n, v, (lo, hi) in zip(problem.names, best, problem.box) if v in (lo, hi)]
    return ProbeResult(problem.id, problem.target, dict(zip(problem.names, best)), val.quotient, val.err,
                       val.quotient - problem.target, budget, len(cache),
                       {"nodes_per_axis": spec.nodes_per_axis,
                        "angular_nodes": spec.polar.angular_nodes if spec.polar else None},
                       sorted(set(at_bound) | clamped_any))


def monotone_widths(problem: RayleighProblem, eps: float, widths=(1.0, 2.0, 3.0, 4.0)) -> list[RayleighValue]:
    return [rayleigh(problem, (eps, s)) for s in widths]


def refined_vs_plain(model: GroupModel | str, f: ScalarField, spec: QuadratureSpec | None = None) -> dict:
    """Refined and plain Hardy quotients of the same field; refined <= plain."""
    model = parse_model(model) if isinstance(model, str) else model
    if model.N < 3:
        raise ValueError("needs N >= 3")
    plain = hardy_problem(model)
    refined = hardy_problem(model, refined=True)
    spec = spec or plain.spec(f)
    qp = rayleigh_of_field(plain, f, spec)
    qr = rayleigh_of_field(refined, f, spec)
    tol = TOL_ERR_FACTOR * (qp.err + qr.err) + 1e-12 * qp.quotient
    if qr.quotient > qp.quotient + tol:
        raise AssertionError(f"refined quotient {qr.quotient} exceeds plain quotient {qp.quotient}")
    return {"q_refined": qr.quotient, "q_plain": qp.quotient, "err_refined": qr.err, "err_plain": qp.err,
            "target": plain.target}
