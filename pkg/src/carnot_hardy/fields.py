"""Closed-form test functions with jet evaluation and declared support.

Expressions are nested tuples ``(head, *args)``:

    (const v)  (x i)  (add a b ..)  (mul a b ..)  (neg a)  (pow a p)
    (exp a)  (log a)  (cos a)  (sin a)
    (norm1)                  |x'|, Euclidean norm of the first stratum
    (norm2)                  |x'|^2
    (qnorm p e_1 .. e_d)     (sum_i x_i^e_i)^(1/p), a homogeneous quasi-norm
    (bump a r0 s)            cutoff(log(a / r0) / s)
    (cut a c h)              cutoff((a - c) / h)

with ``cutoff(u) = exp(-1/(1-u^2))`` on |u| < 1 and 0 elsewhere. The text
form is the same tree in prefix notation, e.g.
``(mul (pow (norm1) -1) (bump (norm1) 1 1/2))``. A complex field is written
``(complex RE IM)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from gmpy2 import mpq

from .jets import Jet

_HEADS = {
    "const": 1, "x": 1, "add": -1, "mul": -1, "neg": 1, "pow": 2, "exp": 1, "log": 1,
    "cos": 1, "sin": 1, "norm1": 0, "norm2": 0, "qnorm": -1, "bump": 3, "cut": 3,
}


# ----------------------------------------------------------------------------
# construction helpers


def const(v):
    return ("const", _num(v))


def coord(i: int):
    return ("x", i)


def add(*args):
    return ("add", *args)


def mul(*args):
    return ("mul", *args)


def power(a, p):
    return ("pow", a, _num(p))


def norm1():
    return ("norm1",)


def bump(a, r0, s):
    return ("bump", a, _num(r0), _num(s))


def cut(a, c, h):
    return ("cut", a, _num(c), _num(h))


def qnorm(power_: int, exponents):
    return ("qnorm", int(power_), *(int(e) for e in exponents))


def _num(v):
    """Keep rationals exact; floats stay floats."""
    if isinstance(v, (int, Fraction)) or type(v) is type(mpq(0)):
        return Fraction(int(v.numerator), int(v.denominator)) if not isinstance(v, int) else Fraction(v)
    if isinstance(v, str):
        return Fraction(v)
    return float(v)


# ----------------------------------------------------------------------------
# text form


def to_text(expr) -> str:
    head = expr[0]
    if head == "const":
        return _num_text(expr[1])
    parts = [head]
    for a in expr[1:]:
        parts.append(to_text(a) if isinstance(a, tuple) else _num_text(a))
    return "(" + " ".join(parts) + ")"


def _num_text(v) -> str:
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def parse_expr(text: str):
    tokens = _TOKEN.findall(text)
    pos = 0

    def atom(tok):
        try:
            return Fraction(tok)
        except ValueError:
            return float(tok)

    def walk():
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        if tok != "(":
            return ("const", atom(tok))
        head = tokens[pos]
        pos += 1
        args = []
        while tokens[pos] != ")":
            if tokens[pos] == "(":
                args.append(walk())
            else:
                a = atom(tokens[pos])
                pos += 1
                args.append(a)
        pos += 1
        return _build(head, args)

    try:
        out = walk()
    except IndexError:
        raise ValueError(f"unbalanced expression: {text!r}") from None
    if pos != len(tokens):
        raise ValueError(f"trailing tokens in {text!r}")
    return out


def _build(head, args):
    if head == "complex":
        if len(args) != 2:
            raise ValueError("complex takes two arguments")
        return ("complex", *args)
    if head not in _HEADS:
        raise ValueError(f"unknown node {head!r}")
    arity = _HEADS[head]
    if arity >= 0 and len(args) != arity:
        raise ValueError(f"{head} takes {arity} arguments")
    if head == "const":
        return ("const", args[0][1] if isinstance(args[0], tuple) else args[0])
    if head in ("x", "qnorm"):
        return (head, *(int(a[1] if isinstance(a, tuple) else a) for a in args))
    if head in ("pow",):
        return (head, _expr(args[0]), _scalar(args[1]))
    if head in ("bump", "cut"):
        return (head, _expr(args[0]), _scalar(args[1]), _scalar(args[2]))
    return (head, *(_expr(a) for a in args))


def _expr(a):
    return a if isinstance(a, tuple) else ("const", a)


def _scalar(a):
    return a[1] if isinstance(a, tuple) else a


# ----------------------------------------------------------------------------
# support analysis


@dataclass(frozen=True)
class Support:
    """Region outside which an expression vanishes identically.

    ``annulus`` bounds |x'|, ``qball`` bounds the quasi-norm node, and
    ``intervals`` bounds single coordinates. ``None`` means unconstrained.
    """

    annulus: tuple[float, float] | None = None
    qball: tuple[float, float, tuple] | None = None
    intervals: tuple[tuple[int, float, float], ...] = ()

    def meet(self, other: "Support") -> "Support":
        ann = _meet_iv(self.annulus, other.annulus)
        qb = self.qball if other.qball is None else other.qball if self.qball is None else (
            max(self.qball[0], other.qball[0]), min(self.qball[1], other.qball[1]), self.qball[2])
        ivs = dict()
        for i, lo, hi in self.intervals + other.intervals:
            ivs[i] = _meet_iv(ivs.get(i), (lo, hi))
        return Support(ann, qb, tuple(sorted((i, lo, hi) for i, (lo, hi) in ivs.items())))

    def join(self, other: "Support") -> "Support":
        ann = None if self.annulus is None or other.annulus is None else (
            min(self.annulus[0], other.annulus[0]), max(self.annulus[1], other.annulus[1]))
        qb = None if self.qball is None or other.qball is None else (
            min(self.qball[0], other.qball[0]), max(self.qball[1], other.qball[1]), self.qball[2])
        a = {i: (lo, hi) for i, lo, hi in self.intervals}
        b = {i: (lo, hi) for i, lo, hi in other.intervals}
        ivs = tuple(sorted((i, min(a[i][0], b[i][0]), max(a[i][1], b[i][1])) for i in a.keys() & b.keys()))
        return Support(ann, qb, ivs)


def _meet_iv(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return (max(a[0], b[0]), min(a[1], b[1]))


def _support(expr) -> Support:
    head = expr[0]
    if head == "mul":
        s = Support()
        for a in expr[1:]:
            s = s.meet(_support(a))
        return s
    if head == "add":
        s = _support(expr[1])
        for a in expr[2:]:
            s = s.join(_support(a))
        return s
    if head in ("neg",):
        return _support(expr[1])
    if head == "complex":
        return _support(expr[1]).join(_support(expr[2]))
    if head == "bump":
        arg, r0, s = expr[1], float(expr[2]), float(expr[3])
        lo, hi = r0 * math.exp(-s), r0 * math.exp(s)
        return _range_support(arg, lo, hi)
    if head == "cut":
        arg, c, h = expr[1], float(expr[2]), float(expr[3])
        return _range_support(arg, c - h, c + h)
    return Support()


def _range_support(arg, lo, hi) -> Support:
    """Support when ``arg`` is confined to [lo, hi]."""
    head = arg[0]
    if head == "norm1":
        return Support(annulus=(max(lo, 0.0), hi))
    if head == "norm2":
        return Support(annulus=(math.sqrt(max(lo, 0.0)), math.sqrt(max(hi, 0.0))))
    if head == "qnorm":
        return Support(qball=(max(lo, 0.0), hi, arg[1:]))
    if head == "x":
        return Support(intervals=((arg[1], lo, hi),))
    if head == "log":
        return _range_support(arg[1], math.exp(lo), math.exp(hi))
    return Support()


# ----------------------------------------------------------------------------
# jet evaluation


class _Context:
    def __init__(self, x: np.ndarray, order: int, stratum: tuple[int, ...]):
        self.x = x
        self.order = order
        self.dim = x.shape[1]
        self.stratum = stratum
        self.exact = x.dtype == object
        self.vars = [Jet.variable(i, x[:, i], self.dim, order) for i in range(self.dim)]
        self._norm2 = None
        self._norm1 = None
        self.cache: dict = {}

    def number(self, v):
        if self.exact:
            if isinstance(v, float):
                raise ValueError("floating constant in an exact evaluation")
            return mpq(v.numerator, v.denominator) if isinstance(v, Fraction) else mpq(v)
        return float(v)

    def constant(self, v) -> Jet:
        return Jet.constant(self.number(v), self.dim, self.order, self.x.shape[0], self.exact)

    def norm2(self) -> Jet:
        if self._norm2 is None:
            acc = None
            for i in self.stratum:
                sq = self.vars[i] * self.vars[i]
                acc = sq if acc is None else acc + sq
            self._norm2 = acc
        return self._norm2

    def norm1(self) -> Jet:
        if self._norm1 is None:
            if self.exact:
                raise ValueError("|x'| is irrational at rational points; use even powers")
            self._norm1 = self.norm2().pow(0.5)
        return self._norm1


def _eval(expr, ctx: _Context) -> Jet:
    hit = ctx.cache.get(expr)
    if hit is None:
        hit = ctx.cache[expr] = _eval_node(expr, ctx)
    return hit


def _eval_node(expr, ctx: _Context) -> Jet:
    head = expr[0]
    if head == "const":
        return ctx.constant(expr[1])
    if head == "x":
        return ctx.vars[expr[1]]
    if head == "add":
        out = _eval(expr[1], ctx)
        for a in expr[2:]:
            out = out + _eval(a, ctx)
        return out
    if head == "mul":
        out = _eval(expr[1], ctx)
        for a in expr[2:]:
            out = out * _eval(a, ctx)
        return out
    if head == "neg":
        return -_eval(expr[1], ctx)
    if head == "pow":
        base, p = expr[1], expr[2]
        if base[0] == "norm1" and isinstance(p, Fraction) and p.denominator == 1 and p.numerator % 2 == 0:
            return ctx.norm2().pow(p.numerator // 2)
        b = _eval(base, ctx)
        if isinstance(p, Fraction) and p.denominator == 1:
            return b.pow(int(p))
        if ctx.exact:
            raise ValueError("non-integer power in an exact evaluation")
        return b.pow(float(p))
    if head == "exp":
        return _eval(expr[1], ctx).exp()
    if head == "log":
        return _eval(expr[1], ctx).log()
    if head == "cos":
        return _eval(expr[1], ctx).cos()
    if head == "sin":
        return _eval(expr[1], ctx).sin()
    if head == "norm1":
        return ctx.norm1()
    if head == "norm2":
        return ctx.norm2()
    if head == "qnorm":
        p, ex = expr[1], expr[2:]
        acc = None
        for i, e in enumerate(ex):
            term = ctx.vars[i].pow(e)
            acc = term if acc is None else acc + term
        return acc if p == 1 else acc.pow(1.0 / p)
    if head == "bump":
        a = _eval(expr[1], ctx)
        u = (a * (1.0 / float(expr[2]))).log() * (1.0 / float(expr[3]))
        return u.cutoff()
    if head == "cut":
        a = _eval(expr[1], ctx)
        u = (a - float(expr[2])) * (1.0 / float(expr[3]))
        return u.cutoff()
    raise ValueError(f"unknown node {head!r}")


@dataclass(frozen=True)
class ScalarField:
    """A real or complex closed-form field on R^dim.

    ``stratum`` lists the coordinates making up x'. Complex fields carry the
    imaginary part as a second real expression.
    """

    dim: int
    re: tuple
    im: tuple | None = None
    stratum: tuple[int, ...] = ()
    name: str = ""
    support: Support = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        if not self.stratum:
            object.__setattr__(self, "stratum", tuple(range(self.dim)))
        sup = _support(self.re)
        if self.im is not None:
            sup = sup.join(_support(self.im))
        object.__setattr__(self, "support", sup)

    @property
    def is_complex(self) -> bool:
        return self.im is not None

    @property
    def stratum_margin(self) -> float:
        return self.support.annulus[0] if self.support.annulus else 0.0

    @property
    def outer_radius(self) -> float | None:
        return self.support.annulus[1] if self.support.annulus else None

    @property
    def support_box(self) -> list[tuple[float, float]] | None:
        """Axis-aligned box containing the support, or None if unbounded."""
        box: list = [None] * self.dim
        if self.support.annulus is not None:
            r = self.support.annulus[1]
            for i in self.stratum:
                box[i] = (-r, r)
        if self.support.qball is not None:
            r, desc = self.support.qball[1], self.support.qball[2]
            p, ex = desc[0], desc[1:]
            for i, e in enumerate(ex):
                iv = (-(r ** (p / e)), r ** (p / e))
                box[i] = iv if box[i] is None else _meet_iv(box[i], iv)
        for i, lo, hi in self.support.intervals:
            box[i] = (lo, hi) if box[i] is None else _meet_iv(box[i], (lo, hi))
        if any(b is None for b in box):
            return None
        return box

    def conj(self) -> "ScalarField":
        if self.im is None:
            return self
        return ScalarField(self.dim, self.re, ("neg", self.im), self.stratum, self.name + "*")

    def scaled(self, c) -> "ScalarField":
        k = const(c)
        im = None if self.im is None else mul(k, self.im)
        return ScalarField(self.dim, mul(k, self.re), im, self.stratum, self.name)

    def to_text(self) -> str:
        if self.im is None:
            return to_text(self.re)
        return f"(complex {to_text(self.re)} {to_text(self.im)})"

    def active(self, x: np.ndarray) -> np.ndarray:
        """Mask of points where the field may be nonzero."""
        x = np.asarray(x, dtype=float)
        mask = np.ones(x.shape[0], dtype=bool)
        sup = self.support
        if sup.annulus is not None:
            r = np.sqrt(np.sum(x[:, list(self.stratum)] ** 2, axis=1))
            mask &= (r > sup.annulus[0]) & (r < sup.annulus[1])
        if sup.qball is not None:
            desc = sup.qball[2]
            p, ex = desc[0], desc[1:]
            q = sum(np.abs(x[:, i]) ** e for i, e in enumerate(ex)) ** (1.0 / p)
            mask &= (q > sup.qball[0]) & (q < sup.qball[1])
        for i, lo, hi in sup.intervals:
            mask &= (x[:, i] > lo) & (x[:, i] < hi)
        return mask

    def jet(self, x, order: int):
        """(re, im) jets at the rows of ``x``; im is None for real fields.

        Float input gives float jets with inactive points set to exactly 0.
        Object input (rationals) gives exact jets; no masking is applied.
        """
        x = np.asarray(x)
        if x.ndim == 1:
            x = x.reshape(1, -1)
        if x.shape[1] != self.dim:
            raise ValueError(f"points have {x.shape[1]} coordinates, field has {self.dim}")
        if x.dtype == object:
            xq = np.empty(x.shape, dtype=object)
            for idx, v in np.ndenumerate(x):
                xq[idx] = mpq(v) if not isinstance(v, Fraction) else mpq(v.numerator, v.denominator)
            ctx = _Context(xq, order, self.stratum)
            re = _eval(self.re, ctx)
            im = None if self.im is None else _eval(self.im, ctx)
            return re, im
        x = x.astype(np.float64)
        mask = self.active(x)
        npts = x.shape[0]
        ctx = _Context(x[mask], order, self.stratum) if mask.any() else None
        out = []
        for expr in (self.re, self.im):
            if expr is None:
                out.append(None)
                continue
            j = Jet.constant(0.0, self.dim, order, npts)
            if ctx is not None:
                j.c[:, mask] = _eval(expr, ctx).c
            out.append(j)
        return out[0], out[1]

    def value(self, x) -> np.ndarray:
        re, im = self.jet(x, 0)
        if im is None:
            return re.value.copy()
        return re.value + 1j * im.value


def parse_field(text: str, dim: int, stratum: tuple[int, ...] = (), name: str = "") -> ScalarField:
    e = parse_expr(text)
    if e[0] == "complex":
        return ScalarField(dim, e[1], e[2], stratum, name or text)
    return ScalarField(dim, e, None, stratum, name or text)


def eval_jet(f: ScalarField, x, order: int):
    """Jet of f at a single point: a Jet, or an (re, im) pair for complex fields."""
    if order > 4:
        raise ValueError("jets are limited to order 4")
    re, im = f.jet(np.asarray(x).reshape(1, -1), order)
    return re if im is None else (re, im)


# ----------------------------------------------------------------------------
# radial weights


@dataclass(frozen=True)
class RadialWeight:
    """phi(r) = r^(-a) (log r)^c with integer c >= 0, r the quasi-norm."""

    a: float
    c: int = 0

    def __post_init__(self):
        if int(self.c) != self.c or self.c < 0:
            raise ValueError("log exponent must be a nonnegative integer")

    def value(self, r):
        r = np.asarray(r, dtype=float)
        return r ** (-self.a) * np.log(r) ** self.c

    def d1(self, r):
        r = np.asarray(r, dtype=float)
        L = np.log(r)
        lc1 = self.c * L ** (self.c - 1) if self.c else 0.0
        return r ** (-self.a - 1) * (lc1 - self.a * L**self.c)

    def d2(self, r):
        r = np.asarray(r, dtype=float)
        L = np.log(r)
        a, c = self.a, self.c
        t0 = a * (a + 1) * L**c
        t1 = -(2 * a + 1) * c * L ** (c - 1) if c >= 1 else 0.0
        t2 = c * (c - 1) * L ** (c - 2) if c >= 2 else 0.0
        return r ** (-a - 2) * (t0 + t1 + t2)

    def label(self) -> str:
        return f"r^{-self.a}" + (f"(log r)^{self.c}" if self.c else "")


# ----------------------------------------------------------------------------
# families


def _stratum_dim(model) -> int:
    return model.N


def log_radial_bump(r0: float, s: float, model) -> ScalarField:
    """cutoff(log(|x'|/r0)/s), supported in r0 e^-s < |x'| < r0 e^s."""
    if not (r0 > 0 and s > 0):
        raise ValueError("r0 and s must be positive")
    return ScalarField(model.ambient_dim, bump(norm1(), r0, s), None, model.stratum, f"logbump:{r0},{s}")


def tensor_with_t_bump(f: ScalarField, t_bump, model) -> ScalarField:
    """f(x~') b(t) on H_n; ``t_bump`` is an expression in the single variable (x 0)."""
    if not model.is_heisenberg:
        raise ValueError("t-products are defined on Heisenberg models")
    t = model.ambient_dim - 1
    b = _substitute(t_bump, {0: t})
    if not any(i == t for i, _, _ in _support(b).intervals):
        raise ValueError("the t factor must be compactly supported")
    re = mul(f.re, b)
    im = None if f.im is None else mul(f.im, b)
    return ScalarField(model.ambient_dim, re, im, model.stratum, f.name + "*b(t)")


def _substitute(expr, mapping):
    if expr[0] == "x":
        return ("x", mapping.get(expr[1], expr[1]))
    return (expr[0], *(_substitute(a, mapping) if isinstance(a, tuple) else a for a in expr[1:]))


def hardy_extremizer_family(model, eps: float, cutoff: ScalarField) -> ScalarField:
    """|x'|^(-(N-2)/2 + eps) times the cutoff."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    N = model.N
    if N < 3:
        raise ValueError("the Hardy extremizers need N >= 3")
    e = _num(eps)
    p = Fraction(2 - N, 2) + e if isinstance(e, Fraction) else (2 - N) / 2 + e
    re = cutoff.re if p == 0 else mul(power(norm1(), p), cutoff.re)
    im = None
    if cutoff.im is not None:
        im = cutoff.im if p == 0 else mul(power(norm1(), p), cutoff.im)
    return ScalarField(cutoff.dim, re, im, cutoff.stratum, f"extremizer:{eps}*{cutoff.name}")


def default_t_bump(half_width: float = 1.0):
    return cut(coord(0), 0, half_width)


def preset(name: str, model, params=()) -> ScalarField:
    """Named field families; Heisenberg models get a t-bump of half-width L.

    logbump:r0,s[,L]        radial bump in |x'|
    nonradial:r0,s[,L]      bump * (1 + x_1/(2|x'|))
    complex:r0,s[,L]        genuinely complex; on H_n the Z-T cross term is nonzero
    extremizer:eps,r0,s[,L] |x'|^(-(N-2)/2+eps) * bump
    critical:eps,v0,s       |log|x||^(-1/2+eps) * bump in log|x| (Euclidean models)
    """
    p = [float(v) for v in params]
    heis = model.is_heisenberg

    def with_t(f: ScalarField, L) -> ScalarField:
        return tensor_with_t_bump(f, default_t_bump(L), model) if heis else f

    dim, strat = model.ambient_dim, model.stratum
    if name == "logbump":
        r0, s = _defaults(p, 1.0, 1.0)
        f = log_radial_bump(r0, s, model)
        return _named(with_t(f, _opt(p, 2, 1.0)), name, params)
    if name == "nonradial":
        r0, s = _defaults(p, 1.0, 1.0)
        b = bump(norm1(), r0, s)
        ang = add(const(1), mul(const(Fraction(1, 2)), coord(0), power(norm1(), -1)))
        f = ScalarField(dim, mul(b, ang), None, strat)
        return _named(with_t(f, _opt(p, 2, 1.0)), name, params)
    if name == "complex":
        r0, s = _defaults(p, 1.0, 1.0)
        b = bump(norm1(), r0, s)
        inv = power(norm1(), -1)
        if heis:
            n = model.n
            t = coord(model.ambient_dim - 1)
            x1, y1 = coord(0), coord(n)
            tb = cut(t, 0, _opt(p, 2, 1.0))
            half = const(Fraction(1, 2))
            # (x1 + i y1)(1 + i t/2) / |x'|
            re = mul(b, tb, inv, add(x1, ("neg", mul(half, y1, t))))
            im = mul(b, tb, inv, add(y1, mul(half, x1, t)))
        else:
            if model.N < 2:
                raise ValueError("complex preset needs at least two coordinates")
            re = mul(b, inv, coord(0))
            im = mul(b, inv, coord(1))
        return _named(ScalarField(dim, re, im, strat), name, params)
    if name == "extremizer":
        eps, r0, s = _defaults(p, 0.1, 1.0, 3.0)
        f = hardy_extremizer_family(model, eps, log_radial_bump(r0, s, model))
        return _named(with_t(f, _opt(p, 3, 1.0)), name, params)
    if name == "critical":
        if heis:
            raise ValueError("the critical family is built on Euclidean models")
        eps, v0, s = _defaults(p, 0.1, 10.0, 2.0)
        r = _radial_node(model)
        lg = ("log", r)
        # |log r|^(-1/2+eps) with log r > 0 on the support
        re = mul(power(lg, -0.5 + eps), bump(lg, v0, s))
        return _named(ScalarField(dim, re, None, strat), name, params)
    raise ValueError(f"unknown field preset {name!r}")


def _radial_node(model):
    if model.isotropic:
        return norm1()
    ex = model.quasi.exponents(model.dilation)
    return qnorm(model.quasi.power(), ex)


def _defaults(p, *dflt):
    return tuple(p[i] if i < len(p) else d for i, d in enumerate(dflt))


def _opt(p, i, d):
    return p[i] if i < len(p) else d


def _named(f: ScalarField, name, params) -> ScalarField:
    label = name + (":" + ",".join(_fmt(v) for v in params) if params else "")
    return ScalarField(f.dim, f.re, f.im, f.stratum, label)


def _fmt(v) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def parse_preset(text: str, model) -> ScalarField:
    """``logbump:1,1`` style preset, or a raw prefix expression."""
    text = text.strip()
    if text.startswith("("):
        return parse_field(text, model.ambient_dim, model.stratum)
    name, _, rest = text.partition(":")
    params = [float(v) for v in rest.split(",")] if rest else []
    return preset(name, model, params)
