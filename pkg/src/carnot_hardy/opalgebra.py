"""Differential-operator ASTs applied through jets.

Base nodes act on a jet centred at a batch of points:

    Partial(i)           d/dx_i (lowers the jet order by one)
    MulCoord(i)          multiplication by x_i
    MulStratumNormPow(k) multiplication by |x'|^k
    Scale(c)             multiplication by a constant
    MulField(w)          multiplication by a closed-form field (numeric only)
    Sum(terms), Compose(factors)   Compose applies its factors right to left

``A @ B`` composes (B first), ``A + B`` sums and ``c * A`` scales.
``Named`` wraps a primitive (X_j, T, sub-Laplacian, ...) around its
expansion into base nodes.

Exact application uses rational jets at rational points; odd powers of
|x'| are irrational there and are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from gmpy2 import mpq

from .jets import Jet


class Op:
    def __matmul__(self, other: "Op") -> "Op":
        return Compose((self, other))

    def __add__(self, other: "Op") -> "Op":
        return Sum((self, other))

    def __sub__(self, other: "Op") -> "Op":
        return Sum((self, Scale(-1) @ other))

    def __neg__(self) -> "Op":
        return Scale(-1) @ self

    def __rmul__(self, c) -> "Op":
        return Scale(c) @ self

    @property
    def order(self) -> int:
        return order(self)


@dataclass(frozen=True, eq=False)
class Partial(Op):
    i: int


@dataclass(frozen=True, eq=False)
class MulCoord(Op):
    i: int


@dataclass(frozen=True, eq=False)
class MulStratumNormPow(Op):
    k: int


@dataclass(frozen=True, eq=False)
class Scale(Op):
    c: object

    def __post_init__(self):
        c = self.c
        if isinstance(c, int):
            c = Fraction(c)
        elif type(c) is type(mpq(0)):
            c = Fraction(int(c.numerator), int(c.denominator))
        object.__setattr__(self, "c", c)


@dataclass(frozen=True, eq=False)
class Sum(Op):
    terms: tuple

    def __post_init__(self):
        flat = []
        for t in self.terms:
            flat.extend(t.terms if isinstance(t, Sum) else (t,))
        object.__setattr__(self, "terms", tuple(flat))


@dataclass(frozen=True, eq=False)
class Compose(Op):
    factors: tuple

    def __post_init__(self):
        flat = []
        for t in self.factors:
            flat.extend(t.factors if isinstance(t, Compose) else (t,))
        object.__setattr__(self, "factors", tuple(flat))


@dataclass(frozen=True, eq=False)
class Named(Op):
    name: str
    body: Op


@dataclass(frozen=True, eq=False)
class MulField(Op):
    """Multiplication by a real ScalarField (no exact evaluation)."""

    field: object
    label: str = "w"


IDENTITY = Scale(1)


def order(op: Op) -> int:
    """Largest number of Partial nodes along any composition chain."""
    if isinstance(op, Partial):
        return 1
    if isinstance(op, (MulCoord, MulStratumNormPow, Scale, MulField)):
        return 0
    if isinstance(op, Sum):
        return max(order(t) for t in op.terms)
    if isinstance(op, Compose):
        return sum(order(t) for t in op.factors)
    if isinstance(op, Named):
        return order(op.body)
    raise TypeError(f"not an operator: {op!r}")


def uses_field(op: Op) -> bool:
    if isinstance(op, MulField):
        return True
    if isinstance(op, Sum):
        return any(uses_field(t) for t in op.terms)
    if isinstance(op, Compose):
        return any(uses_field(t) for t in op.factors)
    if isinstance(op, Named):
        return uses_field(op.body)
    return False


def to_text(op: Op) -> str:
    if isinstance(op, Partial):
        return f"d{op.i}"
    if isinstance(op, MulCoord):
        return f"x{op.i}"
    if isinstance(op, MulStratumNormPow):
        return f"|x'|^{op.k}"
    if isinstance(op, Scale):
        return str(op.c)
    if isinstance(op, MulField):
        return op.label
    if isinstance(op, Named):
        return op.name
    if isinstance(op, Sum):
        return "(" + " + ".join(to_text(t) for t in op.terms) + ")"
    return "(" + " . ".join(to_text(t) for t in op.factors) + ")"


# ----------------------------------------------------------------------------
# application


class ApplyContext:
    """Centre points plus caches shared by one application pass."""

    def __init__(self, x: np.ndarray, stratum: tuple[int, ...]):
        self.x = x
        self.exact = x.dtype == object
        self.stratum = stratum
        self._norm: dict = {}
        self._memo: dict = {}

    def number(self, c):
        if self.exact:
            if isinstance(c, float):
                raise ValueError("floating scale factor in an exact application")
            return mpq(c.numerator, c.denominator)
        return float(c)

    def norm_pow(self, k: int, order_: int, dim: int) -> Jet:
        key = (k, order_)
        if key not in self._norm:
            r2 = None
            for i in self.stratum:
                v = Jet.variable(i, self.x[:, i], dim, order_)
                r2 = v * v if r2 is None else r2 + v * v
            if self.exact:
                if k % 2:
                    raise ValueError("odd powers of |x'| are irrational at rational points")
                if k < 0 and any(v == 0 for v in r2.value):
                    raise ZeroDivisionError("x' = 0 under a singular multiplier")
                self._norm[key] = r2.pow(k // 2)
            else:
                zero = r2.value == 0
                if k < 0 and zero.any():
                    # only reached at points where the field vanishes identically
                    r2.c[0, zero] = 1.0
                    out = r2.pow(k // 2) if k % 2 == 0 else r2.pow(k / 2)
                    out.c[:, zero] = 0.0
                else:
                    out = r2.pow(k // 2) if k % 2 == 0 else r2.pow(k / 2)
                self._norm[key] = out
        return self._norm[key]


def apply(op: Op, jet: Jet, ctx: ApplyContext) -> Jet:
    key = (id(op), id(jet))
    hit = ctx._memo.get(key)
    if hit is not None:
        return hit[2]
    out = _apply(op, jet, ctx)
    ctx._memo[key] = (op, jet, out)
    return out


def _apply(op: Op, jet: Jet, ctx: ApplyContext) -> Jet:
    if isinstance(op, Partial):
        return jet.derivative(op.i)
    if isinstance(op, MulCoord):
        return jet.mul_coord(op.i, ctx.x[:, op.i])
    if isinstance(op, MulStratumNormPow):
        return jet * ctx.norm_pow(op.k, jet.order, jet.dim)
    if isinstance(op, Scale):
        if op.c == 1:
            return jet
        return jet * ctx.number(op.c)
    if isinstance(op, Sum):
        out = None
        for t in op.terms:
            v = apply(t, jet, ctx)
            out = v if out is None else out + v
        return out
    if isinstance(op, Compose):
        out = jet
        for f in reversed(op.factors):
            out = apply(f, out, ctx)
        return out
    if isinstance(op, Named):
        return apply(op.body, jet, ctx)
    if isinstance(op, MulField):
        if ctx.exact:
            raise ValueError("field multipliers are numeric only")
        w, _ = op.field.jet(ctx.x, jet.order)
        return jet * w
    raise TypeError(f"not an operator: {op!r}")


def apply_exact(op: Op, f, x, stratum=None):
    """Exact rational value of (op f)(x) for a polynomial-type field f.

    ``f`` is a ScalarField with a rational expression, or a callable
    ``(point, order) -> Jet`` giving an exact jet.
    """
    k = order(op)
    if k > 4:
        raise ValueError("operator order above 4")
    xq = np.empty((1, len(x)), dtype=object)
    for i, v in enumerate(x):
        xq[0, i] = mpq(v.numerator, v.denominator) if isinstance(v, Fraction) else mpq(v)
    if callable(f) and not hasattr(f, "jet"):
        jet = f(xq, k)
        strat = stratum
    else:
        jet, im = f.jet(xq, k)
        if im is not None:
            raise ValueError("exact application takes real fields")
        strat = f.stratum if stratum is None else stratum
    ctx = ApplyContext(xq, tuple(strat))
    v = apply(op, jet, ctx).value[0]
    return Fraction(int(v.numerator), int(v.denominator))


def apply_numeric(op: Op, f, pts: np.ndarray):
    """Values of op f at float points (complex for complex fields)."""
    pts = np.asarray(pts, dtype=np.float64)
    k = order(op)
    re, im = f.jet(pts, k)
    ctx = ApplyContext(pts, tuple(f.stratum))
    out = apply(op, re, ctx).value
    if im is None:
        return out.copy()
    return out + 1j * apply(op, im, ctx).value


@dataclass(frozen=True, eq=False)
class Applied:
    """``op f`` as an integrand for the quadrature functionals."""

    op: Op
    field: object

    def evaluate(self, pts):
        return apply_numeric(self.op, self.field, pts)


def commutator(a: Op, b: Op) -> Op:
    oa, ob = order(a), order(b)
    if oa > 3 or ob > 3 or oa + ob > 4:
        raise ValueError(f"commutator order overflow ({oa} + {ob} > 4)")
    return Sum((Compose((a, b)), Scale(-1) @ Compose((b, a))))


# ----------------------------------------------------------------------------
# model primitives


def heisenberg_primitives(n: int) -> dict[str, Op]:
    """X_j, Y_j, T, Z, the sub-Laplacian L and the stratum Laplacian Delta on H_n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    t = 2 * n
    half = Fraction(1, 2)
    prims: dict[str, Op] = {}
    for j in range(n):
        x, y = j, n + j
        prims[f"X{j + 1}"] = Named(f"X{j + 1}", Partial(x) - Scale(half) @ MulCoord(y) @ Partial(t))
        prims[f"Y{j + 1}"] = Named(f"Y{j + 1}", Partial(y) + Scale(half) @ MulCoord(x) @ Partial(t))
    prims["T"] = Named("T", Partial(t))
    prims["Z"] = Named("Z", Sum(tuple(MulCoord(j) @ Partial(n + j) - MulCoord(n + j) @ Partial(j)
                                      for j in range(n))))
    hz = [prims[f"X{j + 1}"] for j in range(n)] + [prims[f"Y{j + 1}"] for j in range(n)]
    prims["L"] = Named("L", Sum(tuple(v @ v for v in hz)))
    prims["Delta"] = Named("Delta", Sum(tuple(Partial(i) @ Partial(i) for i in range(2 * n))))
    return prims


class Calculus:
    """Horizontal operators of a group model (Euclidean or Heisenberg)."""

    def __init__(self, model):
        self.model = model
        self.N = model.N
        if model.is_heisenberg:
            self.prims = heisenberg_primitives(model.n)
            n = model.n
            self.horizontal = [self.prims[f"X{j + 1}"] for j in range(n)] + [self.prims[f"Y{j + 1}"] for j in range(n)]
            self.L = self.prims["L"]
        else:
            self.prims = {}
            self.horizontal = [Named(f"d{i}", Partial(i)) for i in range(model.n)]
            self.L = Named("L", Sum(tuple(v @ v for v in self.horizontal)))
        self.x_dot_grad = Named("x'.grad", Sum(tuple(MulCoord(k) @ self.horizontal[k] for k in range(self.N))))
        self.xx_hess = Named("sum x'_j x'_k X_j X_k", Sum(tuple(
            MulCoord(j) @ MulCoord(k) @ self.horizontal[j] @ self.horizontal[k]
            for j in range(self.N) for k in range(self.N))))

    def M(self, k: int) -> Op:
        return MulStratumNormPow(k)

    @property
    def T(self) -> Op:
        self._need_heisenberg()
        return self.prims["T"]

    @property
    def Z(self) -> Op:
        self._need_heisenberg()
        return self.prims["Z"]

    @property
    def Delta(self) -> Op:
        self._need_heisenberg()
        return self.prims["Delta"]

    @property
    def tangential(self) -> Op:
        """sum_j (x_j Y_j - y_j X_j)."""
        self._need_heisenberg()
        n = self.model.n
        return Named("sum(x_j Y_j - y_j X_j)", Sum(tuple(
            MulCoord(j) @ self.horizontal[n + j] - MulCoord(n + j) @ self.horizontal[j] for j in range(n))))

    def radial(self) -> Op:
        """(sum_i nu_i x_i d_i) / |x|, Euclidean models only (numeric)."""
        from .fields import ScalarField, power, qnorm, norm1

        m = self.model
        if m.is_heisenberg:
            raise ValueError("the radial derivative is realized on Euclidean models only")
        r = norm1() if m.isotropic else qnorm(m.quasi.power(), m.quasi.exponents(m.dilation))
        inv = ScalarField(m.ambient_dim, power(r, -1), None, m.stratum, "1/|x|")
        euler = Sum(tuple(Scale(v) @ MulCoord(i) @ Partial(i) for i, v in enumerate(m.dilation.weights)))
        return Named("R", MulField(inv, "1/|x|") @ euler)

    def _need_heisenberg(self):
        if not self.model.is_heisenberg:
            raise ValueError("defined on Heisenberg models only")


def factorization_pair(model, alpha, beta) -> tuple[Op, Op]:
    """T = -L + a M_-2 (x'.grad) + b M_-2 and its formal adjoint."""
    c = Calculus(model)
    a, b = Scale(alpha), Scale(beta)
    N = model.N
    T = Named("T_ab", Scale(-1) @ c.L + a @ c.M(-2) @ c.x_dot_grad + b @ c.M(-2))
    zero = Scale(alpha * (N - 2) - beta)
    Tp = Named("T+_ab", Scale(-1) @ c.L - a @ c.M(-2) @ c.x_dot_grad - zero @ c.M(-2))
    return T, Tp

