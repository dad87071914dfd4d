"""Truncated multivariate Taylor jets, vectorized over evaluation points.

A jet of order ``k`` in ``d`` variables stores the Taylor coefficients
``c_a = (d^a f)(x) / a!`` for every multi-index ``|a| <= k``. Coefficients live
in an array of shape ``(ncoef, npts)``: float64 for numerical paths, ``object``
holding ``gmpy2.mpq`` rationals for the exact paths.

Multi-indices are graded (total degree first, then reverse-lexicographic),
so the basis of a lower order is always a prefix of a higher one and
truncation is slicing.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from itertools import product

import numpy as np
from gmpy2 import mpq

from . import backend


def _multi_indices(dim: int, order: int) -> list[tuple[int, ...]]:
    out = []
    for deg in range(order + 1):
        level = [a for a in product(range(deg + 1), repeat=dim) if sum(a) == deg]
        level.sort(reverse=True)
        out.extend(level)
    return out


class JetBasis:
    """Index bookkeeping shared by every jet with the same (dim, order)."""

    def __init__(self, dim: int, order: int):
        if dim < 1 or order < 0:
            raise ValueError("dim must be >= 1 and order >= 0")
        self.dim = dim
        self.order = order
        self.indices = _multi_indices(dim, order)
        self.ncoef = len(self.indices)
        self.position = {a: n for n, a in enumerate(self.indices)}
        self._mul = None
        self._deriv: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._shift: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def mul_table(self):
        if self._mul is None:
            ti, tj, tk = [], [], []
            for k, c in enumerate(self.indices):
                for i, a in enumerate(self.indices):
                    if any(x > y for x, y in zip(a, c)):
                        continue
                    b = tuple(y - x for x, y in zip(a, c))
                    ti.append(i)
                    tj.append(self.position[b])
                    tk.append(k)
            self._mul = tuple(np.asarray(t, dtype=np.intp) for t in (ti, tj, tk))
        return self._mul

    def deriv_map(self, i: int):
        """For the order-1-lower basis: source positions and integer factors."""
        if i not in self._deriv:
            lower = basis(self.dim, self.order - 1)
            src, fac = [], []
            for b in lower.indices:
                a = list(b)
                a[i] += 1
                src.append(self.position[tuple(a)])
                fac.append(b[i] + 1)
            self._deriv[i] = (np.asarray(src, dtype=np.intp), np.asarray(fac, dtype=np.int64))
        return self._deriv[i]

    def shift_map(self, i: int):
        """Positions b with b_i >= 1 and the positions of b - e_i."""
        if i not in self._shift:
            dst, src = [], []
            for n, b in enumerate(self.indices):
                if b[i] >= 1:
                    a = list(b)
                    a[i] -= 1
                    dst.append(n)
                    src.append(self.position[tuple(a)])
            self._shift[i] = (np.asarray(dst, dtype=np.intp), np.asarray(src, dtype=np.intp))
        return self._shift[i]


@lru_cache(maxsize=None)
def basis(dim: int, order: int) -> JetBasis:
    return JetBasis(dim, order)


def _is_exact(arr: np.ndarray) -> bool:
    return arr.dtype == object


def _as_int(p):
    if isinstance(p, (int, np.integer)):
        return int(p)
    if isinstance(p, Fraction) or type(p) is type(mpq(0)):
        return int(p) if p.denominator == 1 else None
    return None


def _unit_factorial(m: int, exact: bool):
    return mpq(1, math.factorial(m)) if exact else 1.0 / math.factorial(m)


class Jet:
    __slots__ = ("basis", "c")

    def __init__(self, jb: JetBasis, c: np.ndarray):
        self.basis = jb
        self.c = c

    # construction -------------------------------------------------------

    @classmethod
    def constant(cls, value, dim: int, order: int, npts: int, exact: bool = False) -> "Jet":
        jb = basis(dim, order)
        if exact:
            c = np.empty((jb.ncoef, npts), dtype=object)
            c[...] = mpq(0)
            c[0] = value
        else:
            c = np.zeros((jb.ncoef, npts), dtype=np.float64)
            c[0] = value
        return cls(jb, c)

    @classmethod
    def variable(cls, i: int, x, dim: int, order: int) -> "Jet":
        """Jet of the coordinate function x_i centred at the points ``x``."""
        x = np.asarray(x)
        exact = _is_exact(x)
        j = cls.constant(x, dim, order, x.shape[0], exact)
        if order >= 1:
            e = [0] * dim
            e[i] = 1
            j.c[j.basis.position[tuple(e)]] = mpq(1) if exact else 1.0
        return j

    # properties ----------------------------------------------------------

    @property
    def order(self) -> int:
        return self.basis.order

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def npts(self) -> int:
        return self.c.shape[1]

    @property
    def exact(self) -> bool:
        return _is_exact(self.c)

    @property
    def value(self) -> np.ndarray:
        return self.c[0]

    def coeff(self, a) -> np.ndarray:
        return self.c[self.basis.position[tuple(a)]]

    def partial(self, a) -> np.ndarray:
        """The mixed partial derivative d^a f at the centre (not divided by a!)."""
        scale = math.prod(math.factorial(k) for k in a)
        return self.coeff(a) * scale

    # arithmetic ----------------------------------------------------------

    def truncate(self, order: int) -> "Jet":
        if order == self.order:
            return self
        if order > self.order:
            raise ValueError("cannot raise the order of a jet")
        jb = basis(self.dim, order)
        return Jet(jb, self.c[: jb.ncoef])

    def _align(self, other: "Jet"):
        k = min(self.order, other.order)
        return self.truncate(k), other.truncate(k)

    def __add__(self, other):
        if isinstance(other, Jet):
            a, b = self._align(other)
            return Jet(a.basis, a.c + b.c)
        c = self.c.copy()
        c[0] = c[0] + other
        return Jet(self.basis, c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.basis, -self.c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            a, b = self._align(other)
            ti, tj, tk = a.basis.mul_table()
            return Jet(a.basis, backend.jet_mul(a.c, b.c, ti, tj, tk, a.basis.ncoef))
        return Jet(self.basis, self.c * other)

    __rmul__ = __mul__

    def scale_points(self, w) -> "Jet":
        """Multiply by a per-point scalar array (no derivative content)."""
        return Jet(self.basis, self.c * np.asarray(w)[None, :])

    def derivative(self, i: int) -> "Jet":
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        src, fac = self.basis.deriv_map(i)
        lower = basis(self.dim, self.order - 1)
        c = self.c[src] * (fac.astype(object) if self.exact else fac.astype(np.float64))[:, None]
        return Jet(lower, c)

    def mul_coord(self, i: int, xi) -> "Jet":
        """Multiply by the coordinate jet ``x_i`` (centre value ``xi``)."""
        c = self.c * np.asarray(xi)[None, :]
        dst, src = self.basis.shift_map(i)
        c[dst] = c[dst] + self.c[src]
        return Jet(self.basis, c)

    # univariate composition ----------------------------------------------

    def compose(self, derivs) -> "Jet":
        """``g(self)`` given ``derivs[m] = g^(m)(value)`` for m = 0..order."""
        k = self.order
        exact = self.exact
        h = Jet(self.basis, self.c.copy())
        h.c[0] = mpq(0) if exact else 0.0
        out = Jet.constant(derivs[k] * _unit_factorial(k, exact), self.dim, k, self.npts, exact)
        for m in range(k - 1, -1, -1):
            out = out * h
            out.c[0] = out.c[0] + derivs[m] * _unit_factorial(m, exact)
        return out

    def _numeric_only(self, what: str) -> None:
        if self.exact:
            raise TypeError(f"{what} is transcendental; not available for exact jets")

    def exp(self) -> "Jet":
        self._numeric_only("exp")
        e = np.exp(self.value)
        return self.compose([e] * (self.order + 1))

    def log(self) -> "Jet":
        self._numeric_only("log")
        u = self.value
        if np.any(u <= 0):
            raise ValueError("log of a nonpositive jet value")
        d = [np.log(u)]
        for m in range(1, self.order + 1):
            d.append(((-1) ** (m - 1)) * math.factorial(m - 1) / u**m)
        return self.compose(d)

    def pow(self, p) -> "Jet":
        """Real or integer power; non-integer powers need a positive base."""
        u = self.value
        ip = _as_int(p)
        integer = ip is not None
        if integer:
            p = ip
            if p >= 0 and self.order == 0:
                return Jet(self.basis, self.c**p)
            if p < 0 and np.any(u == 0):
                raise ZeroDivisionError("negative power of a jet with zero value")
        elif self.exact:
            raise ValueError("non-integer power is irrational; not available for exact jets")
        elif np.any(u <= 0):
            raise ValueError("non-integer power of a nonpositive jet value")
        d = []
        ff = 1
        for m in range(self.order + 1):
            if integer and p - m < 0 and p >= 0:
                d.append(u * 0)
            elif self.exact:
                d.append(ff * u ** (p - m))
            else:
                d.append(ff * np.power(u.astype(np.float64), float(p - m)))
            ff = ff * (p - m)
        return self.compose(d)

    def sqrt(self) -> "Jet":
        return self.pow(0.5)

    def cos(self) -> "Jet":
        self._numeric_only("cos")
        cu, su = np.cos(self.value), np.sin(self.value)
        cycle = [cu, -su, -cu, su]
        return self.compose([cycle[m % 4] for m in range(self.order + 1)])

    def sin(self) -> "Jet":
        self._numeric_only("sin")
        cu, su = np.cos(self.value), np.sin(self.value)
        cycle = [su, cu, -su, -cu]
        return self.compose([cycle[m % 4] for m in range(self.order + 1)])

    def cutoff(self) -> "Jet":
        """exp(-1/(1-u^2)) for |u| < 1 and identically 0 elsewhere."""
        self._numeric_only("the cutoff")
        inside = np.abs(self.value) < 1.0
        safe = Jet(self.basis, self.c.copy())
        safe.c[:, ~inside] = 0.0
        inner = 1.0 - safe * safe
        g = (-(inner.pow(-1))).exp()
        g.c[:, ~inside] = 0.0
        return g

    def conj(self) -> "Jet":
        return Jet(self.basis, np.conj(self.c))

    def __repr__(self) -> str:
        return f"Jet(dim={self.dim}, order={self.order}, npts={self.npts})"
