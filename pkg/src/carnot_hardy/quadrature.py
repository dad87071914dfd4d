"""Tensor Gauss-Legendre quadrature with node-doubling error estimates.

Two layouts share one accumulator:

* Cartesian: a box, ``nodes_per_axis`` nodes on every axis.
* Polar over the first stratum: a radial variable (r, log r or log log r),
  hyperspherical angles, then the remaining coordinates on a box. Radial
  and box axes get ``nodes_per_axis`` Gauss-Legendre nodes. Polar angles
  are integrated in c = cos(theta) with the Gauss-Jacobi rule for the
  weight (1-c^2)^((k-1)/2) coming from sin^k(theta); the azimuth uses the
  periodic trapezoid rule. Both are exact on low-degree angular
  polynomials, so radial fields need very few angular nodes.

Nodes are visited in lexicographic order (last axis fastest) in fixed-size
chunks. Each chunk may be evaluated on a worker thread; sums are reduced in
chunk order with Neumaier compensation, so results do not depend on the
number of workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import roots_jacobi

from . import backend

CHUNK = 16384


class QuadratureError(RuntimeError):
    """Integration box misses the support, or the error estimate is over the cap."""


class ErrorCapExceeded(QuadratureError):
    pass


@dataclass(frozen=True)
class PolarLayout:
    stratum_dim: int
    radial: tuple[float, float]
    radial_map: str = "log"
    angular_nodes: int = 8
    rest: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.radial_map not in ("linear", "log", "loglog"):
            raise ValueError(f"unknown radial map {self.radial_map!r}")
        lo, hi = self.radial
        if not 0 <= lo < hi:
            raise ValueError("radial range must satisfy 0 <= lo < hi")
        if self.radial_map == "log" and lo <= 0:
            raise ValueError("the log radial map needs a positive inner radius")
        if self.radial_map == "loglog" and lo <= 1:
            raise ValueError("the loglog radial map needs an inner radius above 1")
        if self.stratum_dim < 2:
            raise ValueError("polar layout needs a stratum of dimension >= 2")


@dataclass(frozen=True)
class QuadratureSpec:
    box: tuple[tuple[float, float], ...] | None = None
    nodes_per_axis: int = 32
    refinement_factor: int = 2
    polar: PolarLayout | None = None
    err_cap: float | None = None

    def __post_init__(self):
        if self.nodes_per_axis < 4:
            raise ValueError("nodes_per_axis must be >= 4")
        if self.refinement_factor < 2:
            raise ValueError("refinement_factor must be >= 2")
        if (self.box is None) == (self.polar is None):
            raise ValueError("give exactly one of box or polar")
        if self.box is not None:
            object.__setattr__(self, "box", tuple((float(a), float(b)) for a, b in self.box))

    @property
    def dim(self) -> int:
        if self.box is not None:
            return len(self.box)
        return self.polar.stratum_dim + len(self.polar.rest)

    def to_dict(self) -> dict:
        out = {
            "nodes_per_axis": self.nodes_per_axis,
            "refinement_factor": self.refinement_factor,
        }
        if self.box is not None:
            out["box"] = [list(b) for b in self.box]
        else:
            p = self.polar
            out["polar"] = {
                "stratum_dim": p.stratum_dim,
                "radial": list(p.radial),
                "radial_map": p.radial_map,
                "angular_nodes": p.angular_nodes,
                "rest": [list(b) for b in p.rest],
            }
        return out

    def contains(self, support_box, annulus=None) -> bool:
        """True if the layout covers a field's support."""
        tol = 1e-12
        if self.box is not None:
            if support_box is None:
                return False
            return all(a <= lo + tol and hi <= b + tol for (a, b), (lo, hi) in zip(self.box, support_box))
        p = self.polar
        if annulus is None or support_box is None:
            return False
        if not (p.radial[0] <= annulus[0] * (1 + tol) and annulus[1] <= p.radial[1] * (1 + tol)):
            return False
        rest = support_box[p.stratum_dim:]
        return all(a <= lo + tol and hi <= b + tol for (a, b), (lo, hi) in zip(p.rest, rest))


@dataclass
class IntegralResult:
    value: np.ndarray | complex | float
    err_estimate: np.ndarray | float
    nodes_used: tuple[int, int]
    fine_value: np.ndarray | complex | float = field(default=0.0, repr=False)

    def to_dict(self) -> dict:
        return {"value": _jsonable(self.value), "err_estimate": _jsonable(self.err_estimate),
                "nodes_used": list(self.nodes_used)}


def _jsonable(v):
    v = np.asarray(v)
    if np.iscomplexobj(v):
        if v.ndim == 0:
            return {"re": float(v.real), "im": float(v.imag)}
        return [{"re": float(z.real), "im": float(z.imag)} for z in v]
    return float(v) if v.ndim == 0 else [float(z) for z in v]


@lru_cache(maxsize=None)
def _leggauss(p: int):
    x, w = np.polynomial.legendre.leggauss(p)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=None)
def _polar_angle_rule(p: int, k: int):
    """Nodes c = cos(theta) and weights for the integral of g(theta) sin^k(theta) over [0, pi]."""
    a = 0.5 * (k - 1)
    if a == 0:
        c, w = _leggauss(p)
    else:
        c, w = roots_jacobi(p, a, a)
    return np.asarray(c), np.asarray(w)


@lru_cache(maxsize=None)
def _azimuth_rule(p: int):
    phi = 2.0 * math.pi * (np.arange(p) + 0.5) / p
    return phi, np.full(p, 2.0 * math.pi / p)


def gauss_legendre_1d(p: int, lo: float, hi: float):
    x, w = _leggauss(p)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


class _Rule:
    """Tensor rule at one resolution, with a point/weight generator per chunk."""

    def __init__(self, spec: QuadratureSpec, level: int):
        mult = spec.refinement_factor**level
        p = spec.nodes_per_axis * mult
        self.spec = spec
        axes = []
        if spec.box is not None:
            for lo, hi in spec.box:
                axes.append(gauss_legendre_1d(p, lo, hi))
        else:
            pl = spec.polar
            lo, hi = pl.radial
            if pl.radial_map == "linear":
                axes.append(gauss_legendre_1d(p, lo, hi))
            elif pl.radial_map == "log":
                axes.append(gauss_legendre_1d(p, math.log(lo), math.log(hi)))
            else:
                axes.append(gauss_legendre_1d(p, math.log(math.log(lo)), math.log(math.log(hi))))
            a = pl.angular_nodes * mult
            N = pl.stratum_dim
            for k in range(N - 2):
                axes.append(_polar_angle_rule(a, N - 2 - k))
            axes.append(_azimuth_rule(a))
            for lo_, hi_ in pl.rest:
                axes.append(gauss_legendre_1d(p, lo_, hi_))
        self.axes = axes
        self.shape = tuple(len(x) for x, _ in axes)
        self.size = int(np.prod(self.shape))

    def chunk(self, start: int, stop: int):
        idx = np.unravel_index(np.arange(start, stop), self.shape)
        nodes = [self.axes[k][0][i] for k, i in enumerate(idx)]
        w = np.ones(stop - start)
        for k, i in enumerate(idx):
            w = w * self.axes[k][1][i]
        if self.spec.box is not None:
            return np.stack(nodes, axis=1), w
        pl = self.spec.polar
        v = nodes[0]
        N = pl.stratum_dim
        if pl.radial_map == "linear":
            r = v
            jac = r ** (N - 1)
        elif pl.radial_map == "log":
            r = np.exp(v)
            jac = r**N
        else:
            L = np.exp(v)
            r = np.exp(L)
            jac = r**N * L
        ang = nodes[1:N]
        pts = np.empty((stop - start, N + len(pl.rest)))
        s = r.copy()
        for k in range(N - 2):
            c = ang[k]
            pts[:, k] = s * c
            s = s * np.sqrt(1.0 - c * c)
        phi = ang[N - 2]
        pts[:, N - 2] = s * np.cos(phi)
        pts[:, N - 1] = s * np.sin(phi)
        for k in range(len(pl.rest)):
            pts[:, N + k] = nodes[N + k]
        return pts, w * jac


def worker_count() -> int:
    env = os.environ.get("CARNOT_HARDY_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _as_columns(vals: np.ndarray) -> tuple[np.ndarray, bool, tuple]:
    vals = np.asarray(vals)
    shape = vals.shape[1:]
    flat = vals.reshape(vals.shape[0], -1)
    if np.iscomplexobj(flat):
        return np.concatenate([flat.real, flat.imag], axis=1), True, shape
    return flat.astype(np.float64, copy=False), False, shape


def _integrate_level(g: Callable, rule: _Rule, chunk: int, workers: int):
    bounds = [(a, min(a + chunk, rule.size)) for a in range(0, rule.size, chunk)]
    acc_s = acc_c = None
    info = None

    def work(b):
        pts, w = rule.chunk(*b)
        return w, _as_columns(g(pts))

    def reduce(w, cols):
        nonlocal acc_s, acc_c, info
        arr, cplx, shape = cols
        if acc_s is None:
            acc_s = np.zeros(arr.shape[1])
            acc_c = np.zeros(arr.shape[1])
            info = (cplx, shape)
        for k in range(arr.shape[1]):
            acc_s[k], acc_c[k] = backend.neumaier_dot(w, arr[:, k], acc_s[k], acc_c[k])

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for w, cols in pool.map(work, bounds):
                reduce(w, cols)
    else:
        for b in bounds:
            reduce(*work(b))
    total = acc_s + acc_c
    cplx, shape = info
    if cplx:
        half = total.shape[0] // 2
        total = total[:half] + 1j * total[half:]
    total = total.reshape(shape)
    return total if shape else total[()]


def integrate(g: Callable, spec: QuadratureSpec, support_box=None, annulus=None,
              chunk: int = CHUNK, workers: int | None = None) -> IntegralResult:
    """Integrate g (points -> values, possibly vector- or complex-valued).

    When ``support_box`` is given ``spec.box`` must cover it. The reported value
    is the coarse one; err_estimate is its distance to the refined value.
    """
    if support_box is not None and not spec.contains(support_box, annulus):
        raise QuadratureError("integration region does not contain the support")
    workers = worker_count() if workers is None else workers
    coarse = _Rule(spec, 0)
    fine = _Rule(spec, 1)
    v0 = _integrate_level(g, coarse, chunk, workers)
    v1 = _integrate_level(g, fine, chunk, workers)
    err = np.abs(np.asarray(v0) - np.asarray(v1))
    err = err if np.ndim(err) else float(err)
    res = IntegralResult(v0, err, (coarse.size, fine.size), v1)
    if spec.err_cap is not None and np.max(err) > spec.err_cap:
        raise ErrorCapExceeded(f"quadrature error estimate {np.max(err):.3e} exceeds cap {spec.err_cap:.3e}")
    return res


def integrate_callable(g: Callable, spec: QuadratureSpec) -> IntegralResult:
    return integrate(g, spec)


# ----------------------------------------------------------------------------
# spec construction for fields


def spec_for_field(f, nodes: int = 32, angular_nodes: int = 8, coords: str = "polar",
                   radial_map: str = "log", refinement_factor: int = 2, err_cap=None) -> QuadratureSpec:
    """A layout covering the support of ``f`` (or of several fields)."""
    fs = f if isinstance(f, (list, tuple)) else [f]
    boxes = [g.support_box for g in fs]
    if any(b is None for b in boxes):
        raise QuadratureError("field is not compactly supported")
    box = [(min(b[i][0] for b in boxes), max(b[i][1] for b in boxes)) for i in range(len(boxes[0]))]
    if coords == "cartesian":
        return QuadratureSpec(box=tuple(box), nodes_per_axis=nodes, refinement_factor=refinement_factor,
                              err_cap=err_cap)
    anns = [g.support.annulus for g in fs]
    if any(a is None for a in anns):
        raise QuadratureError("polar layout needs a field supported in a stratum annulus")
    lo = min(a[0] for a in anns)
    hi = max(a[1] for a in anns)
    N = len(fs[0].stratum)
    rest = tuple(box[N:])
    pl = PolarLayout(N, (lo, hi), radial_map, angular_nodes, rest)
    return QuadratureSpec(polar=pl, nodes_per_axis=nodes, refinement_factor=refinement_factor, err_cap=err_cap)


def _field_values(obj, pts):
    if hasattr(obj, "evaluate"):
        return obj.evaluate(pts)
    return obj.value(pts)


def _base_field(obj):
    return getattr(obj, "field", obj)


def _weight(pts, k: int, stratum: bool, N: int):
    if k == 0:
        return 1.0
    x = pts[:, :N] if stratum else pts
    r2 = np.sum(x**2, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(r2 > 0, r2**k, 0.0)


def _check_margin(f, k):
    base = _base_field(f)
    if k < 0 and base.stratum_margin <= 0:
        raise QuadratureError("negative weight powers need a positive stratum margin")


def weighted_l2_sq(f, k: int, spec: QuadratureSpec, stratum: bool = True) -> IntegralResult:
    """Integral of |f|^2 |x'|^(2k) (|x| instead of |x'| when stratum is False)."""
    _check_margin(f, k)
    base = _base_field(f)
    N = len(base.stratum)

    def g(pts):
        v = _field_values(f, pts)
        return np.abs(v) ** 2 * _weight(pts, k, stratum, N)

    return integrate(g, spec, base.support_box, base.support.annulus)


def weighted_inner(f, g, k: int, spec: QuadratureSpec, stratum: bool = True) -> IntegralResult:
    """Integral of f conj(g) |x'|^(2k)."""
    _check_margin(f, k)
    _check_margin(g, k)
    bf, bg = _base_field(f), _base_field(g)
    N = len(bf.stratum)

    def h(pts):
        a = _field_values(f, pts)
        b = _field_values(g, pts)
        return a * np.conj(b) * _weight(pts, k, stratum, N)

    return integrate(h, spec, bf.support_box, bf.support.annulus)
