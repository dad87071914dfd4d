"""Concrete homogeneous-group models: Euclidean space with diagonal dilations
and the Heisenberg group.

Coordinates on the Heisenberg group H_n are ordered (x_1..x_n, y_1..y_n, t);
the first stratum is the leading 2n coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

RADIAL_THRESHOLD = 1e-9


def _frac(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(str(v))


@dataclass(frozen=True)
class DilationStructure:
    weights: tuple[Fraction, ...]

    def __post_init__(self):
        w = tuple(_frac(v) for v in self.weights)
        if not w:
            raise ValueError("at least one dilation weight is required")
        if any(v <= 0 for v in w):
            raise ValueError("dilation weights must be positive")
        object.__setattr__(self, "weights", w)

    @property
    def q_hom(self) -> Fraction:
        return sum(self.weights, Fraction(0))

    @property
    def dim(self) -> int:
        return len(self.weights)

    @property
    def isotropic(self) -> bool:
        return all(v == 1 for v in self.weights)


@dataclass(frozen=True)
class QuasiNormSpec:
    """``kind`` is "euclidean" or "anisotropic"; ``m`` only matters for the latter."""

    kind: str = "euclidean"
    m: int = 1

    def validate(self, d: DilationStructure) -> None:
        if self.kind == "euclidean":
            if not d.isotropic:
                raise ValueError("the Euclidean norm needs unit dilation weights")
        elif self.kind == "anisotropic":
            if self.m < 1:
                raise ValueError("m must be a positive integer")
            for v in d.weights:
                e = 2 * self.m / v
                if e.denominator != 1 or e.numerator % 2:
                    raise ValueError(f"2m/nu = {e} is not an even integer")
        else:
            raise ValueError(f"unknown quasi-norm kind {self.kind!r}")

    def exponents(self, d: DilationStructure) -> tuple[int, ...]:
        """Exponents 2m/nu_i (all 2 for the Euclidean norm)."""
        if self.kind == "euclidean":
            return (2,) * d.dim
        return tuple(int(2 * self.m / v) for v in d.weights)

    def power(self) -> int:
        return 2 if self.kind == "euclidean" else 2 * self.m


def smallest_anisotropic(d: DilationStructure) -> QuasiNormSpec:
    m = 1
    while True:
        try:
            spec = QuasiNormSpec("anisotropic", m)
            spec.validate(d)
            return spec
        except ValueError:
            m += 1


def dilate(d: DilationStructure, lam: float, x) -> np.ndarray:
    if not lam > 0:
        raise ValueError("dilation factor must be positive")
    x = np.asarray(x, dtype=float)
    w = np.array([float(v) for v in d.weights])
    return x * lam**w


def _norm_from(spec: QuasiNormSpec, d: DilationStructure, x: np.ndarray) -> np.ndarray:
    ex = spec.exponents(d)
    p = spec.power()
    s = sum(np.abs(x[..., i]) ** e for i, e in enumerate(ex))
    return s ** (1.0 / p)


@dataclass(frozen=True)
class GroupModel:
    variant: str
    n: int
    dilation: DilationStructure | None = None
    quasi: QuasiNormSpec = field(default_factory=QuasiNormSpec)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.variant == "euclidean":
            d = self.dilation or DilationStructure((Fraction(1),) * self.n)
            if d.dim != self.n:
                raise ValueError("dilation weights do not match the dimension")
            self.quasi.validate(d)
            object.__setattr__(self, "dilation", d)
        elif self.variant == "heisenberg":
            w = (Fraction(1),) * (2 * self.n) + (Fraction(2),)
            object.__setattr__(self, "dilation", DilationStructure(w))
            object.__setattr__(self, "quasi", QuasiNormSpec("heisenberg", 2))
        else:
            raise ValueError(f"unknown variant {self.variant!r}")

    @property
    def is_heisenberg(self) -> bool:
        return self.variant == "heisenberg"

    @property
    def ambient_dim(self) -> int:
        return 2 * self.n + 1 if self.is_heisenberg else self.n

    @property
    def N(self) -> int:
        return 2 * self.n if self.is_heisenberg else self.n

    @property
    def q_hom(self) -> Fraction:
        return self.dilation.q_hom

    @property
    def step(self) -> int:
        return 2 if self.is_heisenberg else 1

    @property
    def stratum(self) -> tuple[int, ...]:
        return tuple(range(self.N))

    @property
    def isotropic(self) -> bool:
        return self.variant == "euclidean" and self.quasi.kind == "euclidean"

    @property
    def label(self) -> str:
        if self.is_heisenberg:
            return f"heis:{self.n}"
        if self.isotropic:
            return f"euclid:{self.n}"
        return "aniso:" + ",".join(str(v) for v in self.dilation.weights)

    def quasi_norm(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.is_heisenberg:
            # Koranyi gauge (|x'|^4 + 16 t^2)^(1/4)
            r2 = np.sum(x[..., : self.N] ** 2, axis=-1)
            return (r2**2 + 16.0 * x[..., -1] ** 2) ** 0.25
        return _norm_from(self.quasi, self.dilation, x)

    def stratum_norm(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.sqrt(np.sum(x[..., : self.N] ** 2, axis=-1))

    def to_config(self) -> dict:
        return {
            "variant": self.variant,
            "weights": [f"{v.numerator}/{v.denominator}" for v in self.dilation.weights],
            "quasi_norm": {"kind": self.quasi.kind, "m": self.quasi.m},
            "n": self.n,
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "GroupModel":
        if cfg["variant"] == "heisenberg":
            return heisenberg(int(cfg["n"]))
        d = DilationStructure(tuple(Fraction(w) for w in cfg["weights"]))
        q = cfg.get("quasi_norm", {"kind": "euclidean", "m": 1})
        return cls("euclidean", d.dim, d, QuasiNormSpec(q["kind"], int(q.get("m", 1))))


def euclidean(n: int) -> GroupModel:
    return GroupModel("euclidean", n)


def anisotropic(weights, m: int | None = None) -> GroupModel:
    d = DilationStructure(tuple(_frac(w) for w in weights))
    q = smallest_anisotropic(d) if m is None else QuasiNormSpec("anisotropic", m)
    return GroupModel("euclidean", d.dim, d, q)


def heisenberg(n: int) -> GroupModel:
    return GroupModel("heisenberg", n)


def parse_model(text: str) -> GroupModel:
    """``euclid:3``, ``heis:1`` or ``aniso:1,2`` (dilation weights)."""
    kind, _, arg = text.partition(":")
    try:
        if kind == "euclid":
            return euclidean(int(arg))
        if kind == "heis":
            return heisenberg(int(arg))
        if kind == "aniso":
            return anisotropic([Fraction(w) for w in arg.split(",")])
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"bad model {text!r}: {exc}") from None
    raise ValueError(f"bad model {text!r}")


def quasi_norm(model, x) -> np.ndarray:
    """|x| for a GroupModel, or for a (DilationStructure, QuasiNormSpec) pair."""
    if isinstance(model, GroupModel):
        return model.quasi_norm(x)
    d, spec = model
    spec.validate(d)
    return _norm_from(spec, d, np.asarray(x, dtype=float))


def radial_derivative(model: GroupModel, f, x) -> complex:
    """Derivative of f along the dilation orbit through x, per unit of |x|."""
    if model.is_heisenberg:
        raise ValueError("the radial derivative is realized on Euclidean models only")
    x = np.asarray(x, dtype=float).reshape(1, -1)
    r = float(model.quasi_norm(x)[0])
    if r < RADIAL_THRESHOLD:
        raise ValueError("radial derivative requested too close to the origin")
    re, im = f.jet(x, 1)
    out = []
    for jet in (re, im):
        if jet is None:
            out.append(0.0)
            continue
        s = 0.0
        for i, v in enumerate(model.dilation.weights):
            e = [0] * model.ambient_dim
            e[i] = 1
            s += float(v) * x[0, i] * float(jet.coeff(e)[0])
        out.append(s / r)
    return complex(out[0], out[1])


@dataclass
class RatioEstimate:
    value: float
    err_estimate: float
    cartesian: float
    radial: float


def polar_consistency_ratio(model: GroupModel, h: Callable, support: tuple[float, float], quad) -> RatioEstimate:
    """Cartesian integral of h(|x|) over the radial integral of h(r) r^(Q-1).

    ``h`` is a vectorized profile vanishing outside ``support`` = (r_lo, r_hi);
    ``quad`` is a QuadratureSpec whose box is replaced by the smallest box
    containing the quasi-ball of radius r_hi.
    """
    from .quadrature import QuadratureSpec, gauss_legendre_1d, integrate_callable

    if model.is_heisenberg:
        raise ValueError("polar consistency is checked on Euclidean models")
    lo, hi = support
    box = [(-hi ** float(v), hi ** float(v)) for v in model.dilation.weights]
    spec = QuadratureSpec(box=box, nodes_per_axis=quad.nodes_per_axis, refinement_factor=quad.refinement_factor)
    q = float(model.q_hom)

    def cart(pts):
        return h(model.quasi_norm(pts))

    num = integrate_callable(cart, spec)

    def radial(p):
        t, w = gauss_legendre_1d(p, lo, hi)
        return math.fsum(w * h(t) * t ** (q - 1))

    den = radial(4 * quad.nodes_per_axis)
    value = num.value / den
    return RatioEstimate(value, num.err_estimate / abs(den), num.value, den)
