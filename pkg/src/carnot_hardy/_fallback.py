"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``.

Same arithmetic, same accumulation order, so results are bit-identical to
the extension. Object arrays (exact ``Fraction`` jets) always come here.
"""

from __future__ import annotations

import numpy as np


def jet_mul(a, b, ti, tj, tk, ncoef):
    if a.dtype == object or b.dtype == object:
        return _jet_mul_object(a, b, ti, tj, tk, ncoef)
    npts = a.shape[1]
    out = np.zeros((ncoef, npts), dtype=a.dtype)
    for i, j, k in zip(ti.tolist(), tj.tolist(), tk.tolist()):
        out[k] += a[i] * b[j]
    return out


def _jet_mul_object(a, b, ti, tj, tk, ncoef):
    # exact jets: plain Python lists per point avoid numpy object overhead
    npts = a.shape[1]
    out = np.empty((ncoef, npts), dtype=object)
    triples = list(zip(ti.tolist(), tj.tolist(), tk.tolist()))
    for p in range(npts):
        ac = a[:, p].tolist()
        bc = b[:, p].tolist()
        acc = [0] * ncoef
        for i, j, k in triples:
            acc[k] = acc[k] + ac[i] * bc[j]
        out[:, p] = acc
    return out


def neumaier_dot(w, g, s, comp):
    s = float(s)
    comp = float(comp)
    for wi, gi in zip(w.tolist(), g.tolist()):
        v = wi * gi
        t = s + v
        if abs(s) >= abs(v):
            comp += (s - t) + v
        else:
            comp += (v - t) + s
        s = t
    return s, comp
