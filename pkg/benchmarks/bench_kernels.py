"""Compare the compiled and fallback kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Times the jet product and compensated dot kernels on their own, then one
inequality evaluation end to end, and checks both backends agree bit for bit.
"""

import argparse
import timeit

import numpy as np

from carnot_hardy import backend
from carnot_hardy.fields import preset
from carnot_hardy.groups import heisenberg
from carnot_hardy.inequalities import build, default_spec, evaluate
from carnot_hardy.jets import basis


def cases():
    b = basis(5, 4)
    ti, tj, tk = b.mul_table()
    rng = np.random.default_rng(0)
    x = rng.standard_normal((b.ncoef, 4096))
    y = rng.standard_normal((b.ncoef, 4096))
    w = rng.random(200_000)
    g = rng.standard_normal(200_000)
    m = heisenberg(1)
    f = preset("complex", m, [1, 1])
    spec = default_spec(m, f, nodes=24)
    inst = build("heis_1", m, alpha=1, beta=0)
    return {
        "jet_mul dim5 order4 x4096": lambda: backend.jet_mul(x, y, ti, tj, tk, b.ncoef),
        "neumaier_dot 2e5": lambda: backend.neumaier_dot(w, g),
        "heis_1 deficit, H1, 24 nodes": lambda: evaluate(inst, f, spec).deficit,
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    names = ["fallback"] + (["compiled"] if backend.compiled_available() else [])
    work = cases()
    print(f"{'case':34s}" + "".join(f"{n:>14s}" for n in names) + (f"{'speedup':>10s}" if len(names) == 2 else ""))
    for label, fn in work.items():
        times, outs = [], []
        for n in names:
            backend.use_backend(n)
            outs.append(fn())
            times.append(min(timeit.repeat(fn, number=1, repeat=args.repeat)))
        row = f"{label:34s}" + "".join(f"{t * 1e3:12.2f}ms" for t in times)
        if len(names) == 2:
            same = np.array_equal(np.asarray(outs[0]), np.asarray(outs[1]))
            row += f"{times[0] / times[1]:9.1f}x" + ("" if same else "  MISMATCH")
        print(row)


if __name__ == "__main__":
    main()
