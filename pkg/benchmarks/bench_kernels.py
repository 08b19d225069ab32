"""Compare the numba and pure-numpy kernel implementations.

Usage: ``python benchmarks/bench_kernels.py [--repeat R] [--json]``.
Each kernel is run once for warm-up (this triggers numba compilation) and
then timed; outputs are checked for agreement before timing is reported.
"""

from __future__ import annotations

import argparse
import json
import timeit

import numpy as np

from mourrelab import _kernels
from mourrelab.models import constant_alpha, pinned_window


def cases():
    window, c0, c1 = pinned_window(800)
    alpha = constant_alpha(1.25).with_pins((c0, c1))
    k = window.extended(0, 1).indices()
    al = alpha(k)
    ainv = alpha.ainv(k)
    rng = np.random.default_rng(0)
    offsets = np.array([-3, -1, 0, 1, 2], dtype=np.int64)
    coeffs = rng.standard_normal((5, 2000)) + 1j * rng.standard_normal((5, 2000))
    return {
        "ggt_fill (N=800)": ("ggt_fill", (al, ainv, 1e-14)),
        "band_fill (dim=2000, 5 offsets)": ("band_fill", (offsets, coeffs)),
        "bernoulli_scan (L=100000)": ("bernoulli_scan", (2.0, 37, 100_000)),
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args(argv)
    if not _kernels.NUMBA_IMPL:
        print("numba unavailable; only the numpy path can be timed")
    rows = []
    for label, (name, inputs) in cases().items():
        row = {"kernel": label}
        outs = {}
        for impl_name, impl in (("numba", _kernels.NUMBA_IMPL), ("numpy", _kernels.NUMPY_IMPL)):
            if name not in impl:
                continue
            fn = impl[name]
            outs[impl_name] = fn(*inputs)
            t = min(timeit.repeat(lambda: fn(*inputs), number=1, repeat=args.repeat))
            row[f"{impl_name}_s"] = t
        if len(outs) == 2:
            a, b = outs["numba"], outs["numpy"]
            if isinstance(a, tuple):
                row["max_abs_diff"] = float(max(abs(x - y) for x, y in zip(a, b)))
            else:
                row["max_abs_diff"] = float(np.max(np.abs(a - b)))
            row["speedup"] = row["numpy_s"] / row["numba_s"]
        rows.append(row)
    if args.json:
        print(json.dumps(rows, indent=2))
    else:
        for r in rows:
            parts = [f"{k}={v:.3e}" if isinstance(v, float) else str(v) for k, v in r.items()]
            print("  ".join(parts))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
