"""Compare the compiled and pure-NumPy basis kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Times the univariate recurrence table and the fused tensor-product design
assembly on problem sizes typical of the shipped experiments, checks that
both backends return identical arrays, and prints a table of best-of-N
times and speedups.
"""

import argparse
import time

import numpy as np

from pc2 import _kernels_py
from pc2.basis import _jacobi_offdiag, total_degree_index_set

try:
    from pc2 import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

CASES = [
    # (label, dims, degree, points, derivative order)
    ("heat p=8, 2000 pts, d2", 3, 8, 2000, 2),
    ("heat p=10, 5000 pts, d2", 3, 10, 5000, 2),
    ("burgers p=16, 2000 pts, d2", 2, 16, 2000, 2),
    ("beam p=4 r=7, 1000 pts, d2", 8, 4, 1000, 2),
]


def best_of(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def run(repeat):
    rng = np.random.default_rng(0)
    rows = []
    for label, dims, degree, n, order in CASES:
        idx = total_degree_index_set(dims, degree).array
        x = rng.uniform(-1, 1, (dims, n))
        b = _jacobi_offdiag("legendre", degree)
        orders = np.zeros(dims, dtype=np.int64)
        orders[0] = order
        for name, mod in (("python", _kernels_py), ("cython", compiled)):
            if mod is None:
                continue

            def tables(mod=mod):
                return np.stack([mod.recurrence_table(np.ascontiguousarray(x[d]), b, degree, order)
                                 for d in range(dims)])

            t_tab, tab = best_of(tables, repeat)
            t_des, des = best_of(lambda mod=mod: mod.tensor_design(tab, idx, orders, 1.0), repeat)
            rows.append((label, name, len(idx), t_tab, t_des, tab, des))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rows = run(args.repeat)
    if compiled is None:
        print("compiled extension not available; pure-Python timings only")
    print(f"{'case':<30} {'backend':<8} {'P':>5} {'table ms':>10} {'design ms':>10} {'speedup':>8}")
    ref = {}
    for label, name, P, t_tab, t_des, tab, des in rows:
        if name == "python":
            ref[label] = (t_tab + t_des, tab, des)
            speed = ""
        else:
            t_py, tab_py, des_py = ref[label]
            assert np.array_equal(tab, tab_py) and np.array_equal(des, des_py), "backends disagree"
            speed = f"{t_py / (t_tab + t_des):.1f}x"
        print(f"{label:<30} {name:<8} {P:>5} {1e3 * t_tab:>10.2f} {1e3 * t_des:>10.2f} {speed:>8}")


if __name__ == "__main__":
    main()
