"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

from hecketree import kernels
from hecketree.cubecx import boundary_matrix
from hecketree.reptheory import FiniteGroup, finite_quotient

CASES = [("U0", 2, 3), ("U0", 3, 2), ("IN", 2, 3)]


def _group_work(spec, m, p):
    G = finite_quotient(spec, m, p)
    H = FiniteGroup(G.name, G.M, G.elements, G.gens)
    H.class_constants  # table, inverses, classes, structure constants
    return H.order


def _snf_work(n):
    return len(kernels.snf_diagonal(boundary_matrix(n, n // 2)))


def bench(fn, *args, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled kernels are not built; only the python backend is available")
    jobs = [(f"group {s} m={m} p={p} (order {finite_quotient(s, m, p).order})", _group_work, (s, m, p)) for s, m, p in CASES]
    jobs += [(f"snf cube n={n}", _snf_work, (n,)) for n in (7, 8)]
    print(f"{'case':40s}" + "".join(f"{b:>12s}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))
    for name, fn, a in jobs:
        times = []
        for b in backends:
            kernels.use_backend(b)
            times.append(bench(fn, *a, repeat=args.repeat))
        row = f"{name:40s}" + "".join(f"{t:11.4f}s" for t in times)
        if len(times) == 2:
            row += f"{times[1] / times[0]:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
