"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5]

Times the three-sequence recursion (Prox-ITEM on lasso-sc) and the reference
prox-gradient solve for every importable backend, and checks that the
backends return bitwise-identical iterates.
"""

import argparse
import timeit

import numpy as np

from proxitem import kernels
from proxitem.problem import builtin_instance
from proxitem.solvers import run_method


def _cases(dim, horizon):
    inst = builtin_instance("lasso-sc", dim=dim)
    q = inst.quad
    lo, hi = q.g_spec.bounds(dim)
    code = kernels.G_CODES[q.g_spec.kind]
    x0 = 5.0 * np.random.default_rng(0).standard_normal(dim)

    def momentum(backend):
        return run_method(inst, "prox_item", x0, horizon, backend=backend)

    def solve(backend):
        return backend.pg_solve(q.diag, q.b, code, lo, hi, q.g_spec.lam, inst.params.L, x0, 1e-13, 10**6)

    return {"prox_item run": momentum, "pg_solve": solve}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--horizon", type=int, default=200)
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    print(f"backends: {', '.join(sorted(backends))} (default: {kernels.BACKEND})")
    print(f"{'case':<16} {'dim':>5} " + " ".join(f"{b:>12}" for b in sorted(backends)) + "   speedup  equal")
    for dim in (20, 200, 2000):
        for name, fn in _cases(dim, args.horizon).items():
            times, outs = {}, {}
            for b, mod in sorted(backends.items()):
                outs[b] = fn(mod)
                times[b] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
            if name == "pg_solve":
                equal = all(np.array_equal(o[0], outs["python"][0]) for o in outs.values())
            else:
                equal = all(
                    np.array_equal(a.z_k, b.z_k)
                    for o in outs.values()
                    for a, b in zip(o.records, outs["python"].records)
                )
            speed = times["python"] / times["cython"] if "cython" in times else float("nan")
            cells = " ".join(f"{times[b] * 1e3:10.2f}ms" for b in sorted(times))
            print(f"{name:<16} {dim:>5} {cells} {speed:8.1f}x  {equal}")


if __name__ == "__main__":
    main()
