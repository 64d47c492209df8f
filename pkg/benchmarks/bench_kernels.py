"""Compare the compiled bucket-contraction kernel against the numpy fallback.

Runs the same eliminations through both implementations in one process and
prints per-case timings plus the speedup. Usage:

    python benchmarks/bench_kernels.py [--reps 5] [--seed 0]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from beliefbounds import kernels
from beliefbounds.exact import eliminate
from beliefbounds.model import BayesianNetwork, Cpt, Variable


def random_layered_network(rng: np.random.Generator, n: int, card: int, fan_in: int):
    variables = tuple(Variable(i, f"x{i}", card) for i in range(n))
    cpts = []
    for i in range(n):
        k = min(i, fan_in)
        parents = tuple(
            sorted(rng.choice(i, size=k, replace=False).tolist())
        ) if k else ()
        shape = (card,) * k + (card,)
        table = rng.random(shape) + 0.05
        table /= table.sum(axis=-1, keepdims=True)
        cpts.append(Cpt(child=i, parents=parents, table=table))
    return BayesianNetwork(variables=variables, cpts=tuple(cpts))


def bench_case(bn, e, keep, reps):
    rows = {}
    for label, impl in (("pure", kernels.pure), ("compiled", kernels.compiled)):
        if impl is None:
            rows[label] = (None, None)
            continue
        out = eliminate(bn, e, keep, impl=impl)  # warm the plan cache
        best = min(
            _timed(lambda: eliminate(bn, e, keep, impl=impl)) for _ in range(reps)
        )
        rows[label] = (best, out)
    return rows


def _timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    cases = [
        ("n=14 card=2 fan=3", random_layered_network(rng, 14, 2, 3)),
        ("n=18 card=3 fan=3", random_layered_network(rng, 18, 3, 3)),
        ("n=22 card=2 fan=4", random_layered_network(rng, 22, 2, 4)),
        ("n=16 card=4 fan=3", random_layered_network(rng, 16, 4, 3)),
    ]
    if kernels.compiled is None:
        print("compiled kernel unavailable; showing pure timings only")
    print(f"{'case':<22} {'pure (ms)':>10} {'compiled (ms)':>14} {'speedup':>8}")
    for label, bn in cases:
        e = {bn.n - 1: 0, bn.n - 2: min(1, bn.cards[bn.n - 2] - 1)}
        rows = bench_case(bn, e, (0,), args.reps)
        t_pure, out_pure = rows["pure"]
        t_comp, out_comp = rows["compiled"]
        if t_comp is None:
            print(f"{label:<22} {t_pure * 1e3:>10.3f} {'-':>14} {'-':>8}")
            continue
        drift = float(np.max(np.abs(out_pure - out_comp)))
        assert drift < 1e-12, f"kernel mismatch: {drift}"
        print(
            f"{label:<22} {t_pure * 1e3:>10.3f} {t_comp * 1e3:>14.3f}"
            f" {t_pure / t_comp:>7.2f}x"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
