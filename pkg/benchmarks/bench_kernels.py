"""Benchmark the compiled table-gather kernel against the numpy fallback.

Both backends are imported directly, so one process measures both; the
package itself picks the compiled one at import time (set
``AUTOBSS_FORCE_FALLBACK=1`` to override that in normal use).

Usage:
    python benchmarks/bench_kernels.py [--rows 100000] [--repeats 20]
"""
import argparse
import time

import numpy as np

from autobss._core import _fallback, prepare_tables
from autobss.cost import CostModel
from autobss.space import preset_space

try:
    from autobss._core import _speedups
except ImportError:
    _speedups = None

FAMILIES = ("resnet18", "resnet50", "mobilenetv2", "efficientnet_b0")


def random_indices(space, rows, rng):
    idx = np.empty((rows, space.m), dtype=np.int64)
    for d, dim in enumerate(space.dims):
        idx[:, d] = rng.integers(len(dim.values), size=rows)
    return idx


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=100_000)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    print(f"{'family':<16} {'rows':>8} {'numpy':>10} {'compiled':>10} "
          f"{'speedup':>8}")
    for family in FAMILIES:
        space = preset_space(family)
        model = CostModel(space)
        base = model._base["flops"]
        prepared = model._gather["flops"]
        idx = random_indices(space, args.rows, rng)

        t_np = best_of(lambda: _fallback.gather_cost(base, prepared, idx),
                       args.repeats)
        if _speedups is None:
            print(f"{family:<16} {args.rows:>8} {t_np * 1e3:>9.2f}ms "
                  f"{'n/a':>10} {'n/a':>8}")
            continue
        t_c = best_of(lambda: _speedups.gather_cost(base, prepared, idx),
                      args.repeats)
        same = np.array_equal(
            _fallback.gather_cost(base, prepared, idx),
            _speedups.gather_cost(base, prepared, idx))
        assert same, f"backend outputs differ for {family}"
        print(f"{family:<16} {args.rows:>8} {t_np * 1e3:>9.2f}ms "
              f"{t_c * 1e3:>8.2f}ms {t_np / t_c:>7.1f}x")


if __name__ == "__main__":
    main()
