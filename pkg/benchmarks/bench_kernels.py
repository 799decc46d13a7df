"""Times the fused training kernels: compiled extension vs NumPy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]

Both backends are exercised on the same inputs at a few representative
shapes; per shape the outputs are cross-checked to 1e-12 before timing, so
a speedup is never reported for kernels that disagree.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from softlabels.training import MicroModel, available_backends

SHAPES = [
    # (batch, dim, h1, h2, k)
    (16, 32, 64, 64, 10),
    (64, 32, 64, 64, 10),
    (256, 128, 128, 128, 10),
    (1024, 128, 256, 256, 10),
]


def _material(batch: int, dim: int, h1: int, h2: int, k: int):
    rng = np.random.default_rng(0)
    model = MicroModel.init(dim, h1, h2, k, seed=0)
    x = rng.uniform(0.0, 1.0, size=(batch, dim))
    targets = rng.dirichlet(np.ones(k), size=batch)
    return model, x, targets


def _check_agreement(backends: dict, model: MicroModel, x, targets) -> None:
    results = {
        name: mod.forward_backward(x, targets, *model.params())
        for name, mod in backends.items()
    }
    names = sorted(results)
    base = results[names[0]]
    for name in names[1:]:
        other = results[name]
        np.testing.assert_allclose(other[0], base[0], rtol=0.0, atol=1e-12)
        for a, b in zip(other[1:], base[1:]):
            np.testing.assert_allclose(a, b, rtol=0.0, atol=1e-12)


def _time(fn, repeats: int) -> float:
    fn()  # warm up
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=50)
    args = parser.parse_args()

    backends = available_backends()
    print(f"backends: {', '.join(sorted(backends))}")
    if len(backends) < 2:
        print("compiled extension not built; timing the fallback alone")

    header = f"{'shape (BxD->H1->H2->K)':>28} {'kernel':>18}"
    for name in sorted(backends):
        header += f" {name + ' (us)':>12}"
    if len(backends) > 1:
        header += f" {'speedup':>8}"
    print(header)

    for shape in SHAPES:
        batch, dim, h1, h2, k = shape
        model, x, targets = _material(*shape)
        _check_agreement(backends, model, x, targets)
        label = f"{batch}x{dim}->{h1}->{h2}->{k}"
        for kernel, call in [
            ("forward", lambda mod: mod.forward(x, *model.params())),
            (
                "forward_backward",
                lambda mod: mod.forward_backward(x, targets, *model.params()),
            ),
        ]:
            row = f"{label:>28} {kernel:>18}"
            times = {}
            for name in sorted(backends):
                mod = backends[name]
                times[name] = _time(lambda: call(mod), args.repeats)
                row += f" {times[name] * 1e6:>12.1f}"
            if len(times) > 1:
                row += f" {times['python'] / times['c']:>7.2f}x"
            print(row)


if __name__ == "__main__":
    main()
