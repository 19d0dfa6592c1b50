#!/usr/bin/env python3
"""Time the compiled kernels against the pure-numpy fallback.

Workloads are shaped like real training traffic (batch x attributes x
channels as the thyroid-class configs produce), plus one short
end-to-end fit per backend. Run from the repository root:

    python3 benchmarks/bench_backends.py [--repeats 7]

The fused loops (softmax forward/backward, LeakyReLU, Adam) are where
the native build can win; large matrix multiplies land in the same BLAS
either way, so parity there is the expected result, not a failure.
"""

import argparse
import sys
import time
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO_ROOT / "src"))

import numpy as np  # noqa: E402

from tabdisent import kernels  # noqa: E402
from tabdisent.model import ModelConfig, fit  # noqa: E402


def best_of(repeats, fn):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def workloads(rng):
    b, m, c = 512, 6, 128
    x3 = rng.standard_normal((b, m, c))
    w = rng.standard_normal((c, c))
    maps = rng.standard_normal((b, m, m))
    soft = kernels.softmax_lastdim(maps)
    grad = rng.standard_normal((b, m, m))
    big = rng.standard_normal((2048, 512))
    big_w = rng.standard_normal((512, 512))
    p = rng.standard_normal((c, c))
    g = rng.standard_normal((c, c))
    mom = np.zeros((c, c))
    vel = np.zeros((c, c))

    def adam():
        kernels.adam_update(p.copy(), g, mom.copy(), vel.copy(), 1e-4, 0.9, 0.999, 1e-8, 3)

    return [
        ("matmul (512,6,128)x(128,128)", lambda: kernels.matmul(x3, w)),
        ("matmul big (2048,512)x(512,512)", lambda: kernels.matmul(big, big_w)),
        ("matmul q.k^T (512,6,128)", lambda: kernels.matmul(x3, x3, transpose_b=True)),
        ("softmax fwd (512,6,6)", lambda: kernels.softmax_lastdim(maps)),
        ("softmax bwd (512,6,6)", lambda: kernels.softmax_lastdim_backward(soft, grad)),
        ("leaky fwd (512,6,128)", lambda: kernels.leaky_relu(x3, 0.01)),
        ("leaky bwd (512,6,128)", lambda: kernels.leaky_relu_backward(x3, x3, 0.01)),
        ("adam step 128x128", adam),
    ]


def short_fit():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((512, 6))
    cfg = ModelConfig(
        num_attributes=6, latent_channels=128, epochs=3, batch_size=128,
        learning_rate=1e-4, seed=0,
    )
    fit(cfg, x)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=7, help="best-of repeat count")
    args = parser.parse_args()

    backends = kernels.available_backends()
    print(f"backends available: {', '.join(backends)}")
    if "native" not in backends:
        print("native extension not built; timing the numpy fallback only")

    rows = []
    for backend in backends:
        kernels.use_backend(backend)
        rng = np.random.default_rng(42)
        for name, fn in workloads(rng):
            fn()  # warm up
            rows.append((name, backend, best_of(args.repeats, fn)))
        rows.append(("fit 3 epochs thyroid-shaped", backend, best_of(3, short_fit)))

    by_name = {}
    for name, backend, t in rows:
        by_name.setdefault(name, {})[backend] = t

    width = max(len(n) for n in by_name)
    header = f"{'workload':<{width}}  " + "".join(f"{b:>12}" for b in backends)
    if len(backends) > 1:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, times in by_name.items():
        line = f"{name:<{width}}  " + "".join(f"{times[b] * 1e3:>10.3f}ms" for b in backends)
        if len(backends) > 1:
            line += f"{times['numpy'] / times['native']:>9.2f}x"
        print(line)
    kernels.use_backend(backends[-1])


if __name__ == "__main__":
    main()
