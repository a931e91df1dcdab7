"""Compare the compiled kernels with the pure-Python fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat N]

Kernel timings call both implementations directly. The end-to-end quantile
fit picks its backend at import, so it runs in a subprocess per backend.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from spdradial import _purepy
from spdradial.radial import BoundaryDirection, whitened_radial_field
from spdradial.spectral import sqrt_pair

try:
    from spdradial import _kernels
except ImportError:
    _kernels = None

EPS = np.finfo(float).eps

FIT_SNIPPET = """
import time
from spdradial import BACKEND
from spdradial.dataio import synthetic_dataset
from spdradial.grid import preset_directions
from spdradial.quantiles import QuantileIndex, fit_frechet_median, fit_quantile
data = synthetic_dataset(100, 3, seed=0)
xi = preset_directions(data, fit_frechet_median(data).point)[0]
t0 = time.perf_counter()
for b in (0.2, 0.4, 0.6, 0.8, 0.98):
    fit_quantile(data, QuantileIndex(b, xi))
print(BACKEND, time.perf_counter() - t0)
"""


def _cases(rng):
    m = 3
    W = rng.normal(size=(m, m))
    B0, s = rng.normal(size=(m, m)), 50 * rng.normal(size=m)
    X = []
    for _ in range(100):
        Q = np.linalg.qr(rng.normal(size=(m, m)))[0]
        X.append((Q * np.exp(rng.normal(size=m))) @ Q.T)
    Z = rng.normal(size=(m, m))
    xi = BoundaryDirection.from_tangent(np.eye(m), Z + Z.T)
    Xmh = np.array([sqrt_pair(x)[1] for x in X])
    Xiw = np.array([whitened_radial_field(xi, x) for x in X])
    return {
        "mgs_reorth (3x3)": lambda k: k.mgs_reorth(W, 1e-12),
        "graded_log_svd (3x3)": lambda k: k.graded_log_svd(B0, s, 12 * EPS, 60),
        "quantile_terms (n=100, 3x3)": lambda k: k.quantile_terms(Xmh, Xiw, X[0], 0.6, 1e-9),
    }


def _per_call(fn, repeat):
    number = 200
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; only the fallback is available", file=sys.stderr)

    print(f"{'kernel':<30}{'compiled':>14}{'python':>14}{'speedup':>10}")
    for name, call in _cases(np.random.default_rng(0)).items():
        py = _per_call(lambda: call(_purepy), args.repeat)
        if _kernels is None:
            print(f"{name:<30}{'-':>14}{py * 1e6:>12.1f}us{'-':>10}")
            continue
        cc = _per_call(lambda: call(_kernels), args.repeat)
        print(f"{name:<30}{cc * 1e6:>12.1f}us{py * 1e6:>12.1f}us{py / cc:>9.1f}x")

    times = {}
    for pure in ("0", "1"):
        env = dict(os.environ, SPDRADIAL_PURE=pure)
        out = subprocess.run([sys.executable, "-c", FIT_SNIPPET], env=env, capture_output=True, text=True, check=True)
        backend, secs = out.stdout.split()
        times[backend] = float(secs)
    line = "  ".join(f"{k} {v:.2f} s" for k, v in times.items())
    if len(times) == 2:
        line += f"  speedup {times['python'] / times['compiled']:.1f}x"
    print(f"\nquantile fits (n=100, P3, 5 betas): {line}")


if __name__ == "__main__":
    main()
