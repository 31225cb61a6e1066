"""Compare the numba kernels with their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5] [--quick]

Each kernel runs on the shapes that dominate a CRAMP run (K stacked k x k
covariances, the Box-M/Wald log-determinants, whitening, the max-type
two-sample statistic). Reported time is the best of ``repeat`` calls after
one warm-up call, so numba compile time is excluded. The last column is the
maximum absolute difference between the two backends' outputs.
"""
import argparse
import time

import numpy as np

from cramp import kernels
from cramp._backend import NUMBA_AVAILABLE, set_backend
from cramp.engine import CrampConfig, projected_pvalues, simulate_null


def _best(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _diff(a, b):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return max(float(np.max(np.abs(np.asarray(x, float) - np.asarray(y, float)))) for x, y in zip(a, b))


def cases(quick):
    rng = np.random.default_rng(0)
    K, n, k = (200, 20, 15) if quick else (1000, 20, 15)
    Y = rng.standard_normal((K, n, k))
    S = kernels.batched_cov_numpy(Y)
    A = rng.standard_normal((K, k, 3 * k))
    M = A @ np.swapaxes(A, 1, 2)
    p = 300 if quick else 2000
    X1, X2 = rng.standard_normal((20, p)), rng.standard_normal((20, p))
    return [
        (f"batched_cov     K={K} n={n} k={k}", lambda: kernels.batched_cov(Y)),
        (f"batched_logdet  K={K} k={k}", lambda: kernels.batched_logdet(S)),
        (f"batched_inv_sqrt K={K} k={k}", lambda: kernels.batched_inv_sqrt(M)),
        (f"batched_whiten  K={K} k={k}", lambda: kernels.batched_whiten(S, M)),
        (f"clx_max         n=m=20 p={p}", lambda: kernels.clx_max(X1, X2)),
    ]


def pipeline_cases(quick):
    rng = np.random.default_rng(1)
    p = 500 if quick else 2000
    K = 100 if quick else 1000
    X, Y = rng.standard_normal((20, p)), rng.standard_normal((20, p))
    cfg = CrampConfig(k=15, K=K, n_null=100, base="box-m", threads=1, cache=False)
    return [
        (f"observed p-values  K={K} p={p}", lambda: projected_pvalues(X, Y, cfg)),
        (f"null, 100 reps     K={K} p={p}", lambda: simulate_null(20, p, cfg, m=20)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true", help="smaller shapes")
    ap.add_argument("--no-pipeline", action="store_true", help="skip end-to-end timings")
    args = ap.parse_args()
    if not NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed; nothing to compare")

    print(f"{'kernel':40s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s} {'max |diff|':>11s}")
    groups = [cases(args.quick)]
    if not args.no_pipeline:
        groups.append(pipeline_cases(args.quick))
    for group in groups:
        for name, fn in group:
            set_backend("numpy")
            t_np, out_np = _best(fn, args.repeat), fn()
            set_backend("numba")
            t_nb, out_nb = _best(fn, args.repeat), fn()
            print(f"{name:40s} {1e3 * t_np:11.2f} {1e3 * t_nb:11.2f} {t_np / t_nb:8.2f} "
                  f"{_diff(out_np, out_nb):11.2e}")
    set_backend("numba")


if __name__ == "__main__":
    main()
