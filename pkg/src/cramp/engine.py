"""Random-projection meta-test: project K times, average the p-values and
compare the average with an empirically simulated critical value.

Seeds
-----
A master seed feeds three disjoint families of streams: projections of the
observed data (one stream per projection index), null datasets and null
projections (one stream each per null replicate). Work is split into
fixed-size chunks independent of the worker count and gathered in index
order, so every reduction sees the same numbers whatever ``threads`` is.

Null simulation routes
----------------------
``direct``   draws N(0, I_p) data and K full k x p projections per replicate.
``reduced``  draws the same joint law without touching p-dimensional
             vectors: for stacked Gaussian data Z (N x p, p >= N) write
             Z^T = Q T; then Z R^T = T^T (R Q)^T, T^T is a Bartlett factor
             of Wishart_N(p, I), and R Q has the law of
             (A A^T + W)^{-1/2} A with A a k x N Gaussian and
             W ~ Wishart_k(p - N, I), independently for every projection.
``printed``  regenerates data for every projection, so each projected
             dataset is plain N(0, I_k); kept for comparison.
"""
import hashlib
import json
import logging
import os
import pathlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from . import kernels
from .classical import ONE_SAMPLE_BASES, TWO_SAMPLE_BASES, base_hypothesis, stacked_pvalues
from .errors import ConfigError, DimensionError
from .linalg import RngStream, as_dataset
from .projections import generate_projections, project_many

log = logging.getLogger(__name__)

FAMILY_OBSERVED = 1
FAMILY_NULL_DATA = 2
FAMILY_NULL_PROJ = 3

PROJ_CHUNK = 50
NULL_CHUNK = 4
CACHE_VERSION = 2

HYPOTHESES = ("one-sample-identity", "one-sample-sphericity", "two-sample")
NULL_ROUTES = ("auto", "reduced", "direct", "printed")


def default_threads():
    env = os.environ.get("CRAMP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"CRAMP_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


@dataclass(frozen=True)
class CrampConfig:
    k: int = 5
    K: int = 100
    n_null: int = 1000
    alpha: float = 0.05
    seed: int = 0
    base: str = "lrt-identity"
    null_seed: Optional[int] = None
    hypothesis: Optional[str] = None
    null_route: str = "auto"
    threads: Optional[int] = None
    cache: bool = True
    cache_dir: Optional[str] = None

    def __post_init__(self):
        if self.base not in ONE_SAMPLE_BASES and self.base not in TWO_SAMPLE_BASES:
            raise ConfigError(f"unknown base test {self.base!r}")
        hyp = base_hypothesis(self.base)
        if self.hypothesis is None:
            object.__setattr__(self, "hypothesis", hyp)
        elif self.hypothesis not in HYPOTHESES:
            raise ConfigError(f"unknown hypothesis {self.hypothesis!r}")
        elif (self.hypothesis == "two-sample") != (hyp == "two-sample"):
            raise ConfigError(f"base test {self.base!r} cannot test {self.hypothesis!r}")
        if self.seed < 0 or (self.null_seed is not None and self.null_seed < 0):
            raise ConfigError("seeds must be non-negative integers")
        if self.k < 1:
            raise ConfigError("projection dimension k must be >= 1")
        if self.K < 1:
            raise ConfigError("number of projections K must be >= 1")
        if self.n_null < 100:
            raise ConfigError("n_null must be >= 100 for a usable quantile")
        if not 0 < self.alpha <= 1:
            raise ConfigError("alpha must lie in (0, 1]")
        if self.null_route not in NULL_ROUTES:
            raise ConfigError(f"unknown null route {self.null_route!r}")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1")

    @property
    def two_sample(self):
        return self.hypothesis == "two-sample"

    @property
    def effective_null_seed(self):
        """Seed of the null simulation; defaults to the master seed."""
        return self.seed if self.null_seed is None else self.null_seed

    def with_(self, **kw):
        return replace(self, **kw)

    def to_dict(self):
        return asdict(self)


@dataclass
class CrampOutcome:
    mean_p: float
    per_projection_p: np.ndarray
    critical_value: float
    reject: bool
    null_sample: Optional[np.ndarray] = field(default=None, repr=False)
    config: Optional[CrampConfig] = None

    def to_dict(self, include_null=False):
        out = {
            "mean_p": self.mean_p,
            "critical_value": self.critical_value,
            "reject": self.reject,
            "per_projection_p": [float(v) for v in self.per_projection_p],
        }
        if include_null and self.null_sample is not None:
            out["null_sample"] = [float(v) for v in self.null_sample]
        if self.config is not None:
            out["config"] = self.config.to_dict()
        return out


# ------------------------------------------------------------------ helpers


def _check_dims(cfg, n, p, m=None):
    if cfg.two_sample and m is None:
        raise ConfigError(f"base {cfg.base!r} needs two samples")
    if not cfg.two_sample and m is not None:
        raise ConfigError(f"base {cfg.base!r} is a one-sample test")
    smallest = n if m is None else min(n, m)
    if cfg.k >= smallest:
        raise DimensionError(f"projection dimension k={cfg.k} must be below the sample size {smallest}")
    if cfg.k > p:
        raise DimensionError(f"projection dimension k={cfg.k} exceeds p={p}")


def _run_chunks(fn, chunks, threads):
    threads = default_threads() if threads is None else threads
    if threads <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, chunks))


def _chunks(total, size):
    return [range(s, min(total, s + size)) for s in range(0, total, size)]


def _pvalues_from_projected(cfg, Yx, n, Yy=None, m=None):
    S1 = kernels.batched_cov(Yx)
    S2 = None if Yy is None else kernels.batched_cov(Yy)
    return stacked_pvalues(cfg.base, S1, n, S2, m)


# --------------------------------------------------------- observed p-values


def projected_pvalues(data, data2=None, cfg=None):
    """p-values of the base test on K projections of the observed data.

    In the two-sample case the same projection is applied to both groups.
    """
    cfg = cfg or CrampConfig()
    X = as_dataset(data, name="data")
    Y = None if data2 is None else as_dataset(data2, name="data2")
    if Y is not None and Y.shape[1] != X.shape[1]:
        raise DimensionError(f"groups have different dimensions ({X.shape[1]} vs {Y.shape[1]})")
    n, p = X.shape
    m = None if Y is None else Y.shape[0]
    _check_dims(cfg, n, p, m)

    def work(idx):
        streams = [RngStream(cfg.seed, FAMILY_OBSERVED, i) for i in idx]
        R = generate_projections(cfg.k, p, streams)
        Yx = project_many(R, X)
        Yy = None if Y is None else project_many(R, Y)
        return _pvalues_from_projected(cfg, Yx, n, Yy, m)

    parts = _run_chunks(work, _chunks(cfg.K, PROJ_CHUNK), cfg.threads)
    return np.concatenate(parts)


# ------------------------------------------------------------ null samples


def _wishart(gen, k, df, size):
    """``size`` draws of Wishart_k(df, I); df may be below k (then singular)."""
    if df == 0:
        return np.zeros((size, k, k))
    if df < k:
        H = gen.standard_normal((size, k, df))
        return np.matmul(H, np.swapaxes(H, 1, 2))
    C = np.zeros((size, k, k))
    rows, cols = np.tril_indices(k, -1)
    C[:, rows, cols] = gen.standard_normal((size, rows.size))
    diag = np.sqrt(gen.chisquare(df - np.arange(k), size=(size, k)))
    C[:, np.arange(k), np.arange(k)] = diag
    return np.matmul(C, np.swapaxes(C, 1, 2))


def _bartlett_factor(gen, N, df):
    """Lower-triangular L with L L^T ~ Wishart_N(df, I), df >= N."""
    L = np.zeros((N, N))
    rows, cols = np.tril_indices(N, -1)
    L[rows, cols] = gen.standard_normal(rows.size)
    L[np.arange(N), np.arange(N)] = np.sqrt(gen.chisquare(df - np.arange(N)))
    return L


AFFINE_INVARIANT_BASES = ("box-m", "wald")


def _null_covs_reduced(cfg, n, m, p, r):
    """Projected covariance stacks of null replicate ``r`` without forming R.

    Every base test is invariant under orthogonal changes of basis of the
    projected space, so B = chol(A A^T + W)^{-1} A stands in for the
    symmetric square-root form. Box-M and Wald are invariant under any
    invertible map of that space, so for them whitening (and W) drops out.
    """
    N = n if m is None else n + m
    K, k = cfg.K, cfg.k
    dgen = RngStream(cfg.effective_null_seed, FAMILY_NULL_DATA, r).generator()
    pgen = RngStream(cfg.effective_null_seed, FAMILY_NULL_PROJ, r).generator()
    L = _bartlett_factor(dgen, N, p)
    A = pgen.standard_normal((K, k, N))
    At = A.reshape(K * k, N).T

    def block_cov(rows):
        D = L[rows] - L[rows].mean(axis=0)
        P = (D @ At).reshape(D.shape[0], K, k)
        return kernels.batched_cov(np.swapaxes(P, 0, 1))

    S1 = block_cov(slice(0, n))
    S2 = None if m is None else block_cov(slice(n, N))
    if cfg.base not in AFFINE_INVARIANT_BASES:
        M = np.matmul(A, np.swapaxes(A, 1, 2)) + _wishart(pgen, k, p - N, K)
        S1 = kernels.batched_whiten(S1, M)
        if S2 is not None:
            S2 = kernels.batched_whiten(S2, M)
    return S1, S2


def _null_covs_direct(cfg, n, m, p, r, sampler=None):
    N = n if m is None else n + m
    dgen = RngStream(cfg.effective_null_seed, FAMILY_NULL_DATA, r).generator()
    Z = dgen.standard_normal((N, p)) if sampler is None else np.asarray(sampler(dgen))
    # one projection stream per (replicate, projection): index r * K + i
    streams = [RngStream(cfg.effective_null_seed, FAMILY_NULL_PROJ, r * cfg.K + i) for i in range(cfg.K)]
    R = generate_projections(cfg.k, p, streams)
    S1 = kernels.batched_cov(project_many(R, Z[:n]))
    S2 = None if m is None else kernels.batched_cov(project_many(R, Z[n:]))
    return S1, S2


def _null_covs_printed(cfg, n, m, r):
    dgen = RngStream(cfg.effective_null_seed, FAMILY_NULL_DATA, r).generator()
    S1 = kernels.batched_cov(dgen.standard_normal((cfg.K, n, cfg.k)))
    S2 = None if m is None else kernels.batched_cov(dgen.standard_normal((cfg.K, m, cfg.k)))
    return S1, S2


def resolve_route(cfg, N, p):
    if cfg.null_route != "auto":
        if cfg.null_route == "reduced" and p < N:
            raise ConfigError(f"reduced null route needs p >= n (+ m); got p={p}, N={N}")
        return cfg.null_route
    return "reduced" if p >= N else "direct"


def simulate_null(n, p, cfg, m=None, sampler=None, route=None):
    """N_null replicate means of the K projected p-values under the null.

    ``sampler(generator) -> (N, p) array`` replaces the standard normal data
    draw (forces the direct route); rows ``[:n]`` form the first group.
    """
    N = n if m is None else n + m
    _check_dims(cfg, n, p, m)
    if sampler is not None:
        route = "direct"
    route = route or resolve_route(cfg, N, p)
    if route not in ("reduced", "direct", "printed"):
        raise ConfigError(f"unknown null route {route!r}")

    def one(r):
        if route == "reduced":
            S1, S2 = _null_covs_reduced(cfg, n, m, p, r)
        elif route == "direct":
            S1, S2 = _null_covs_direct(cfg, n, m, p, r, sampler)
        else:
            S1, S2 = _null_covs_printed(cfg, n, m, r)
        return stacked_pvalues(cfg.base, S1, n, S2, m).mean()

    def work(idx):
        return np.array([one(r) for r in idx])

    parts = _run_chunks(work, _chunks(cfg.n_null, NULL_CHUNK), cfg.threads)
    return np.concatenate(parts)


# ------------------------------------------------------------------ caching

_MEMORY_CACHE = {}


def _cache_key(cfg, n, m, p, route):
    return {
        "version": CACHE_VERSION,
        "base": cfg.base,
        "hypothesis": cfg.hypothesis,
        "n": int(n),
        "m": None if m is None else int(m),
        "p": int(p),
        "k": cfg.k,
        "K": cfg.K,
        "n_null": cfg.n_null,
        "seed": int(cfg.effective_null_seed),
        "route": route,
    }


def _cache_dir(cfg):
    if cfg.cache_dir:
        return pathlib.Path(cfg.cache_dir)
    env = os.environ.get("CRAMP_CACHE_DIR")
    if env:
        return pathlib.Path(env)
    return pathlib.Path.home() / ".cache" / "cramp"


def _cache_path(cfg, key):
    digest = hashlib.sha1(json.dumps(key, sort_keys=True).encode()).hexdigest()[:20]
    return _cache_dir(cfg) / f"null-{digest}.npz"


def _load_cached(path, key):
    try:
        with np.load(path, allow_pickle=False) as f:
            if json.loads(str(f["key"])) != key:
                return None
            sample = np.array(f["sample"], dtype=np.float64)
    except Exception as exc:  # corrupt or unreadable: regenerate
        log.debug("ignoring null cache %s: %s", path, exc)
        return None
    if sample.ndim != 1 or sample.size != key["n_null"] or not np.all(np.isfinite(sample)):
        return None
    return sample


def _store_cached(path, key, sample):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".{os.getpid()}.tmp.npz")
        np.savez(tmp, key=json.dumps(key, sort_keys=True), sample=sample)
        os.replace(tmp, path)
    except OSError as exc:
        log.warning("could not write null cache %s: %s", path, exc)


def null_distribution(n, p, cfg, m=None):
    """Null sample of mean p-values, served from memory/disk cache when allowed."""
    N = n if m is None else n + m
    _check_dims(cfg, n, p, m)
    route = resolve_route(cfg, N, p)
    key = _cache_key(cfg, n, m, p, route)
    mkey = json.dumps(key, sort_keys=True)
    if cfg.cache:
        if mkey in _MEMORY_CACHE:
            return _MEMORY_CACHE[mkey]
        path = _cache_path(cfg, key)
        sample = _load_cached(path, key)
        if sample is not None:
            _MEMORY_CACHE[mkey] = sample
            return sample
    sample = simulate_null(n, p, cfg, m=m, route=route)
    sample.setflags(write=False)
    if cfg.cache:
        _MEMORY_CACHE[mkey] = sample
        _store_cached(_cache_path(cfg, key), key, sample)
    return sample


def clear_memory_cache():
    _MEMORY_CACHE.clear()


def critical_value(null_sample, alpha):
    """Lower empirical alpha-quantile: smallest value with ECDF >= alpha."""
    return float(np.quantile(null_sample, alpha, method="inverted_cdf"))


def empirical_critical_value(n, p, cfg, m=None):
    sample = null_distribution(n, p, cfg, m=m)
    return critical_value(sample, cfg.alpha), sample


def cramp_test(data, data2=None, cfg=None):
    cfg = cfg or CrampConfig()
    X = as_dataset(data, name="data")
    m = None if data2 is None else as_dataset(data2, name="data2").shape[0]
    pvals = projected_pvalues(X, data2, cfg)
    q, sample = empirical_critical_value(X.shape[0], X.shape[1], cfg, m=m)
    mean_p = float(np.mean(pvals))
    return CrampOutcome(mean_p, pvals, q, bool(mean_p <= q), sample, cfg)
