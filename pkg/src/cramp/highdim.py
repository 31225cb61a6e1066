"""High-dimensional baseline statistics (valid, or claimed valid, for p > n).

The U-statistic estimators of tr(Sigma) and tr(Sigma^2) are evaluated from
the n x n Gram matrix of the observations in O(n^2 p + n^2) time; sums over
distinct index tuples are reduced to row sums and Frobenius norms by
inclusion-exclusion. All of them are exactly translation invariant, so the
default of centering each group first only improves conditioning.

Two-sample statistics accept ``strategy="monte-carlo"``: the raw statistic is
referred to its distribution over random rotations of the pooled Helmert
residuals, which is its exact null law for Gaussian data given the pooled
scatter matrix.
"""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import helmert

from . import kernels
from .classical import lw_raw
from .errors import ArgumentError, DegenerateInputError, DimensionError, SampleSizeError
from .linalg import (
    RefDistribution,
    RngStream,
    as_dataset,
    chi2_sf,
    normal_sf,
    sample_covariance,
)
from .result import TestResult

DEFAULT_MC_REPS = 500


@dataclass(frozen=True)
class UStatCache:
    """Pairwise inner products of one group and their off-diagonal sums."""

    gram: np.ndarray
    row_sums: np.ndarray  # sum_{j != i} G_ij
    total: float  # sum_{i != j} G_ij

    @classmethod
    def build(cls, data, center=True):
        X = np.asarray(data, dtype=np.float64)
        if center:
            X = X - X.mean(axis=0)
        G = X @ X.T
        G = 0.5 * (G + G.T)
        off = G - np.diag(np.diag(G))
        rs = off.sum(axis=1)
        return cls(G, rs, float(rs.sum()))

    @property
    def n(self):
        return self.gram.shape[0]

    def trace_estimate(self):
        n = self.n
        return float(np.trace(self.gram) / n - self.total / (n * (n - 1)))

    def trace_sq_estimate(self):
        n = self.n
        G = self.gram
        off = G - np.diag(np.diag(G))
        s2 = float(np.sum(off * off))
        s3 = float(self.row_sums @ self.row_sums) - s2
        s4 = self.total**2 - 2 * s2 - 4 * s3
        return (
            s2 / (n * (n - 1))
            - 2 * s3 / (n * (n - 1) * (n - 2))
            + s4 / (n * (n - 1) * (n - 2) * (n - 3))
        )


def cross_ustat(X, Y, center=True):
    """Unbiased estimator of tr(Sigma_1 Sigma_2) from two independent groups."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if center:
        X = X - X.mean(axis=0)
        Y = Y - Y.mean(axis=0)
    n, m = X.shape[0], Y.shape[0]
    H = X @ Y.T
    c1 = float(np.sum(H * H))
    col = H.sum(axis=0)
    row = H.sum(axis=1)
    c2 = float(col @ col) - c1
    c3 = float(row @ row) - c1
    c4 = float(H.sum()) ** 2 - float(row @ row) - c2
    return (
        c1 / (n * m)
        - c2 / (n * (n - 1) * m)
        - c3 / (m * (m - 1) * n)
        + c4 / (n * (n - 1) * m * (m - 1))
    )


def _need(n, k, what):
    if n < k:
        raise SampleSizeError(f"{what} needs at least {k} observations, got {n}")


def czz_trace_estimators(data, center=True):
    """(T1, T2): unbiased estimators of tr(Sigma) and tr(Sigma^2)."""
    X = as_dataset(data)
    _need(X.shape[0], 4, "the trace estimators")
    cache = UStatCache.build(X, center=center)
    return cache.trace_estimate(), cache.trace_sq_estimate()


# ---------------------------------------------------------------- one sample


def _normal_result(stat, method, raw=None, details=None):
    return TestResult(float(stat), RefDistribution.normal(), float(normal_sf(stat)),
                      "asymptotic", method, raw=raw, details=details or {})


def czz_one_sample(data, center=True):
    """U (sphericity) and V (identity) statistics built on the trace estimators.

    p-values refer n U / 2 and n V / 2 to the standard normal upper tail.
    """
    X = as_dataset(data)
    n, p = X.shape
    t1, t2 = czz_trace_estimators(X, center=center)
    if t1 == 0:
        raise DegenerateInputError("trace estimate is zero")
    u = p * t2 / t1**2 - 1
    v = t2 / p - 2 * t1 / p + 1
    return (
        _normal_result(n * u / 2, "czz-u", raw=u),
        _normal_result(n * v / 2, "czz-v", raw=v),
    )


def _delta(S, n):
    """Modified estimator of tr(Sigma^2)/p used by both SYK statistics."""
    p = S.shape[0]
    tr_s2 = float(np.sum(S * S))
    tr_d2 = float(np.sum(np.diag(S) ** 2))
    tr_s = float(np.trace(S))
    num = (n - 1) ** 3 * (n - 2) * tr_s2 - n * (n - 1) ** 3 * tr_d2 + (n - 1) ** 2 * tr_s**2
    return num / (p * n * (n - 1) * (n - 2) * (n - 3))


def syk_a2(S, n):
    """One-sample a2 estimator, with tr(S^2) in the last term."""
    p = S.shape[0]
    tr_s2 = float(np.sum(S * S))
    tr_d2 = float(np.sum(np.diag(S) ** 2))
    num = (n - 1) ** 3 * (n - 2) * tr_s2 - n * (n - 1) ** 3 * tr_d2 + (n - 1) ** 2 * tr_s2
    return num / (p * n * (n - 1) * (n - 2) * (n - 3))


def syk_one_sample(data):
    X = as_dataset(data)
    n, p = X.shape
    _need(n, 4, "the SYK statistics")
    S = sample_covariance(X)
    a1 = float(np.trace(S)) / p
    if a1 == 0:
        raise DegenerateInputError("tr(S) is zero")
    a2 = syk_a2(S, n)
    u = (n - 1) / 2 * (a2 / a1 - 1)
    v = (n - 1) / 2 * (a2 - 2 * a1 + 1)
    details = {"a1": a1, "a2": a2}
    return _normal_result(u, "syk-u", details=details), _normal_result(v, "syk-v", details=details)


def lw_identity(data, scale_for_asymptotics=True):
    """Ledoit-Wolf corrected Nagao statistic for H0: Sigma = I."""
    X = as_dataset(data)
    n, p = X.shape
    raw = float(lw_raw(sample_covariance(X)[None], n)[0])
    stat = n * p * raw / 2 if scale_for_asymptotics else raw
    df = p * (p + 1) // 2
    return TestResult(stat, RefDistribution.chi2(df), float(chi2_sf(max(stat, 0.0), df)),
                      "asymptotic", "lw", raw=raw)


# ---------------------------------------------------------------- two sample


def _two(x, y, min_n):
    X, Y = as_dataset(x, name="x"), as_dataset(y, name="y")
    if X.shape[1] != Y.shape[1]:
        raise DimensionError(f"groups have different dimensions ({X.shape[1]} vs {Y.shape[1]})")
    _need(X.shape[0], min_n, "the first group")
    _need(Y.shape[0], min_n, "the second group")
    return X, Y


def _haar(gen, d):
    Q, R = np.linalg.qr(gen.standard_normal((d, d)))
    return Q * np.sign(np.diag(R))


def _bootstrap_pvalue(stat_fn, X, Y, n_mc, rng):
    """Monte-Carlo p-value from random rotations of the Helmert residuals.

    ``W = [H_n X; H_m Y]`` stacks the n + m - 2 Helmert rows of both groups;
    under a Gaussian null they are i.i.d. N(0, Sigma), so ``Q W`` has the
    same law for Haar orthogonal Q. Mapping back with ``H^T`` gives centered
    pseudo-datasets with exactly the null law of the centered data,
    conditional on the pooled scatter matrix. Statistics must be
    translation invariant (all two-sample statistics here center).

    ``rng`` is a numpy Generator (consumed sequentially), an RngStream
    (one child stream per replicate) or an integer seed.
    """
    if n_mc < 1:
        raise ArgumentError("monte-carlo strategy needs at least one replicate")
    n, m = X.shape[0], Y.shape[0]
    Hn, Hm = helmert(n), helmert(m)
    W = np.vstack([Hn @ X, Hm @ Y])
    d = n + m - 2
    if isinstance(rng, np.random.Generator):
        gen_for = lambda b: rng  # noqa: E731
    else:
        if not isinstance(rng, RngStream):
            rng = RngStream(0 if rng is None else int(rng), family=7)
        gen_for = lambda b: rng.child(b).generator()  # noqa: E731
    obs = stat_fn(X, Y)
    null = np.empty(n_mc)
    for b in range(n_mc):
        V = _haar(gen_for(b), d) @ W
        null[b] = stat_fn(Hn.T @ V[: n - 1], Hm.T @ V[n - 1:])
    pval = (1 + np.count_nonzero(null >= obs)) / (n_mc + 1)
    return obs, float(pval), null


def _mc_result(stat, pval, null, method, raw=None):
    return TestResult(float(stat), RefDistribution.empirical(null), pval, "monte-carlo",
                      method, raw=raw)


def schott_raw(X, Y):
    n, m = X.shape[0], Y.shape[0]
    S1, S2 = sample_covariance(X), sample_covariance(Y)
    D = S1 - S2
    tr1, tr2 = float(np.trace(S1)), float(np.trace(S2))
    q1, q2 = float(np.sum(S1 * S1)), float(np.sum(S2 * S2))
    corr1 = (n - 2) / ((n + 1) * (n - 1)) * ((n - 1) * (n - 3) * q1 + (n - 1) * tr1**2)
    corr2 = (m - 2) / ((m + 1) * (m - 1)) * ((m - 1) * (m - 3) * q2 + (m - 1) * tr2**2)
    return float(np.sum(D * D)) - corr1 - corr2


def schott_two_sample(x, y, strategy="asymptotic", n_mc=DEFAULT_MC_REPS, rng=None):
    X, Y = _two(x, y, 4)
    if strategy == "monte-carlo":
        stat, pval, null = _bootstrap_pvalue(schott_raw, X, Y, n_mc, rng)
        return _mc_result(stat, pval, null, "schott")
    if strategy != "asymptotic":
        raise ArgumentError(f"unknown strategy {strategy!r}")
    n, m = X.shape[0], Y.shape[0]
    raw = schott_raw(X, Y)
    Spl = (n * sample_covariance(X) + m * sample_covariance(Y)) / (n + m)
    sd = 2 * (1 / n + 1 / m) * float(np.sum(Spl * Spl))
    if sd <= 0:
        raise DegenerateInputError("pooled covariance is zero")
    return _normal_result(raw / sd, "schott", raw=raw)


def syk2_raw(X, Y):
    n, m = X.shape[0], Y.shape[0]
    p = X.shape[1]
    S1, S2 = sample_covariance(X), sample_covariance(Y)
    d1, d2 = _delta(S1, n), _delta(S2, m)
    num = d1 + d2 - 2 * float(np.sum(S1 * S2)) / p
    den = 2 * (1 / (n - 1) + 1 / (m - 1)) * ((n - 1) * d1 + (m - 1) * d2) / (n + m - 2)
    if den == 0:
        raise DegenerateInputError("SYK denominator is zero")
    return num / den


def syk_two_sample(x, y, strategy="asymptotic", n_mc=DEFAULT_MC_REPS, rng=None):
    X, Y = _two(x, y, 4)
    if strategy == "monte-carlo":
        stat, pval, null = _bootstrap_pvalue(syk2_raw, X, Y, n_mc, rng)
        return _mc_result(stat, pval, null, "syk2")
    if strategy != "asymptotic":
        raise ArgumentError(f"unknown strategy {strategy!r}")
    return _normal_result(syk2_raw(X, Y), "syk2")


def li_chen_components(X, Y, center=True):
    """(A_1, A_2, C): within-group tr(Sigma_h^2) and cross tr(Sigma_1 Sigma_2)."""
    a1 = UStatCache.build(X, center=center).trace_sq_estimate()
    a2 = UStatCache.build(Y, center=center).trace_sq_estimate()
    return a1, a2, cross_ustat(X, Y, center=center)


def li_chen_raw(X, Y):
    n, m = X.shape[0], Y.shape[0]
    a1, a2, c = li_chen_components(X, Y)
    sigma = 2 * (a1 / n + a2 / m)
    if not sigma > 0:
        raise DegenerateInputError("Li-Chen variance estimate is not positive")
    return (a1 + a2 - 2 * c) / sigma


def li_chen_two_sample(x, y, strategy="asymptotic", n_mc=DEFAULT_MC_REPS, rng=None):
    X, Y = _two(x, y, 4)
    if strategy == "monte-carlo":
        stat, pval, null = _bootstrap_pvalue(li_chen_raw, X, Y, n_mc, rng)
        return _mc_result(stat, pval, null, "lc")
    if strategy != "asymptotic":
        raise ArgumentError(f"unknown strategy {strategy!r}")
    return _normal_result(li_chen_raw(X, Y), "lc")


def clx_raw(X, Y):
    stat, n_zero = kernels.clx_max(X, Y)
    if n_zero:
        raise DegenerateInputError(f"{n_zero} coordinate pairs have zero variance estimate")
    return stat


def clx_pvalue_analytic(stat, p):
    """Type-I extreme value tail of T - 4 log p + log log p."""
    t = stat - 4 * np.log(p) + np.log(np.log(p))
    return float(-np.expm1(-np.exp(-t / 2) / np.sqrt(8 * np.pi)))


def clx_threshold(p, alpha):
    """Rejection threshold on the raw max statistic at level ``alpha``."""
    q = -np.log(8 * np.pi) - 2 * np.log(np.log(1 / (1 - alpha)))
    return q + 4 * np.log(p) - np.log(np.log(p))


def clx_two_sample(x, y, strategy="monte-carlo", n_mc=DEFAULT_MC_REPS, rng=None):
    X, Y = _two(x, y, 2)
    p = X.shape[1]
    if p < 2:
        raise DimensionError("max-type statistic needs p >= 2")
    if strategy == "monte-carlo":
        stat, pval, null = _bootstrap_pvalue(clx_raw, X, Y, n_mc, rng)
        return _mc_result(stat, pval, null, "clx")
    if strategy != "analytic":
        raise ArgumentError(f"unknown strategy {strategy!r}")
    stat = clx_raw(X, Y)
    return TestResult(stat, RefDistribution("none"), clx_pvalue_analytic(stat, p),
                      "analytic", "clx")
