"""Classical fixed-dimension covariance tests.

One-sample likelihood ratio tests for identity and sphericity, the John and
Nagao functionals, the Ledoit-Wolf correction of Nagao, and the two-sample
Box-M and Wald statistics.

Every statistic has a stacked form (``*_stat``) taking arrays of covariance
matrices with shape ``(B, p, p)``. The random-projection engine evaluates all
projections of a dataset through those; the dataset-level functions below
are thin wrappers returning a :class:`TestResult`.
"""
import numpy as np

from . import kernels
from .errors import DegenerateInputError, DimensionError, RankDeficiencyError
from .linalg import RefDistribution, as_dataset, chi2_sf
from .result import TestResult


def _tr(S):
    return np.trace(S, axis1=-2, axis2=-1)


def _tr_sq(S):
    return np.einsum("...ij,...ij->...", S, S)


def _logdet(S, what):
    ld = kernels.batched_logdet(S)
    if np.any(~np.isfinite(ld)):
        raise RankDeficiencyError(f"{what} is singular or not positive definite")
    return ld


def _stack(S):
    S = np.asarray(S, dtype=np.float64)
    return S[None] if S.ndim == 2 else S


# -------------------------------------------------------------- one sample


def lrt_identity_stat(S, n):
    S = _stack(S)
    p = S.shape[-1]
    if p >= n - 1:
        raise RankDeficiencyError(f"identity LRT needs p < n - 1 (p={p}, n={n})")
    bartlett = (n - 1) * (1 - (2 * p + 1 - 2 / (p + 1)) / (6 * n - 7))
    core = -_logdet(S, "sample covariance") + _tr(S) - p
    return bartlett * core


def lrt_sphericity_stat(S, n):
    S = _stack(S)
    p = S.shape[-1]
    if p < 2:
        raise DimensionError("sphericity needs p >= 2")
    if p >= n - 1:
        raise RankDeficiencyError(f"sphericity LRT needs p < n - 1 (p={p}, n={n})")
    factor = n - 1 - (2 * p * p + p + 2) / (6 * p)
    tr = _tr(S)
    core = p * np.log(p) + _logdet(S, "sample covariance") - p * np.log(tr)
    return -factor * core


def john_raw(S):
    S = _stack(S)
    p = S.shape[-1]
    tr = _tr(S)
    if np.any(tr <= 0):
        raise DegenerateInputError("John statistic needs tr(S) > 0")
    return p * _tr_sq(S) / tr**2 - 1.0


def nagao_raw(S):
    S = _stack(S)
    p = S.shape[-1]
    return (_tr_sq(S) - 2 * _tr(S) + p) / p


def lw_raw(S, n):
    S = _stack(S)
    p = S.shape[-1]
    return nagao_raw(S) - (p / n) * (_tr(S) / p) ** 2 + p / n


def _df_full(p):
    return p * (p + 1) // 2


def _df_sph(p):
    return p * (p + 1) // 2 - 1


def _chi2_pvalues(stat, df):
    return chi2_sf(np.clip(stat, 0.0, None), df)


def _scaled(raw, n, p, scale):
    return n * p * raw / 2.0 if scale else raw


def lrt_identity(data):
    X = as_dataset(data)
    n, p = X.shape
    S = kernels.batched_cov(X[None])
    stat = float(lrt_identity_stat(S, n)[0])
    df = _df_full(p)
    return TestResult(stat, RefDistribution.chi2(df), float(_chi2_pvalues(stat, df)),
                      "asymptotic", "lrt-identity")


def lrt_sphericity(data):
    X = as_dataset(data)
    n, p = X.shape
    S = kernels.batched_cov(X[None])
    stat = float(lrt_sphericity_stat(S, n)[0])
    df = _df_sph(p)
    return TestResult(stat, RefDistribution.chi2(df), float(_chi2_pvalues(stat, df)),
                      "asymptotic", "lrt-sphericity")


def john_sphericity(data, scale_for_asymptotics=True):
    """John's U = (1/p) tr(S / (tr S / p) - I)^2.

    With ``scale_for_asymptotics`` the chi-square comparison uses n p U / 2;
    otherwise U itself is referred to the chi-square law.
    """
    X = as_dataset(data)
    n, p = X.shape
    raw = float(john_raw(kernels.batched_cov(X[None]))[0])
    stat = _scaled(raw, n, p, scale_for_asymptotics)
    df = max(_df_sph(p), 1)
    return TestResult(stat, RefDistribution.chi2(df), float(_chi2_pvalues(stat, df)),
                      "asymptotic", "john", raw=raw)


def nagao_identity(data, scale_for_asymptotics=True):
    """Nagao's V = (1/p) tr(S - I)^2, scaled like :func:`john_sphericity`."""
    X = as_dataset(data)
    n, p = X.shape
    raw = float(nagao_raw(kernels.batched_cov(X[None]))[0])
    stat = _scaled(raw, n, p, scale_for_asymptotics)
    # an identity test leaves all p(p+1)/2 free parameters of Sigma to deviate
    df = _df_full(p)
    return TestResult(stat, RefDistribution.chi2(df), float(_chi2_pvalues(stat, df)),
                      "asymptotic", "nagao", raw=raw)


# -------------------------------------------------------------- two sample


def _check_two(X, Y):
    if X.shape[1] != Y.shape[1]:
        raise DimensionError(
            f"groups have different dimensions ({X.shape[1]} vs {Y.shape[1]})"
        )


def pooled(S1, S2, n, m):
    return (n * S1 + m * S2) / (n + m)


def box_m_stat(S1, S2, n, m):
    S1, S2 = _stack(S1), _stack(S2)
    p = S1.shape[-1]
    if p >= min(n, m) - 1:
        raise RankDeficiencyError(
            f"Box-M needs p < min(n, m) - 1 (p={p}, n={n}, m={m})"
        )
    Spl = pooled(S1, S2, n, m)
    # Box's M with half exponents: log M = sum_k (n_k - 1)/2 log|S_k| - (N - 2)/2 log|S_pl|.
    log_m = 0.5 * (
        (n - 1) * _logdet(S1, "first-group covariance")
        + (m - 1) * _logdet(S2, "second-group covariance")
        - (n + m - 2) * _logdet(Spl, "pooled covariance")
    )
    c1 = (1 / n + 1 / m - 1 / (n + m)) * (2 * p * p + 3 * p - 1) / (6 * (p + 1))
    return -2 * (1 - c1) * log_m


def wald_stat(S1, S2, n, m):
    S1, S2 = _stack(S1), _stack(S2)
    Spl = pooled(S1, S2, n, m)
    _logdet(Spl, "pooled covariance")
    # Spl^{-1} S_k, transposed: tr of products is unaffected.
    A = np.linalg.solve(Spl, S1)
    B = np.linalg.solve(Spl, S2)
    N = n + m
    t1 = np.einsum("...ij,...ji->...", A, A)
    t2 = np.einsum("...ij,...ji->...", B, B)
    t12 = np.einsum("...ij,...ji->...", A, B)
    return N / 2 * (n / N * t1 + m / N * t2 - n * m / N**2 * t12)


def box_m(x, y):
    X, Y = as_dataset(x, name="x"), as_dataset(y, name="y")
    _check_two(X, Y)
    n, p = X.shape
    m = Y.shape[0]
    if p >= min(n, m) - 1:
        raise RankDeficiencyError(f"Box-M needs p < min(n, m) - 1 (p={p}, n={n}, m={m})")
    S1 = kernels.batched_cov(X[None])
    S2 = kernels.batched_cov(Y[None])
    stat = float(box_m_stat(S1, S2, n, m)[0])
    df = _df_full(p)
    return TestResult(stat, RefDistribution.chi2(df), float(_chi2_pvalues(stat, df)),
                      "asymptotic", "box-m")


def wald_two_sample(x, y):
    X, Y = as_dataset(x, name="x"), as_dataset(y, name="y")
    _check_two(X, Y)
    n, p = X.shape
    m = Y.shape[0]
    if n + m <= p:
        raise RankDeficiencyError(f"pooled covariance is singular (n + m = {n + m} <= p = {p})")
    S1 = kernels.batched_cov(X[None])
    S2 = kernels.batched_cov(Y[None])
    stat = float(wald_stat(S1, S2, n, m)[0])
    df = _df_full(p)
    return TestResult(stat, RefDistribution.chi2(df), float(_chi2_pvalues(stat, df)),
                      "asymptotic", "wald")


# -------------------------------------------------------------- registry

# name -> (hypothesis, stacked statistic, df as a function of dimension)
ONE_SAMPLE_BASES = {
    "lrt-identity": ("one-sample-identity", lambda S, n: lrt_identity_stat(S, n), _df_full),
    "lrt-sphericity": ("one-sample-sphericity", lambda S, n: lrt_sphericity_stat(S, n), _df_sph),
    "john": ("one-sample-sphericity",
             lambda S, n: _scaled(john_raw(S), n, S.shape[-1], True), _df_sph),
    "nagao": ("one-sample-identity",
              lambda S, n: _scaled(nagao_raw(S), n, S.shape[-1], True), _df_full),
    "lw": ("one-sample-identity",
           lambda S, n: _scaled(lw_raw(S, n), n, S.shape[-1], True), _df_full),
}

TWO_SAMPLE_BASES = {
    "box-m": ("two-sample", box_m_stat, _df_full),
    "wald": ("two-sample", wald_stat, _df_full),
}


def base_hypothesis(base):
    if base in ONE_SAMPLE_BASES:
        return ONE_SAMPLE_BASES[base][0]
    if base in TWO_SAMPLE_BASES:
        return TWO_SAMPLE_BASES[base][0]
    raise KeyError(base)


def stacked_pvalues(base, S1, n, S2=None, m=None):
    """p-values of ``base`` for every covariance (pair) in the stack."""
    if base in ONE_SAMPLE_BASES:
        _, fn, dff = ONE_SAMPLE_BASES[base]
        stat = fn(S1, n)
    else:
        _, fn, dff = TWO_SAMPLE_BASES[base]
        stat = fn(S1, S2, n, m)
    df = max(dff(S1.shape[-1]), 1)
    return np.atleast_1d(_chi2_pvalues(stat, df))
