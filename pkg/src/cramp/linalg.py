"""Matrix primitives, sample moments and reference distributions."""
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .errors import (
    ArgumentError,
    DegenerateInputError,
    DimensionError,
    InvalidMatrixError,
)

SYM_RTOL = 1e-10


def as_dataset(data, min_n=2, name="data"):
    """Validate an ``(n, p)`` observation matrix and return it as float64.

    A 1-D input is read as ``n`` observations of a scalar.
    """
    X = np.asarray(data, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DimensionError(f"{name} must be a 2-D (n, p) array, got ndim={X.ndim}")
    if X.shape[0] < min_n:
        raise DegenerateInputError(
            f"{name} needs at least {min_n} observations, got {X.shape[0]}"
        )
    if X.shape[1] < 1:
        raise DimensionError(f"{name} has no variables")
    if not np.all(np.isfinite(X)):
        raise DegenerateInputError(f"{name} contains non-finite entries")
    return X


def as_covmatrix(S, name="matrix"):
    """Check symmetry to relative tolerance and return ``(S + S.T) / 2``."""
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {S.shape}")
    scale = max(np.abs(S).max(initial=0.0), 1.0)
    if np.abs(S - S.T).max(initial=0.0) > SYM_RTOL * scale:
        raise InvalidMatrixError(f"{name} is not symmetric")
    return 0.5 * (S + S.T)


def sample_covariance(data):
    """Covariance with divisor n (the Gaussian MLE), exactly symmetric."""
    X = as_dataset(data)
    Xc = X - X.mean(axis=0)
    S = Xc.T @ Xc / X.shape[0]
    return 0.5 * (S + S.T)


def trace_power(S, k):
    """tr(S^k) for k in 1..4. Powers up to 2 never form a product matrix."""
    if k not in (1, 2, 3, 4):
        raise ArgumentError(f"trace_power supports k in 1..4, got {k!r}")
    S = np.asarray(S, dtype=np.float64)
    if k == 1:
        return float(np.trace(S))
    if k == 2:
        return float(np.sum(S * S))
    S2 = S @ S
    if k == 3:
        return float(np.sum(S2 * S))
    return float(np.sum(S2 * S2))


def eigenvalues_sym(S):
    """Eigenvalues of a symmetric matrix in descending order."""
    S = as_covmatrix(S)
    return np.linalg.eigvalsh(S)[::-1]


def chi2_sf(x, df):
    """Upper tail P[chi2_df > x] via the regularized upper incomplete gamma."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0):
        raise ArgumentError("chi2_sf requires x >= 0")
    if df < 1 or int(df) != df:
        raise ArgumentError(f"chi-square df must be a positive integer, got {df!r}")
    out = special.gammaincc(0.5 * df, 0.5 * x)
    return float(out) if out.ndim == 0 else out


def normal_sf(z):
    """Upper tail P[Z > z] of the standard normal."""
    z = np.asarray(z, dtype=np.float64)
    out = 0.5 * special.erfc(z / np.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class RefDistribution:
    kind: str  # "chi2" | "normal" | "empirical" | "none"
    df: Optional[int] = None
    sample: Optional[tuple] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("chi2", "normal", "empirical", "none"):
            raise ArgumentError(f"unknown reference distribution {self.kind!r}")
        if self.kind == "chi2" and (self.df is None or self.df < 1):
            raise ArgumentError("chi-square reference needs df >= 1")
        if self.kind == "empirical" and not self.sample:
            raise ArgumentError("empirical reference needs a non-empty sample")

    @classmethod
    def chi2(cls, df):
        return cls("chi2", df=int(df))

    @classmethod
    def normal(cls):
        return cls("normal")

    @classmethod
    def empirical(cls, sample: Sequence[float]):
        return cls("empirical", sample=tuple(float(v) for v in sample))

    def describe(self):
        if self.kind == "chi2":
            return f"chi2({self.df})"
        if self.kind == "empirical":
            return f"empirical(n={len(self.sample)})"
        return self.kind


@dataclass(frozen=True)
class RngStream:
    """Deterministic random stream addressed by ``(seed, family, index)``.

    Streams with different keys are statistically independent (numpy's
    SeedSequence spawn keys); equal keys reproduce identical draws.
    """

    seed: int
    family: int = 0
    index: int = 0
    attempt: int = 0

    def generator(self):
        ss = np.random.SeedSequence(
            entropy=int(self.seed) & ((1 << 64) - 1),
            spawn_key=(int(self.family), int(self.index), int(self.attempt)),
        )
        return np.random.Generator(np.random.PCG64(ss))

    def retry(self):
        return RngStream(self.seed, self.family, self.index, self.attempt + 1)

    def child(self, index):
        return RngStream(self.seed, self.family, index)
