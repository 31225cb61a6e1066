"""Random semi-orthogonal projection matrices.

A projection ``R`` (k x p) is built from a Gaussian draw ``G`` as
``R = (G G^T)^{-1/2} G``. Only the k x k Gram matrix is decomposed, and the
row space of ``R`` is uniformly distributed, so ``R Sigma R^T`` keeps the
identity and sphericity nulls intact whenever ``R R^T = I_k``.
"""
import numpy as np

from . import kernels
from .errors import ArgumentError, DimensionError, RankDeficiencyError
from .linalg import RngStream, as_dataset

MAX_COND = 1e12
MAX_ATTEMPTS = 5


def _orthonormalize(G):
    """Stacked ``(B, k, p)`` Gaussian draws -> stacked projections and cond."""
    W = np.matmul(G, np.swapaxes(G, 1, 2))
    M, cond = kernels.batched_inv_sqrt(W)
    return np.matmul(M, G), cond


def generate_projection(k, p, rng):
    """Draw one k x p semi-orthogonal matrix from the stream ``rng``.

    If the Gram matrix of the draw is too ill-conditioned the next substream
    (``rng.retry()``) is tried, up to five attempts in total.
    """
    k, p = int(k), int(p)
    if k < 1:
        raise ArgumentError(f"projection dimension must be >= 1, got {k}")
    if k > p:
        raise DimensionError(f"projection dimension k={k} exceeds p={p}")
    if not isinstance(rng, RngStream):
        rng = RngStream(int(rng))
    stream = rng
    for _ in range(MAX_ATTEMPTS):
        G = stream.generator().standard_normal((1, k, p))
        R, cond = _orthonormalize(G)
        if np.isfinite(cond[0]) and cond[0] <= MAX_COND:
            return R[0]
        stream = stream.retry()
    raise RankDeficiencyError(
        f"could not draw a well-conditioned {k}x{p} projection in {MAX_ATTEMPTS} attempts"
    )


def generate_projections(k, p, streams):
    """One projection per stream, stacked as ``(len(streams), k, p)``.

    Equivalent to calling :func:`generate_projection` per stream but
    orthonormalizes the whole batch at once.
    """
    k, p = int(k), int(p)
    if k < 1:
        raise ArgumentError(f"projection dimension must be >= 1, got {k}")
    if k > p:
        raise DimensionError(f"projection dimension k={k} exceeds p={p}")
    G = np.empty((len(streams), k, p))
    for i, s in enumerate(streams):
        G[i] = s.generator().standard_normal((k, p))
    R, cond = _orthonormalize(G)
    bad = ~(np.isfinite(cond) & (cond <= MAX_COND))
    for i in np.flatnonzero(bad):
        R[i] = generate_projection(k, p, streams[i].retry())
    return R


def project_dataset(R, data):
    """Rows ``R x_i`` of the projected ``(n, k)`` dataset."""
    R = np.asarray(R, dtype=np.float64)
    X = as_dataset(data, min_n=1)
    if R.ndim != 2 or R.shape[1] != X.shape[1]:
        raise DimensionError(
            f"projection of shape {R.shape} cannot act on data with p={X.shape[1]}"
        )
    return X @ R.T


def project_many(R, data):
    """Apply a ``(B, k, p)`` stack to one dataset, giving ``(B, n, k)``."""
    R = np.asarray(R, dtype=np.float64)
    X = np.asarray(data, dtype=np.float64)
    if R.shape[-1] != X.shape[1]:
        raise DimensionError(
            f"projections act on p={R.shape[-1]} but data has p={X.shape[1]}"
        )
    B, k, p = R.shape
    Y = (R.reshape(B * k, p) @ X.T).reshape(B, k, X.shape[0])
    return np.swapaxes(Y, 1, 2)
