"""Hot numeric kernels.

Each kernel exists twice: a numba ``@njit`` version and a vectorized numpy
version with identical semantics. The public names dispatch on the backend
selected in :mod:`cramp._backend`, so results never depend on whether numba
is present beyond floating-point rounding (agreement is tested to 1e-10).

Batched arrays put the batch axis first: ``(B, n, k)`` for a stack of
projected datasets, ``(B, k, k)`` for the matching covariance stack.
"""
import numpy as np

from . import _backend

if _backend.NUMBA_AVAILABLE:
    from numba import njit
else:  # pragma: no cover
    njit = None


# ---------------------------------------------------------------- numpy path


def batched_cov_numpy(Y):
    Y = np.asarray(Y, dtype=np.float64)
    n = Y.shape[1]
    Yc = Y - Y.mean(axis=1, keepdims=True)
    S = np.matmul(np.swapaxes(Yc, 1, 2), Yc) / n
    return 0.5 * (S + np.swapaxes(S, 1, 2))


def batched_logdet_numpy(S):
    """log|S_b| via Cholesky; NaN where S_b is not positive definite."""
    S = np.asarray(S, dtype=np.float64)
    out = np.full(S.shape[0], np.nan)
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        for b in range(S.shape[0]):
            try:
                Lb = np.linalg.cholesky(S[b])
            except np.linalg.LinAlgError:
                continue
            out[b] = 2.0 * np.log(np.diagonal(Lb)).sum()
        return out
    return 2.0 * np.log(np.diagonal(L, axis1=1, axis2=2)).sum(axis=1)


def batched_inv_sqrt_numpy(W):
    """W_b^{-1/2} for a stack of symmetric PD matrices, plus condition numbers."""
    w, V = np.linalg.eigh(W)
    cond = w[:, -1] / np.where(w[:, 0] > 0, w[:, 0], np.nan)
    cond = np.where(np.isnan(cond), np.inf, cond)
    scale = 1.0 / np.sqrt(np.clip(w, np.finfo(float).tiny, None))
    M = np.matmul(V * scale[:, None, :], np.swapaxes(V, 1, 2))
    return M, cond


def batched_whiten_numpy(S, M):
    """L^{-1} S L^{-T} with L the Cholesky factor of each M; NaN if M is not PD."""
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return np.full_like(S, np.nan)
    T = np.linalg.solve(L, S)
    out = np.swapaxes(np.linalg.solve(L, np.swapaxes(T, 1, 2)), 1, 2)
    return 0.5 * (out + np.swapaxes(out, 1, 2))


def clx_max_numpy(X, Y, block=64):
    """Max over i<j of the standardized squared covariance difference.

    Returns ``(stat, n_zero)`` where ``n_zero`` counts pairs whose variance
    estimate is exactly zero (those pairs are excluded from the max).
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    n, p = X.shape
    m = Y.shape[0]
    Xc = X - X.mean(axis=0)
    Yc = Y - Y.mean(axis=0)
    S1 = Xc.T @ Xc / n
    S2 = Yc.T @ Yc / m
    best = -np.inf
    n_zero = 0
    for start in range(0, p, block):
        stop = min(p, start + block)
        # (n, b, p) products for rows start:stop
        P1 = Xc[:, start:stop, None] * Xc[:, None, :]
        P2 = Yc[:, start:stop, None] * Yc[:, None, :]
        w1 = ((P1 - S1[None, start:stop]) ** 2).mean(axis=0)
        w2 = ((P2 - S2[None, start:stop]) ** 2).mean(axis=0)
        den = w1 / n + w2 / m
        num = (S1[start:stop] - S2[start:stop]) ** 2
        rows = np.arange(start, stop)[:, None]
        upper = np.arange(p)[None, :] > rows
        zero = upper & (den == 0.0)
        n_zero += int(zero.sum())
        ok = upper & (den > 0.0)
        if ok.any():
            best = max(best, float((num[ok] / den[ok]).max()))
    return best, n_zero


# ---------------------------------------------------------------- numba path

if njit is not None:

    @njit(cache=True, nogil=True)
    def batched_cov_numba(Y):
        B, n, k = Y.shape
        out = np.empty((B, k, k))
        mu = np.empty(k)
        for b in range(B):
            for a in range(k):
                s = 0.0
                for i in range(n):
                    s += Y[b, i, a]
                mu[a] = s / n
            for a in range(k):
                for c in range(a, k):
                    s = 0.0
                    for i in range(n):
                        s += (Y[b, i, a] - mu[a]) * (Y[b, i, c] - mu[c])
                    out[b, a, c] = s / n
                    out[b, c, a] = s / n
        return out

    @njit(cache=True, nogil=True)
    def batched_logdet_numba(S):
        B, k, _ = S.shape
        out = np.empty(B)
        L = np.empty((k, k))
        for b in range(B):
            ok = True
            logdet = 0.0
            for j in range(k):
                d = S[b, j, j]
                for t in range(j):
                    d -= L[j, t] * L[j, t]
                if not d > 0.0:
                    ok = False
                    break
                ljj = np.sqrt(d)
                L[j, j] = ljj
                logdet += 2.0 * np.log(ljj)
                for i in range(j + 1, k):
                    s = S[b, i, j]
                    for t in range(j):
                        s -= L[i, t] * L[j, t]
                    L[i, j] = s / ljj
            out[b] = logdet if ok else np.nan
        return out

    @njit(cache=True, nogil=True)
    def batched_inv_sqrt_numba(W):
        B, k, _ = W.shape
        M = np.empty((B, k, k))
        cond = np.empty(B)
        tiny = np.finfo(np.float64).tiny
        for b in range(B):
            w, V = np.linalg.eigh(np.ascontiguousarray(W[b]))
            if w[0] > 0.0:
                cond[b] = w[k - 1] / w[0]
            else:
                cond[b] = np.inf
            for a in range(k):
                for c in range(a, k):
                    s = 0.0
                    for t in range(k):
                        wt = w[t] if w[t] > tiny else tiny
                        s += V[a, t] * V[c, t] / np.sqrt(wt)
                    M[b, a, c] = s
                    M[b, c, a] = s
        return M, cond

    @njit(cache=True, nogil=True)
    def batched_whiten_numba(S, M):
        B, k, _ = S.shape
        out = np.empty((B, k, k))
        L = np.empty((k, k))
        T = np.empty((k, k))
        for b in range(B):
            ok = True
            for j in range(k):
                d = M[b, j, j]
                for t in range(j):
                    d -= L[j, t] * L[j, t]
                if not d > 0.0:
                    ok = False
                    break
                L[j, j] = np.sqrt(d)
                for i in range(j + 1, k):
                    s = M[b, i, j]
                    for t in range(j):
                        s -= L[i, t] * L[j, t]
                    L[i, j] = s / L[j, j]
            if not ok:
                out[b, :, :] = np.nan
                continue
            # T = L^{-1} S (forward substitution, column by column)
            for c in range(k):
                for i in range(k):
                    s = S[b, i, c]
                    for t in range(i):
                        s -= L[i, t] * T[t, c]
                    T[i, c] = s / L[i, i]
            # out = T L^{-T}, i.e. solve L out^T = T^T; out is symmetric
            for r in range(k):
                for i in range(k):
                    s = T[r, i]
                    for t in range(i):
                        s -= L[i, t] * out[b, r, t]
                    out[b, r, i] = s / L[i, i]
            for i in range(k):
                for j in range(i + 1, k):
                    v = 0.5 * (out[b, i, j] + out[b, j, i])
                    out[b, i, j] = v
                    out[b, j, i] = v
        return out

    @njit(cache=True, nogil=True)
    def clx_max_numba(X, Y):
        n, p = X.shape
        m = Y.shape[0]
        Xc = np.empty((n, p))
        Yc = np.empty((m, p))
        for j in range(p):
            s = 0.0
            for i in range(n):
                s += X[i, j]
            mu = s / n
            for i in range(n):
                Xc[i, j] = X[i, j] - mu
            s = 0.0
            for i in range(m):
                s += Y[i, j]
            mu = s / m
            for i in range(m):
                Yc[i, j] = Y[i, j] - mu
        best = -np.inf
        n_zero = 0
        for a in range(p):
            for c in range(a + 1, p):
                s1 = 0.0
                q1 = 0.0
                for i in range(n):
                    v = Xc[i, a] * Xc[i, c]
                    s1 += v
                    q1 += v * v
                s1 /= n
                w1 = q1 / n - s1 * s1
                s2 = 0.0
                q2 = 0.0
                for i in range(m):
                    v = Yc[i, a] * Yc[i, c]
                    s2 += v
                    q2 += v * v
                s2 /= m
                w2 = q2 / m - s2 * s2
                if w1 < 0.0:
                    w1 = 0.0
                if w2 < 0.0:
                    w2 = 0.0
                den = w1 / n + w2 / m
                if den == 0.0:
                    n_zero += 1
                    continue
                t = (s1 - s2) * (s1 - s2) / den
                if t > best:
                    best = t
        return best, n_zero

else:  # pragma: no cover
    batched_cov_numba = batched_cov_numpy
    batched_logdet_numba = batched_logdet_numpy
    batched_inv_sqrt_numba = batched_inv_sqrt_numpy
    batched_whiten_numba = batched_whiten_numpy
    clx_max_numba = clx_max_numpy


# ---------------------------------------------------------------- dispatch


def _use_numba():
    return _backend.get_backend() == "numba"


def batched_cov(Y):
    """Stack of sample covariances (divisor n) of a ``(B, n, k)`` array."""
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    if _use_numba():
        return batched_cov_numba(Y)
    return batched_cov_numpy(Y)


def batched_logdet(S):
    S = np.ascontiguousarray(S, dtype=np.float64)
    if _use_numba():
        return batched_logdet_numba(S)
    return batched_logdet_numpy(S)


def batched_inv_sqrt(W):
    W = np.ascontiguousarray(W, dtype=np.float64)
    if _use_numba():
        return batched_inv_sqrt_numba(W)
    return batched_inv_sqrt_numpy(W)


def batched_whiten(S, M):
    """Covariances expressed in the frame where each M becomes the identity."""
    S = np.ascontiguousarray(S, dtype=np.float64)
    M = np.ascontiguousarray(M, dtype=np.float64)
    if _use_numba():
        return batched_whiten_numba(S, M)
    return batched_whiten_numpy(S, M)


def clx_max(X, Y):
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    if _use_numba():
        best, n_zero = clx_max_numba(X, Y)
        return float(best), int(n_zero)
    return clx_max_numpy(X, Y)
