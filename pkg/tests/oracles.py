"""Slow, obviously-correct reference implementations used only by tests."""
import itertools
import math

import numpy as np


def cov_loop(X):
    n, p = X.shape
    mean = [sum(X[i, a] for i in range(n)) / n for a in range(p)]
    S = np.zeros((p, p))
    for i in range(n):
        for a in range(p):
            for b in range(p):
                S[a, b] += (X[i, a] - mean[a]) * (X[i, b] - mean[b])
    return S / n


def t1_brute(X):
    n = X.shape[0]
    G = X @ X.T
    diag = sum(G[i, i] for i in range(n)) / n
    off = sum(G[i, j] for i in range(n) for j in range(n) if i != j) / (n * (n - 1))
    return diag - off


def within_trace_sq_brute(X):
    """Three-term U-statistic for tr(Sigma^2) by explicit enumeration."""
    n = X.shape[0]
    G = X @ X.T
    r = range(n)
    s2 = sum(G[i, j] ** 2 for i, j in itertools.permutations(r, 2))
    s3 = sum(G[i, j] * G[i, k] for i, j, k in itertools.permutations(r, 3))
    s4 = sum(G[i, j] * G[k, l] for i, j, k, l in itertools.permutations(r, 4))
    return (s2 / (n * (n - 1)) - 2 * s3 / (n * (n - 1) * (n - 2))
            + s4 / (n * (n - 1) * (n - 2) * (n - 3)))


def cross_brute(X, Y):
    n, m = X.shape[0], Y.shape[0]
    H = X @ Y.T
    c1 = sum(H[i, j] ** 2 for i in range(n) for j in range(m))
    c2 = sum(H[i, k] * H[j, k] for i, j in itertools.permutations(range(n), 2) for k in range(m))
    c3 = sum(H[k, i] * H[k, j] for i, j in itertools.permutations(range(m), 2) for k in range(n))
    c4 = sum(H[i, j] * H[k, l] for i, k in itertools.permutations(range(n), 2)
             for j, l in itertools.permutations(range(m), 2))
    return (c1 / (n * m) - c2 / (n * (n - 1) * m) - c3 / (m * (m - 1) * n)
            + c4 / (n * (n - 1) * m * (m - 1)))


def chi2_sf_quad(x, df):
    from scipy.integrate import quad

    def dens(t):
        return t ** (df / 2 - 1) * math.exp(-t / 2) / (2 ** (df / 2) * math.gamma(df / 2))

    val, _ = quad(dens, 0, x, limit=200)
    return 1 - val


def normal_sf_series(z):
    """Maclaurin series of erf, adequate for |z| <= 4."""
    x = z / math.sqrt(2)
    total, term, k = 0.0, x, 0
    while abs(term) > 1e-17 * max(1.0, abs(total)) or k < 5:
        total += term / (2 * k + 1)
        k += 1
        term = -term * x * x / k
        if k > 400:
            break
    erf = 2 / math.sqrt(math.pi) * total
    return 0.5 * (1 - erf)


def syk_a2_loop(S, n):
    p = S.shape[0]
    tr_s2 = sum(S[i, j] * S[j, i] for i in range(p) for j in range(p))
    tr_d2 = sum(S[i, i] ** 2 for i in range(p))
    return ((n - 1) ** 3 * (n - 2) * tr_s2 - n * (n - 1) ** 3 * tr_d2 + (n - 1) ** 2 * tr_s2) / (
        p * n * (n - 1) * (n - 2) * (n - 3))


def delta_loop(S, n):
    p = S.shape[0]
    tr_s2 = sum(S[i, j] * S[j, i] for i in range(p) for j in range(p))
    tr_d2 = sum(S[i, i] ** 2 for i in range(p))
    tr_s = sum(S[i, i] for i in range(p))
    return ((n - 1) ** 3 * (n - 2) * tr_s2 - n * (n - 1) ** 3 * tr_d2 + (n - 1) ** 2 * tr_s ** 2) / (
        p * n * (n - 1) * (n - 2) * (n - 3))


def clx_loop(X, Y):
    n, p = X.shape
    m = Y.shape[0]
    Xc, Yc = X - X.mean(0), Y - Y.mean(0)
    S1, S2 = Xc.T @ Xc / n, Yc.T @ Yc / m
    best = -np.inf
    for i in range(p):
        for j in range(i + 1, p):
            w1 = np.mean((Xc[:, i] * Xc[:, j] - S1[i, j]) ** 2)
            w2 = np.mean((Yc[:, i] * Yc[:, j] - S2[i, j]) ** 2)
            best = max(best, (S1[i, j] - S2[i, j]) ** 2 / (w1 / n + w2 / m))
    return best
