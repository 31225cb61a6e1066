"""The numba kernels and their numpy fallbacks must agree to 1e-10."""
import os
import subprocess
import sys

import numpy as np
import pytest

from cramp import kernels
from cramp._backend import NUMBA_AVAILABLE, get_backend, set_backend

pytestmark = pytest.mark.skipif(not NUMBA_AVAILABLE, reason="numba not installed")


@pytest.fixture
def data():
    g = np.random.default_rng(2024)
    Y = g.standard_normal((40, 12, 6)) + 3.0
    A = g.standard_normal((40, 6, 15))
    M = A @ np.swapaxes(A, 1, 2)
    return Y, M


def _both(fn, *args):
    prev = get_backend()
    try:
        set_backend("numpy")
        a = fn(*args)
        set_backend("numba")
        b = fn(*args)
    finally:
        set_backend(prev)
    return a, b


def test_cov(data):
    Y, _ = data
    a, b = _both(kernels.batched_cov, Y)
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)


def test_logdet(data):
    _, M = data
    a, b = _both(kernels.batched_logdet, M)
    np.testing.assert_allclose(a, b, rtol=1e-10)
    np.testing.assert_allclose(a, np.linalg.slogdet(M)[1], rtol=1e-10)


def test_logdet_not_pd_is_nan():
    S = np.array([[[1.0, 2.0], [2.0, 1.0]]])
    a, b = _both(kernels.batched_logdet, S)
    assert np.isnan(a[0]) and np.isnan(b[0])


def test_inv_sqrt(data):
    _, M = data
    (Ma, ca), (Mb, cb) = _both(kernels.batched_inv_sqrt, M)
    np.testing.assert_allclose(Ma, Mb, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(ca, cb, rtol=1e-8)
    eye = np.broadcast_to(np.eye(M.shape[-1]), M.shape)
    np.testing.assert_allclose(Ma @ M @ Ma, eye, atol=1e-10)


def test_whiten(data):
    Y, M = data
    S = kernels.batched_cov_numpy(Y)
    a, b = _both(kernels.batched_whiten, S, M)
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)
    L = np.linalg.cholesky(M)
    Li = np.linalg.inv(L)
    np.testing.assert_allclose(a, Li @ S @ np.swapaxes(Li, 1, 2), rtol=1e-9, atol=1e-12)


def test_clx(rng):
    X, Y = rng.standard_normal((9, 30)), rng.standard_normal((11, 30)) * 1.3
    (sa, za), (sb, zb) = _both(kernels.clx_max, X, Y)
    assert za == zb == 0
    assert sa == pytest.approx(sb, rel=1e-10)


def test_clx_counts_zero_variance_pairs():
    X = np.zeros((5, 4))
    X[:, 0] = np.arange(5)
    Y = np.random.default_rng(0).standard_normal((5, 4))
    Y[:, 1] = 0.0
    (sa, za), (sb, zb) = _both(kernels.clx_max, X, Y)
    assert za == zb > 0


def test_set_backend_validation():
    with pytest.raises(ValueError):
        set_backend("fortran")


@pytest.mark.parametrize("env", [{"CRAMP_DISABLE_NUMBA": "1"}, {"CRAMP_BACKEND": "numpy"}])
def test_env_flag_selects_numpy(env):
    code = "from cramp._backend import get_backend; print(get_backend())"
    out = subprocess.run([sys.executable, "-c", code], env={**os.environ, **env},
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_pipeline_identical_across_backends(rng):
    from cramp.engine import CrampConfig, projected_pvalues, simulate_null

    X, Y = rng.standard_normal((15, 40)), rng.standard_normal((15, 40))
    cfg = CrampConfig(k=4, K=20, n_null=100, base="box-m", threads=1, cache=False)
    a, b = _both(projected_pvalues, X, Y, cfg)
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-14)
    a, b = _both(simulate_null, 15, 40, cfg, 15)
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-14)
