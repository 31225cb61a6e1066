import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cramp import projections
from cramp.errors import ArgumentError, DimensionError, RankDeficiencyError
from cramp.linalg import RngStream, sample_covariance
from cramp.projections import generate_projection, generate_projections, project_dataset, project_many


def test_square_case_is_orthogonal():
    R = generate_projection(3, 3, RngStream(1))
    assert abs(abs(np.linalg.det(R)) - 1) < 1e-8
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-10)


@pytest.mark.parametrize("k,p", [(5, 100), (1, 7), (15, 2000)])
def test_semi_orthogonal(k, p):
    R = generate_projection(k, p, RngStream(3, 0, k))
    assert R.shape == (k, p)
    assert np.abs(R @ R.T - np.eye(k)).max() < 1e-8


def test_deterministic_rerun():
    a = generate_projection(2, 10, RngStream(42))
    b = generate_projection(2, 10, RngStream(42))
    assert a.tobytes() == b.tobytes()


def test_integer_seed_accepted():
    assert generate_projection(2, 10, 42).tobytes() == generate_projection(2, 10, RngStream(42)).tobytes()


def test_batch_matches_single():
    streams = [RngStream(9, 1, i) for i in range(6)]
    Rb = generate_projections(4, 30, streams)
    for i, s in enumerate(streams):
        np.testing.assert_allclose(Rb[i], generate_projection(4, 30, s), atol=1e-13)


def test_row_space_of_gaussian_draw():
    # R = (G G^T)^{-1/2} G spans the same rows as G and is symmetric-factor related
    s = RngStream(5)
    G = s.generator().standard_normal((3, 12))
    R = generate_projection(3, 12, s)
    T = R @ G.T  # = (G G^T)^{1/2}, symmetric positive definite
    np.testing.assert_allclose(T, T.T, atol=1e-10)
    assert np.linalg.eigvalsh(T).min() > 0


def test_errors():
    with pytest.raises(DimensionError):
        generate_projection(6, 5, RngStream(0))
    with pytest.raises(ArgumentError):
        generate_projection(0, 5, RngStream(0))
    with pytest.raises(DimensionError):
        generate_projections(6, 5, [RngStream(0)])


def test_ill_conditioned_draws_exhaust_retries(monkeypatch):
    monkeypatch.setattr(projections, "MAX_COND", 0.5)  # every draw now fails the check
    with pytest.raises(RankDeficiencyError):
        generate_projection(2, 4, RngStream(0))


def test_retry_uses_next_substream(monkeypatch):
    calls = []
    real = projections._orthonormalize

    def flaky(G):
        R, cond = real(G)
        calls.append(1)
        if len(calls) == 1:
            cond = np.full_like(cond, np.inf)
        return R, cond

    monkeypatch.setattr(projections, "_orthonormalize", flaky)
    R = generate_projection(2, 8, RngStream(11))
    monkeypatch.setattr(projections, "_orthonormalize", real)
    assert len(calls) == 2
    np.testing.assert_array_equal(R, generate_projection(2, 8, RngStream(11).retry()))


def test_coordinate_selection():
    k = 3
    R = np.hstack([np.eye(k), np.zeros((k, k))])
    X = np.random.default_rng(0).standard_normal((5, 2 * k))
    np.testing.assert_array_equal(project_dataset(R, X), X[:, :k])


def test_constant_data_stays_constant():
    R = generate_projection(2, 6, RngStream(1))
    out = project_dataset(R, np.tile(np.arange(6.0), (4, 1)))
    assert np.allclose(out, out[0])


def test_covariance_congruence(rng):
    R = generate_projection(3, 6, RngStream(2))
    X = rng.standard_normal((8, 6))
    np.testing.assert_allclose(sample_covariance(project_dataset(R, X)),
                               R @ sample_covariance(X) @ R.T, rtol=1e-10, atol=1e-12)


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        project_dataset(np.eye(2, 3), np.zeros((4, 4)))
    with pytest.raises(DimensionError):
        project_many(np.zeros((2, 2, 3)), np.zeros((4, 4)))


def test_project_many_matches_single(rng):
    Rs = generate_projections(3, 10, [RngStream(4, 0, i) for i in range(5)])
    X = rng.standard_normal((7, 10))
    out = project_many(Rs, X)
    for i in range(5):
        np.testing.assert_allclose(out[i], project_dataset(Rs[i], X), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 1000))
def test_linearity(a, b, seed):
    g = np.random.default_rng(seed)
    X, Y = g.standard_normal((4, 9)), g.standard_normal((4, 9))
    R = generate_projection(3, 9, RngStream(seed))
    lhs = project_dataset(R, a * X + b * Y)
    rhs = a * project_dataset(R, X) + b * project_dataset(R, Y)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_projected_covariance_is_spherical_in_mean():
    # data with covariance sigma^2 I: E[cov(R X)] = sigma^2 (n-1)/n I_k for fixed R
    sigma2, n, k, p, reps = 2.5, 10, 3, 40, 2000
    g = np.random.default_rng(77)
    R = generate_projection(k, p, RngStream(8))
    acc = np.empty((reps, k, k))
    for r in range(reps):
        X = np.sqrt(sigma2) * g.standard_normal((n, p))
        acc[r] = sample_covariance(project_dataset(R, X))
    mean, se = acc.mean(axis=0), acc.std(axis=0, ddof=1) / np.sqrt(reps)
    target = sigma2 * (n - 1) / n * np.eye(k)
    assert np.all(np.abs(mean - target) <= 3 * se + 1e-12)
