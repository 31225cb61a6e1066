import csv
import io
import json
import math

import numpy as np
import pytest

from cramp import harness as Hs
from cramp.errors import ConfigError, InvalidMatrixError, InvalidScenarioError
from cramp.methods import MethodSpec


def _spec(**kw):
    return Hs.ScenarioSpec(**kw)


@pytest.mark.parametrize("B", [0, 3, 50])
def test_band_rho_zero_is_identity(B):
    S = Hs.build_covariance(_spec(p=8, cov_model=Hs.CovModel.make("band", rho=0.0, B=B)), None)
    np.testing.assert_array_equal(S, np.eye(8))


def test_tail_diag_eps_zero_is_identity():
    S = Hs.build_covariance(_spec(p=6, cov_model=Hs.CovModel.make("tail-diag", eps=0.0, B=2)), None)
    np.testing.assert_array_equal(S, np.eye(6))


def test_tail_diag_inflates_after_B():
    S = Hs.build_covariance(_spec(p=5, cov_model="tail-diag(eps=0.5,B=2)"), None)
    np.testing.assert_allclose(np.diag(S), [1, 1, 1.5, 1.5, 1.5])


def test_band_entries():
    S = Hs.band_matrix(5, 0.5, 2)
    assert S[0, 2] == pytest.approx(0.25)
    assert S[0, 3] == 0.0
    assert S[1, 0] == pytest.approx(0.5)


def test_indefinite_band_raises():
    # a truncated band with rho close to 1 loses definiteness
    spec = _spec(p=30, cov_model=Hs.CovModel.make("band", rho=0.95, B=1))
    with pytest.raises(InvalidScenarioError, match="rho=0.95"):
        Hs.build_covariance(spec, None)


def test_gamma_diag_pair():
    spec = _spec(hypothesis="two-sample", p=50, cov_model="gamma-diag(B=0.2)")
    S1, S2 = Hs.build_covariance(spec, np.random.default_rng(0))
    np.testing.assert_array_equal(S1, np.eye(50))
    d = np.diag(S2)
    np.testing.assert_array_equal(d[:10], 1.0)
    assert np.all(d[10:] > 0) and not np.allclose(d[10:], 1.0)


def test_gamma_shape_rate_mean():
    spec = _spec(hypothesis="two-sample", p=20000, cov_model="gamma-diag(B=0)")
    d = np.diag(Hs.build_covariance(spec, np.random.default_rng(1))[1])
    assert d.mean() == pytest.approx(2.0, abs=0.05)  # shape 4, rate 2


def test_band_congruence_pair():
    spec = _spec(hypothesis="two-sample", p=40, cov_model="band-congruence(rho=0.5,B=0.1)")
    S1, S2 = Hs.build_covariance(spec, np.random.default_rng(2))
    d = np.diag(S1)
    assert np.all((d >= 1) & (d <= 3))
    np.testing.assert_allclose(np.diag(S2), d)
    omega = S2 / np.sqrt(np.outer(d, d))
    np.testing.assert_allclose(omega, Hs.band_matrix(40, 0.5, 4), atol=1e-12)
    assert np.linalg.eigvalsh(S2)[0] > 0


def test_two_sample_identity_is_null():
    S1, S2 = Hs.build_covariance(_spec(hypothesis="two-sample", p=5), None)
    np.testing.assert_array_equal(S1, S2)


@pytest.mark.parametrize("text,kind,params", [
    ("identity", "identity", {}),
    ("band(rho=0.8, B=10)", "band", {"rho": 0.8, "B": 10.0}),
    ("band(0.8,3)", "band", {"rho": 0.8, "B": 3.0}),
    ("sphere(2)", "sphere", {"sigma": 2.0}),
    ("gamma-diag", "gamma-diag", {"B": 0.1, "shape": 4.0, "rate": 2.0}),
])
def test_parse_cov_model(text, kind, params):
    model = Hs.parse_cov_model(text)
    assert model.kind == kind
    assert dict(model.params) == {**Hs.COV_DEFAULTS.get(kind, {}), **params}


@pytest.mark.parametrize("text", ["wiggly", "band(rho=x)", "band(1,2,3)", "band(gamma=1)", "!!"])
def test_parse_cov_model_errors(text):
    with pytest.raises(InvalidScenarioError):
        Hs.parse_cov_model(text)


@pytest.mark.parametrize("kw", [dict(replicates=0), dict(hypothesis="three"), dict(m=5),
                                dict(mean_model="exotic"), dict(n=1)])
def test_scenario_config_errors(kw):
    with pytest.raises(ConfigError):
        _spec(**kw)


@pytest.mark.parametrize("cov", ["band(rho=1.2,B=2)", "sphere(sigma=-1)", "gamma-diag"])
def test_scenario_invalid_models(cov):
    with pytest.raises(InvalidScenarioError):
        _spec(cov_model=cov)


def test_sample_gaussian_law_of_large_numbers():
    X = Hs.sample_gaussian(np.zeros(3), np.eye(3), 5000, np.random.default_rng(3))
    assert np.max(np.abs(np.cov(X.T, bias=True) - np.eye(3))) < 0.1


def test_sample_gaussian_general_covariance():
    S = Hs.band_matrix(4, 0.6, 3)
    X = Hs.sample_gaussian(np.arange(4.0), S, 20000, np.random.default_rng(4))
    np.testing.assert_allclose(X.mean(0), np.arange(4.0), atol=0.05)
    np.testing.assert_allclose(np.cov(X.T), S, atol=0.05)


@pytest.mark.parametrize("cov", [np.diag([1.0, 0.0, 2.0]), np.ones((3, 3)), np.ones((2, 3))])
def test_sample_gaussian_rank_deficient(cov):
    with pytest.raises(InvalidMatrixError):
        Hs.sample_gaussian(0.0, cov, 10, np.random.default_rng(0))


def test_sample_gaussian_deterministic():
    S = Hs.band_matrix(6, 0.4, 2)
    a = Hs.sample_gaussian(1.0, S, 10, np.random.default_rng(9))
    b = Hs.sample_gaussian(1.0, S, 10, np.random.default_rng(9))
    assert a.tobytes() == b.tobytes()


def test_size_band():
    lo, hi = Hs.size_band(0.05, 200)
    half = 3 * math.sqrt(0.05 * 0.95 / 200)
    assert (lo, hi) == pytest.approx((0.05 - half, 0.05 + half))


def test_null_cell_classification():
    lrt = MethodSpec("cramp", base="lrt-identity")
    john = MethodSpec("john")
    assert Hs.is_null_cell(_spec(), lrt)
    assert Hs.is_null_cell(_spec(cov_model="sphere(3)"), john)
    assert not Hs.is_null_cell(_spec(cov_model="sphere(3)"), lrt)
    assert not Hs.is_null_cell(_spec(cov_model="band(0.5,3)"), lrt)
    assert Hs.is_null_cell(_spec(hypothesis="two-sample"), MethodSpec("box-m"))


GRID = """
[study]
seed = 3
alpha = 0.05
replicates = 20

[scenario null]
hypothesis = one-sample
n = 20
p = 30
cov = identity

[scenario band]
n = 20
p = 30
cov = band(rho=0.8, B=10)
replicates = 10
methods = czz

[scenario two]
hypothesis = two-sample
n = 15
m = 18
p = 30
cov = sphere(2)

[method czz]

[method rp-lrt]
id = cramp
base = lrt-identity
k = 3
K = 10
n_null = 100

[method rp-box]
id = cramp
base = box-m
k = 3
K = 10
n_null = 100
"""


def test_parse_grid():
    plan = Hs.parse_grid(GRID)
    assert plan.seed == 3 and plan.alpha == 0.05
    cells = [(s.name, m.name) for s, m in plan.grid]
    assert cells == [("null", "czz"), ("null", "rp-lrt"), ("band", "czz"), ("two", "rp-box")]
    spec, method = plan.grid[1]
    assert spec.replicates == 20 and method.K == 10 and method.base == "lrt-identity"
    assert plan.grid[2][0].replicates == 10


@pytest.mark.parametrize("text", ["[study]\nseed=1\n", "[method a]\nid=czz\n",
                                  "[method a]\nid=czz\n[scenario s]\nmethods=b\n",
                                  "[method a]\nid=czz\n[scenario s]\nn=abc\n",
                                  "not an ini file"])
def test_parse_grid_errors(text):
    with pytest.raises(ConfigError):
        Hs.parse_grid(text)


def test_run_study_reproducible_and_outputs():
    plan = Hs.parse_grid(GRID)
    rows = Hs.run_study(plan.grid, plan.alpha, threads=1)
    again = Hs.run_study(plan.grid, plan.alpha, threads=3)
    assert [r.value for r in rows] == [r.value for r in again]
    assert all(r.error is None for r in rows)
    assert [r.metric for r in rows] == ["size", "size", "power", "power"]
    assert rows[1].within_band is not None and rows[0].within_band is None
    assert rows[2].value > 0.5  # strong band correlation

    parsed = list(csv.DictReader(io.StringIO(Hs.rows_to_csv(rows))))
    assert tuple(parsed[0]) == Hs.CSV_COLUMNS and len(parsed) == 4
    doc = json.loads(Hs.rows_to_json(rows, meta={"seed": 3}))
    assert doc["schema"] == "cramp.study/1" and doc["meta"]["seed"] == 3
    assert doc["rows"][3]["method"] == "rp-box"


def test_cell_errors_are_recorded():
    bad = _spec(p=30, cov_model="band(rho=0.95,B=1)", replicates=2)
    mismatch = _spec(p=30, replicates=2)
    rows = Hs.run_study([(bad, MethodSpec("czz")), (mismatch, MethodSpec("box-m"))], threads=1)
    assert "InvalidScenarioError" in rows[0].error and math.isnan(rows[0].value)
    assert "ConfigError" in rows[1].error


def test_on_row_callback():
    seen = []
    Hs.run_study([(_spec(p=10, replicates=3), MethodSpec("czz"))], threads=1, on_row=seen.append)
    assert len(seen) == 1 and seen[0].replicates == 3
