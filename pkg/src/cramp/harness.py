"""Scenario generators and the Monte-Carlo replication driver.

A study is a grid of (scenario, method) cells. For every cell the driver
draws ``replicates`` Gaussian datasets, runs the method and records the
rejection proportion together with the wall time of the cell. Population
parameters that are themselves random (gamma diagonal, uniform means,
congruence scales) are drawn once per cell; data are drawn per replicate.

Grid files
----------
INI text read with :mod:`configparser`::

    [study]
    seed = 1            ; master seed
    alpha = 0.05
    replicates = 200    ; default for every scenario
    threads = 4         ; optional worker cap

    [scenario null20]
    hypothesis = one-sample          ; or two-sample
    n = 20
    m = 20                           ; two-sample only
    p = 100
    cov = identity                   ; see parse_cov_model
    mean = zero                      ; or uniform
    replicates = 500                 ; optional override
    methods = czz, rp-lrt            ; optional; default = all compatible

    [method rp-lrt]
    id = cramp                       ; or any id accepted by MethodSpec
    base = lrt-identity
    k = 5
    K = 100
    n_null = 1000
    strategy = asymptotic            ; baselines with several strategies

Every scenario runs against each listed (or every compatible) method.
"""
import configparser
import csv
import io
import json
import logging
import math
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .engine import default_threads, null_distribution
from .errors import ConfigError, CrampError, InvalidMatrixError, InvalidScenarioError
from .methods import MethodSpec, evaluate

log = logging.getLogger(__name__)

PD_FLOOR = -1e-10
COV_KINDS = {
    "identity": (),
    "sphere": ("sigma",),
    "band": ("rho", "B"),
    "tail-diag": ("eps", "B"),
    "gamma-diag": ("B", "shape", "rate"),
    "band-congruence": ("rho", "B"),
}
COV_DEFAULTS = {
    "sphere": {"sigma": 1.0},
    "band": {"rho": 0.5, "B": 10},
    "tail-diag": {"eps": 0.5, "B": 10},
    "gamma-diag": {"B": 0.1, "shape": 4.0, "rate": 2.0},
    "band-congruence": {"rho": 0.5, "B": 0.1},
}
TWO_SAMPLE_ONLY = ("gamma-diag", "band-congruence")

# stream families, disjoint from the engine's 1..3
_FAM_DATA, _FAM_PROJ, _FAM_NULL, _FAM_MC, _FAM_POP = 21, 22, 23, 24, 25


@dataclass(frozen=True)
class CovModel:
    kind: str = "identity"
    params: tuple = ()  # sorted (name, value) pairs, hashable

    @classmethod
    def make(cls, kind, **params):
        if kind not in COV_KINDS:
            raise InvalidScenarioError(f"unknown covariance model {kind!r}")
        unknown = set(params) - set(COV_KINDS[kind])
        if unknown:
            raise InvalidScenarioError(f"{kind}: unknown parameter(s) {sorted(unknown)}")
        full = dict(COV_DEFAULTS.get(kind, {}))
        full.update({k: float(v) for k, v in params.items()})
        return cls(kind, tuple(sorted(full.items())))

    def get(self, name):
        return dict(self.params)[name]

    def label(self):
        if not self.params:
            return self.kind
        inner = ",".join(f"{k}={v:g}" for k, v in self.params)
        return f"{self.kind}({inner})"


_COV_RE = re.compile(r"^\s*([a-z-]+)\s*(?:\((.*)\))?\s*$")


def parse_cov_model(text):
    """``band(rho=0.8, B=10)``, ``band(0.8, 10)``, ``sphere(2)`` or ``identity``."""
    mt = _COV_RE.match(text)
    if not mt:
        raise InvalidScenarioError(f"cannot parse covariance model {text!r}")
    kind, inner = mt.group(1), mt.group(2)
    if kind not in COV_KINDS:
        raise InvalidScenarioError(f"unknown covariance model {kind!r}")
    params = {}
    if inner and inner.strip():
        names = COV_KINDS[kind]
        for pos, item in enumerate(s.strip() for s in inner.split(",")):
            key, sep, val = item.partition("=")
            if not sep:
                if pos >= len(names):
                    raise InvalidScenarioError(f"too many parameters in {text!r}")
                key, val = names[pos], item
            try:
                params[key.strip()] = float(val)
            except ValueError:
                raise InvalidScenarioError(f"non-numeric parameter in {text!r}") from None
    return CovModel.make(kind, **params)


@dataclass(frozen=True)
class ScenarioSpec:
    hypothesis: str = "one-sample"
    n: int = 20
    p: int = 100
    m: Optional[int] = None
    cov_model: CovModel = field(default_factory=CovModel)
    mean_model: str = "zero"
    replicates: int = 200
    seed: int = 0
    name: Optional[str] = None

    def __post_init__(self):
        if isinstance(self.cov_model, str):
            object.__setattr__(self, "cov_model", parse_cov_model(self.cov_model))
        if self.hypothesis not in ("one-sample", "two-sample"):
            raise ConfigError(f"hypothesis must be one-sample or two-sample, got {self.hypothesis!r}")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1; an empty cell has no rejection rate")
        if self.n < 2 or self.p < 1:
            raise ConfigError("need n >= 2 and p >= 1")
        if self.hypothesis == "two-sample":
            if self.m is None:
                object.__setattr__(self, "m", self.n)
            if self.m < 2:
                raise ConfigError("need m >= 2")
        else:
            if self.m is not None:
                raise ConfigError("m only applies to two-sample scenarios")
            if self.cov_model.kind in TWO_SAMPLE_ONLY:
                raise InvalidScenarioError(f"{self.cov_model.kind} defines a pair of covariances")
        if self.mean_model not in ("zero", "uniform"):
            raise ConfigError(f"mean model must be zero or uniform, got {self.mean_model!r}")
        kind = self.cov_model.kind
        if kind in ("band", "band-congruence"):
            rho, B = self.cov_model.get("rho"), self.cov_model.get("B")
            if not (0 <= rho < 1) or B < 0:
                raise InvalidScenarioError(f"band needs 0 <= rho < 1 and B >= 0, got rho={rho}, B={B}")
        if kind == "tail-diag" and (self.cov_model.get("B") < 0 or self.cov_model.get("eps") <= -1):
            raise InvalidScenarioError("tail-diag needs B >= 0 and eps > -1")
        if kind == "sphere" and self.cov_model.get("sigma") <= 0:
            raise InvalidScenarioError("sphere needs sigma > 0")
        if kind == "gamma-diag" and not (0 <= self.cov_model.get("B") <= 1):
            raise InvalidScenarioError("gamma-diag needs 0 <= B <= 1")

    @property
    def two_sample(self):
        return self.hypothesis == "two-sample"

    @property
    def label(self):
        return self.name or f"{self.hypothesis}:{self.cov_model.label()}"

    def with_(self, **kw):
        from dataclasses import replace
        return replace(self, **kw)


# ------------------------------------------------------------ covariances


def band_matrix(p, rho, width):
    d = np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
    return np.where(d <= width, rho ** d.astype(float), 0.0)


def check_pd(S, what):
    lam = np.linalg.eigvalsh(S)[0]
    if lam <= PD_FLOOR:
        raise InvalidScenarioError(f"{what} is not positive definite (min eigenvalue {lam:.3g})")
    return S


def _one_sample_cov(model, p):
    kind = model.kind
    if kind == "identity":
        return np.eye(p)
    if kind == "sphere":
        return model.get("sigma") ** 2 * np.eye(p)
    if kind == "band":
        rho, B = model.get("rho"), model.get("B")
        return check_pd(band_matrix(p, rho, B), f"band matrix (rho={rho:g}, B={B:g})")
    if kind == "tail-diag":
        eps, B = model.get("eps"), model.get("B")
        d = np.ones(p)
        d[int(B):] += eps  # 1-based entries B+1..p
        return np.diag(d)
    raise InvalidScenarioError(f"{kind} is a two-sample model")


def build_covariance(spec, rng):
    """Population covariance of a scenario: one matrix, or a pair for two samples.

    Two-sample scenarios with a one-sample model compare I_p against that
    model, so ``identity`` gives the null Sigma_1 = Sigma_2 = I_p.
    """
    model, p = spec.cov_model, spec.p
    if not spec.two_sample:
        return _one_sample_cov(model, p)
    if model.kind == "gamma-diag":
        keep = int(math.floor(model.get("B") * p))
        d = np.ones(p)
        d[keep:] = rng.gamma(model.get("shape"), 1.0 / model.get("rate"), size=p - keep)
        return np.eye(p), np.diag(d)
    if model.kind == "band-congruence":
        rho, B = model.get("rho"), model.get("B")
        scale = rng.uniform(1.0, 3.0, size=p)
        omega = band_matrix(p, rho, math.floor(B * p))
        check_pd(omega, f"band matrix Omega (rho={rho:g}, B={B:g})")
        root = np.sqrt(scale)
        S2 = root[:, None] * omega * root[None, :]
        return np.diag(scale), check_pd(S2, f"congruence covariance (rho={rho:g}, B={B:g})")
    return np.eye(p), _one_sample_cov(model, p)


def build_mean(spec, rng, p=None):
    p = spec.p if p is None else p
    if spec.mean_model == "zero":
        return np.zeros(p)
    return rng.uniform(-3.0, 3.0, size=p)


def gaussian_factor(cov):
    """Left factor F with F F^T = cov; diagonal inputs skip the Cholesky."""
    cov = np.asarray(cov, dtype=np.float64)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise InvalidMatrixError(f"covariance must be square, got shape {cov.shape}")
    off = cov - np.diag(np.diag(cov))
    if not np.any(off):
        d = np.diag(cov)
        if np.any(d <= 0):
            raise InvalidMatrixError("covariance is not positive definite (zero or negative variance)")
        return np.sqrt(d)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise InvalidMatrixError("covariance is not positive definite; factorization failed") from None


def sample_gaussian(mean, cov, n, rng, factor=None):
    """n i.i.d. rows from N(mean, cov). ``factor`` reuses a precomputed factor."""
    F = gaussian_factor(cov) if factor is None else factor
    p = F.shape[0]
    mean = np.broadcast_to(np.asarray(mean, dtype=np.float64), (p,))
    Z = rng.standard_normal((n, p))
    return mean + (Z * F if F.ndim == 1 else Z @ F.T)


# ------------------------------------------------------------------ study


@dataclass
class StudyRow:
    scenario: str
    hypothesis: str
    cov_model: str
    n: int
    m: Optional[int]
    p: int
    k: Optional[int]
    K: Optional[int]
    method: str
    metric: str
    value: float
    replicates: int
    rejections: int
    wall_time: float
    within_band: Optional[bool] = None
    error: Optional[str] = None

    def to_dict(self):
        return asdict(self)


CSV_COLUMNS = tuple(StudyRow.__dataclass_fields__)


def size_band(alpha, R):
    half = 3 * math.sqrt(alpha * (1 - alpha) / R)
    return alpha - half, alpha + half


def is_null_cell(spec, method):
    """Whether the scenario satisfies the null hypothesis the method tests."""
    model = spec.cov_model
    if method.two_sample:
        return model.kind == "identity" or (model.kind == "sphere" and model.get("sigma") == 1)
    hyp = method.hypothesis
    if model.kind == "identity":
        return True
    if model.kind == "sphere":
        return hyp == "one-sample-sphericity" or model.get("sigma") == 1
    if model.kind == "band":
        return model.get("rho") == 0 or model.get("B") == 0
    if model.kind == "tail-diag":
        return model.get("eps") == 0 or model.get("B") >= spec.p
    return False


def _seed_int(seed, *key):
    state = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=key).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])


def _gen(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=key))


def _run_cell(cell, spec, method, alpha, threads):
    t0 = time.perf_counter()
    metric = "size" if is_null_cell(spec, method) else "power"
    base = dict(scenario=spec.label, hypothesis=spec.hypothesis, cov_model=spec.cov_model.label(),
                n=spec.n, m=spec.m, p=spec.p,
                k=method.k if method.id == "cramp" else None,
                K=method.K if method.id == "cramp" else None,
                method=method.name, metric=metric, replicates=spec.replicates)
    try:
        if method.two_sample != spec.two_sample:
            raise ConfigError(f"method {method.name} does not fit a {spec.hypothesis} scenario")
        pop = _gen(spec.seed, _FAM_POP, cell)
        covs = build_covariance(spec, pop)
        if spec.two_sample:
            factors = (gaussian_factor(covs[0]), gaussian_factor(covs[1]))
            means = (build_mean(spec, pop), build_mean(spec, pop))
        else:
            factors = (gaussian_factor(covs),)
            means = (build_mean(spec, pop),)
        null_seed = _seed_int(spec.seed, _FAM_NULL, cell)
        if method.id == "cramp":
            cfg = method.cramp_config(alpha, 0, null_seed, threads)
            null_distribution(spec.n, spec.p, cfg, m=spec.m)  # one critical value per cell

        def one(rep):
            g = _gen(spec.seed, _FAM_DATA, cell, rep)
            X = sample_gaussian(means[0], None, spec.n, g, factor=factors[0])
            Y = None if not spec.two_sample else sample_gaussian(means[1], None, spec.m, g, factor=factors[1])
            out = evaluate(method, X, Y, alpha=alpha, seed=_seed_int(spec.seed, _FAM_PROJ, cell, rep),
                           null_seed=null_seed, threads=1, rng=_gen(spec.seed, _FAM_MC, cell, rep))
            return out.decision

        workers = default_threads() if threads is None else threads
        reps = range(spec.replicates)
        if workers <= 1:
            decisions = [one(r) for r in reps]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                decisions = list(pool.map(one, reps))
        hits = int(sum(decisions))
        value = hits / spec.replicates
        band = None
        if metric == "size" and method.id == "cramp":
            lo, hi = size_band(alpha, spec.replicates)
            band = lo <= value <= hi
        return StudyRow(**base, value=value, rejections=hits, within_band=band,
                        wall_time=time.perf_counter() - t0)
    except (CrampError, np.linalg.LinAlgError, FloatingPointError) as exc:
        log.warning("cell %d (%s, %s) failed: %s", cell, spec.label, method.name, exc)
        return StudyRow(**base, value=float("nan"), rejections=0,
                        wall_time=time.perf_counter() - t0, error=f"{type(exc).__name__}: {exc}")


def iter_study(grid, alpha=0.05, threads=None):
    """Yield one StudyRow per (scenario, method) cell, in grid order."""
    for cell, (spec, method) in enumerate(grid):
        yield _run_cell(cell, spec, method, alpha, threads)


def run_study(grid, alpha=0.05, threads=None, on_row=None):
    rows = []
    for row in iter_study(grid, alpha, threads):
        rows.append(row)
        if on_row is not None:
            on_row(row)
    return rows


# ------------------------------------------------------------- grid files


@dataclass
class StudyPlan:
    grid: list
    alpha: float = 0.05
    seed: int = 0
    threads: Optional[int] = None


def _int(section, key, default=None):
    if key not in section:
        return default
    try:
        return int(section[key])
    except ValueError:
        raise ConfigError(f"[{section.name}] {key} must be an integer, got {section[key]!r}") from None


def _float(section, key, default=None):
    if key not in section:
        return default
    try:
        return float(section[key])
    except ValueError:
        raise ConfigError(f"[{section.name}] {key} must be a number, got {section[key]!r}") from None


def parse_grid(text):
    """Parse the INI grid description documented in the module docstring."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str  # keep K and k distinct
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed grid file: {exc}") from None
    study = cp["study"] if cp.has_section("study") else cp[cp.default_section]
    seed = _int(study, "seed", 0)
    alpha = _float(study, "alpha", 0.05)
    default_reps = _int(study, "replicates", 200)
    threads = _int(study, "threads")

    methods = {}
    for sec in cp.sections():
        if not sec.startswith("method "):
            continue
        s = cp[sec]
        name = sec.split(None, 1)[1].strip()
        kw = {"id": s.get("id", name), "label": name}
        if "base" in s:
            kw["base"] = s["base"]
        for key in ("k", "K", "n_null", "n_mc"):
            if key in s:
                kw[key] = _int(s, key)
        if "strategy" in s:
            kw["strategy"] = s["strategy"]
        methods[name] = MethodSpec(**kw)
    if not methods:
        raise ConfigError("grid file defines no [method ...] sections")

    grid = []
    for sec in cp.sections():
        if not sec.startswith("scenario "):
            continue
        s = cp[sec]
        name = sec.split(None, 1)[1].strip()
        spec = ScenarioSpec(
            hypothesis=s.get("hypothesis", "one-sample"),
            n=_int(s, "n", 20), m=_int(s, "m"), p=_int(s, "p", 100),
            cov_model=parse_cov_model(s.get("cov", "identity")),
            mean_model=s.get("mean", "zero"),
            replicates=_int(s, "replicates", default_reps),
            seed=seed, name=name,
        )
        if "methods" in s:
            wanted = [w.strip() for w in s["methods"].split(",") if w.strip()]
            missing = [w for w in wanted if w not in methods]
            if missing:
                raise ConfigError(f"[{sec}] refers to undefined method(s) {missing}")
            chosen = [methods[w] for w in wanted]
        else:
            chosen = [mm for mm in methods.values() if mm.two_sample == spec.two_sample]
        grid.extend((spec, mm) for mm in chosen)
    if not grid:
        raise ConfigError("grid file defines no [scenario ...] sections")
    return StudyPlan(grid, alpha, seed, threads)


def load_grid(path):
    with open(path, encoding="utf-8") as fh:
        return parse_grid(fh.read())


def rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if v is None else v) for k, v in r.to_dict().items()})
    return buf.getvalue()


def rows_to_json(rows, meta=None):
    doc = {"schema": "cramp.study/1", "rows": [r.to_dict() for r in rows]}
    if meta:
        doc["meta"] = meta
    return json.dumps(doc, indent=2, allow_nan=True)
