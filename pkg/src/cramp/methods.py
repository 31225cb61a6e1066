"""Uniform front end over every test in the package.

A :class:`MethodSpec` names a test plus its tuning knobs; :func:`evaluate`
runs it on one or two datasets and returns a :class:`MethodOutcome` whose
decision is always traceable to a p-value or to a critical value.
"""
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import classical, highdim
from .engine import CrampConfig, cramp_test
from .errors import ConfigError

# id -> (hypothesis, callable(X) -> TestResult)
ONE_SAMPLE_METHODS = {
    "czz": ("one-sample-identity", lambda X: highdim.czz_one_sample(X)[1]),
    "czz-u": ("one-sample-sphericity", lambda X: highdim.czz_one_sample(X)[0]),
    "syk": ("one-sample-identity", lambda X: highdim.syk_one_sample(X)[1]),
    "syk-u": ("one-sample-sphericity", lambda X: highdim.syk_one_sample(X)[0]),
    "lw": ("one-sample-identity", highdim.lw_identity),
    "lrt-identity": ("one-sample-identity", classical.lrt_identity),
    "lrt-sphericity": ("one-sample-sphericity", classical.lrt_sphericity),
    "john": ("one-sample-sphericity", classical.john_sphericity),
    "nagao": ("one-sample-identity", classical.nagao_identity),
}

# id -> (callable(X, Y, strategy, n_mc, rng) -> TestResult, default strategy)
TWO_SAMPLE_METHODS = {
    "schott": (lambda X, Y, s, n, r: highdim.schott_two_sample(X, Y, s, n, r), "asymptotic"),
    "syk2": (lambda X, Y, s, n, r: highdim.syk_two_sample(X, Y, s, n, r), "asymptotic"),
    "lc": (lambda X, Y, s, n, r: highdim.li_chen_two_sample(X, Y, s, n, r), "asymptotic"),
    "clx": (lambda X, Y, s, n, r: highdim.clx_two_sample(X, Y, s, n, r), "analytic"),
    "box-m": (lambda X, Y, s, n, r: classical.box_m(X, Y), "asymptotic"),
    "wald": (lambda X, Y, s, n, r: classical.wald_two_sample(X, Y), "asymptotic"),
}

# shorthand used by the gene-expression workflow
ALIASES = {
    "cramp-box": ("cramp", "box-m"),
    "cramp-wald": ("cramp", "wald"),
    "cramp-lrt": ("cramp", "lrt-identity"),
    "cramp-lw": ("cramp", "lw"),
    "cramp-john": ("cramp", "john"),
}


@dataclass(frozen=True)
class MethodSpec:
    id: str
    base: Optional[str] = None
    k: int = 5
    K: int = 100
    n_null: int = 1000
    strategy: Optional[str] = None
    n_mc: int = highdim.DEFAULT_MC_REPS
    label: Optional[str] = None
    null_route: str = "auto"

    def __post_init__(self):
        if self.id in ALIASES:
            mid, base = ALIASES[self.id]
            if self.label is None:
                object.__setattr__(self, "label", self.id)
            object.__setattr__(self, "id", mid)
            object.__setattr__(self, "base", base)
        if self.id == "cramp":
            if self.base is None:
                raise ConfigError("method 'cramp' needs a base test")
            CrampConfig(k=self.k, K=self.K, n_null=self.n_null, base=self.base,
                        null_route=self.null_route)
        elif self.id not in ONE_SAMPLE_METHODS and self.id not in TWO_SAMPLE_METHODS:
            raise ConfigError(f"unknown method {self.id!r}")

    @property
    def name(self):
        if self.label:
            return self.label
        return f"cramp-{self.base}" if self.id == "cramp" else self.id

    @property
    def hypothesis(self):
        if self.id == "cramp":
            return CrampConfig(base=self.base).hypothesis
        if self.id in ONE_SAMPLE_METHODS:
            return ONE_SAMPLE_METHODS[self.id][0]
        return "two-sample"

    @property
    def two_sample(self):
        return self.hypothesis == "two-sample"

    def cramp_config(self, alpha=0.05, seed=0, null_seed=None, threads=None, cache=True):
        return CrampConfig(k=self.k, K=self.K, n_null=self.n_null, alpha=alpha, seed=seed,
                           null_seed=null_seed, base=self.base, threads=threads, cache=cache,
                           null_route=self.null_route)

    def to_dict(self):
        return asdict(self)


@dataclass
class MethodOutcome:
    method: str
    decision: bool
    p_value: Optional[float] = None
    statistic: Optional[float] = None
    critical_value: Optional[float] = None
    mean_p: Optional[float] = None
    strategy: Optional[str] = None

    def to_dict(self):
        out = {"method": self.method, "reject": bool(self.decision)}
        for key in ("p_value", "statistic", "critical_value", "mean_p", "strategy"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        return out


def evaluate(spec, X, Y=None, alpha=0.05, seed=0, null_seed=None, threads=None, rng=None,
             cache=True):
    """Run ``spec`` and decide at level ``alpha``.

    ``seed`` drives the projections of the observed data (CRAMP only);
    ``null_seed`` the simulated null, so repeated calls can share one
    critical value. ``rng`` feeds monte-carlo strategies.
    """
    if spec.two_sample != (Y is not None):
        want = "two samples" if spec.two_sample else "one sample"
        raise ConfigError(f"method {spec.name!r} needs {want}")
    if spec.id == "cramp":
        cfg = spec.cramp_config(alpha, seed, null_seed, threads, cache)
        out = cramp_test(X, Y, cfg)
        return MethodOutcome(spec.name, out.reject, critical_value=out.critical_value,
                             mean_p=out.mean_p, strategy="empirical")
    if spec.id in ONE_SAMPLE_METHODS:
        res = ONE_SAMPLE_METHODS[spec.id][1](X)
    else:
        fn, default = TWO_SAMPLE_METHODS[spec.id]
        strategy = spec.strategy or default
        if rng is None:
            rng = np.random.default_rng(seed)
        res = fn(X, Y, strategy, spec.n_mc, rng)
    return MethodOutcome(spec.name, bool(res.p_value <= alpha), p_value=float(res.p_value),
                         statistic=float(res.statistic), strategy=res.strategy)
