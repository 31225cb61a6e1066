"""Two-group covariance analysis of expression matrices.

``compare_groups`` runs a list of two-sample methods on two labelled
groups. ``split_type1_study`` repeatedly splits one group into two parts
and records how often each method rejects, which estimates the type-I
error when the group is homogeneous and flags heterogeneity when it is not.
"""
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .engine import CrampConfig, default_threads, null_distribution
from .errors import ArgumentError, ConfigError, SampleSizeError
from .methods import MethodSpec, evaluate

REPORT_SCHEMA = "cramp.report/1"
DEFAULT_METHODS = ("syk", "schott", "lc", "clx", "cramp-box", "cramp-wald")
_FAM_SPLIT_PROJ = 31


@dataclass
class AnalysisReport:
    kind: str
    alpha: float
    results: list = field(default_factory=list)  # MethodOutcome dicts
    bootstrap: Optional[dict] = None
    provenance: dict = field(default_factory=dict)
    schema: str = REPORT_SCHEMA

    def to_dict(self):
        out = {"schema": self.schema, "kind": self.kind, "alpha": self.alpha,
               "results": self.results}
        if self.bootstrap is not None:
            out["bootstrap"] = self.bootstrap
        out["provenance"] = self.provenance
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    def decisions(self):
        return {r["method"]: r["reject"] for r in self.results if "reject" in r}


def select_top_genes(m, p):
    """Keep the ``p`` genes with the largest minimum over samples.

    Ties keep the earlier column; survivors stay in their original order,
    which makes the selection idempotent.
    """
    g = m.values.shape[1]
    if not 1 <= p <= g:
        raise ArgumentError(f"cannot keep {p} genes out of {g}")
    mins = m.values.min(axis=0)
    order = np.argsort(-mins, kind="stable")[:p]
    return m.subset_genes(np.sort(order))


def method_specs(ids, cfg):
    """Two-sample MethodSpecs for the ids used by the gene workflow."""
    specs = []
    for mid in ids:
        if isinstance(mid, MethodSpec):
            specs.append(mid)
            continue
        real = "syk2" if mid == "syk" else mid
        spec = MethodSpec(real, k=cfg.k, K=cfg.K, n_null=cfg.n_null, label=mid,
                          null_route=cfg.null_route)
        if not spec.two_sample:
            raise ConfigError(f"method {mid!r} is not a two-sample test")
        specs.append(spec)
    if not specs:
        raise ConfigError("no methods requested")
    return specs


def _provenance(m, cfg, extra=None):
    out = {"package_version": __version__, "input_digest": m.digest, "seed": cfg.seed,
           "config": {k: v for k, v in cfg.to_dict().items()
                      if k not in ("base", "hypothesis", "threads", "cache", "cache_dir")},
           "genes": len(m.gene_ids), "samples": len(m.sample_ids), "dropped_samples": m.dropped}
    if extra:
        out.update(extra)
    return out


def compare_groups(m, groupA, groupB, methods=DEFAULT_METHODS, cfg=None):
    cfg = cfg or CrampConfig()
    X, Y = m.group(groupA), m.group(groupB)
    specs = method_specs(methods, cfg)
    results = []
    for spec in specs:
        out = evaluate(spec, X, Y, alpha=cfg.alpha, seed=cfg.seed, null_seed=cfg.null_seed,
                       threads=cfg.threads, rng=np.random.default_rng([cfg.seed, 1]),
                       cache=cfg.cache)
        results.append(out.to_dict())
    prov = _provenance(m, cfg, {"groups": [groupA, groupB], "group_sizes": [len(X), len(Y)]})
    return AnalysisReport("compare", cfg.alpha, results, provenance=prov)


def _draw_splits(n, reps, rng, subsample):
    """Index pairs for every replicate plus a description of how they were drawn."""
    splits = []
    if subsample is None:
        half = n // 2
        for _ in range(reps):
            perm = rng.permutation(n)
            splits.append((perm[:half], perm[half:2 * half]))
        return splits, "equal halves, disjoint"
    if subsample < 2:
        raise ArgumentError("subsample size must be >= 2")
    if 2 * subsample <= n:
        how = "disjoint, without replacement"
    elif subsample <= n:
        how = "each without replacement, overlapping"
    else:
        how = "with replacement"
    for _ in range(reps):
        if 2 * subsample <= n:
            perm = rng.permutation(n)
            splits.append((perm[:subsample], perm[subsample:2 * subsample]))
        else:
            replace = subsample > n
            splits.append((rng.choice(n, subsample, replace=replace),
                           rng.choice(n, subsample, replace=replace)))
    return splits, f"subsamples of {subsample}, {how}"


def split_type1_study(m, group, reps, cfg=None, rng=None, methods=("cramp-box",), subsample=None):
    """Rejection proportion of each method over ``reps`` random splits of ``group``.

    Splits are drawn up front from ``rng`` (default: seeded by ``cfg.seed``);
    CRAMP projections for replicate r use their own stream, and every
    replicate shares one simulated critical value, so the outcome does not
    depend on the number of worker threads.
    """
    cfg = cfg or CrampConfig()
    if reps < 1:
        raise ConfigError("reps must be >= 1")
    G = m.group(group)
    n = G.shape[0]
    if n < 4:
        raise SampleSizeError(f"group {group!r} has {n} samples; at least 4 are needed")
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng([cfg.seed if rng is None else int(rng), 2])
    specs = method_specs(methods, cfg)
    splits, how = _draw_splits(n, reps, rng, subsample)
    sizes = (len(splits[0][0]), len(splits[0][1]))
    null_seed = cfg.effective_null_seed
    for spec in specs:
        if spec.id == "cramp":
            null_distribution(sizes[0], G.shape[1], spec.cramp_config(cfg.alpha, cfg.seed, null_seed,
                                                                      cfg.threads, cfg.cache),
                              m=sizes[1])
    mc_seeds = rng.integers(0, 2**63 - 1, size=reps)

    def one(r):
        a, b = splits[r]
        row = []
        for spec in specs:
            seed = int(np.random.SeedSequence(cfg.seed, spawn_key=(_FAM_SPLIT_PROJ, r)).generate_state(1)[0])
            out = evaluate(spec, G[a], G[b], alpha=cfg.alpha, seed=seed, null_seed=null_seed,
                           threads=1, rng=np.random.default_rng(int(mc_seeds[r])), cache=cfg.cache)
            row.append(out.decision)
        return row

    workers = default_threads() if cfg.threads is None else cfg.threads
    if workers <= 1:
        table = [one(r) for r in range(reps)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            table = list(pool.map(one, range(reps)))
    hits = np.sum(np.array(table, dtype=bool), axis=0)
    results = [{"method": spec.name, "rejections": int(h), "rejection_proportion": float(h / reps)}
               for spec, h in zip(specs, hits)]
    boot = {"replicates": reps, "group": group, "group_size": n, "split_sizes": list(sizes),
            "sampling": how,
            "rejection_proportion": {r["method"]: r["rejection_proportion"] for r in results}}
    prov = _provenance(m, cfg, {"group": group})
    return AnalysisReport("split-type1", cfg.alpha, results, bootstrap=boot, provenance=prov)
