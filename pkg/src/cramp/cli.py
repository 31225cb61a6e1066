"""Command-line entry point: ``cramp {test1,test2,simulate,nulldist,genes}``.

Exit status is 0 on success, 2 for configuration or argument problems and
3 when the input data cannot be read or does not support the request.
Reports are JSON documents carrying a ``provenance`` block whose ``argv``
entry re-runs the command and reproduces every number.
"""
import argparse
import csv
import io
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .dataio import load_matrix
from .engine import CrampConfig, critical_value, null_distribution
from .errors import ArgumentError, ConfigError, CrampError
from .genes import DEFAULT_METHODS, AnalysisReport, compare_groups, select_top_genes, split_type1_study
from .harness import load_grid, rows_to_csv, rows_to_json, run_study
from .methods import MethodSpec, evaluate

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3
RESULT_COLUMNS = ("method", "reject", "p_value", "statistic", "critical_value", "mean_p",
                  "strategy", "rejections", "rejection_proportion")

log = logging.getLogger("cramp")


class DataMismatch(CrampError):
    """Inputs that parse individually but cannot be analysed together."""


def _positive(text):
    val = int(text)
    if val < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return val


def _common(p, method_default):
    g = p.add_argument_group("projection settings")
    g.add_argument("-k", "--proj-dim", type=_positive, default=5, help="projected dimension k")
    g.add_argument("-K", "--projections", type=_positive, default=100, help="projections per test")
    g.add_argument("--null-reps", type=_positive, default=1000, help="null replicates for the critical value")
    g.add_argument("--null-route", default="auto", choices=("auto", "reduced", "direct", "printed"))
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=_positive, default=None,
                   help="worker cap (default: $CRAMP_THREADS or all cores); never changes results")
    p.add_argument("--method", default=method_default,
                   help="comma-separated method ids")
    p.add_argument("--output", "-o", default="-", help="output file (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--cache-dir", default=None, help="null-distribution cache directory")
    p.add_argument("--no-cache", action="store_true", help="do not read or write the null cache")


def _input_opts(p, second=False):
    p.add_argument("--input", "-i", required=True, help="delimited data file")
    if second:
        p.add_argument("--input2", help="second group (alternatively use --groups)")
        p.add_argument("--groups", help="two labels A,B selecting the groups in --input")
    p.add_argument("--delimiter", default=",", help="field separator; 'tab' for TSV")
    p.add_argument("--orientation", choices=("samples", "genes"), default="samples",
                   help="whether rows are samples or genes")
    p.add_argument("--no-header", action="store_true")
    p.add_argument("--label-column", default="label")


def build_parser():
    parser = argparse.ArgumentParser(prog="cramp", description="Random-projection covariance tests")
    parser.add_argument("--version", action="version", version=f"cramp {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p1 = sub.add_parser("test1", help="one-sample test of identity or sphericity")
    _input_opts(p1)
    _common(p1, "cramp")
    p1.add_argument("--base", default="lrt-identity", help="base test for cramp")
    p1.add_argument("--strategy", default=None)

    p2 = sub.add_parser("test2", help="two-sample test of equal covariances")
    _input_opts(p2, second=True)
    _common(p2, "cramp-box")
    p2.add_argument("--strategy", default=None,
                    help="asymptotic, monte-carlo or analytic for the baselines that support it")
    p2.add_argument("--mc-reps", type=_positive, default=500)

    ps = sub.add_parser("simulate", help="run a simulation grid")
    ps.add_argument("--config", "-c", required=True, help="INI grid file")
    ps.add_argument("--seed", type=int, default=None, help="override the grid's master seed")
    ps.add_argument("--threads", type=_positive, default=None)
    ps.add_argument("--output", "-o", default="-")
    ps.add_argument("--format", choices=("json", "csv"), default="csv")

    pn = sub.add_parser("nulldist", help="simulate (and cache) a null distribution")
    pn.add_argument("--n", type=_positive, required=True)
    pn.add_argument("--m", type=_positive, default=None)
    pn.add_argument("--p", type=_positive, required=True)
    pn.add_argument("--base", default="lrt-identity")
    _common(pn, None)

    pg = sub.add_parser("genes", help="two-group expression workflow")
    _input_opts(pg)
    _common(pg, ",".join(DEFAULT_METHODS))
    pg.add_argument("--groups", required=True, help="labels A,B of the groups to compare")
    pg.add_argument("--top", type=_positive, default=2000, help="genes kept by minimum intensity")
    pg.add_argument("--split-group", default=None, help="group used for the split study (default: B)")
    pg.add_argument("--split-reps", type=int, default=200, help="0 skips the split study")
    pg.add_argument("--split-methods", default="cramp-box,cramp-wald")
    pg.add_argument("--subsample", type=_positive, default=None,
                    help="draw two subsamples of this size instead of equal halves")
    return parser


def _config(args, base="lrt-identity"):
    return CrampConfig(k=args.proj_dim, K=args.projections, n_null=args.null_reps, alpha=args.alpha,
                       seed=args.seed, base=base, null_route=args.null_route, threads=args.threads,
                       cache=not args.no_cache, cache_dir=args.cache_dir)


def _methods(text):
    ids = [t.strip() for t in (text or "").split(",") if t.strip()]
    if not ids:
        raise ConfigError("no methods given")
    return ids


def _load(args, path=None):
    return load_matrix(path or args.input, delimiter=args.delimiter, orientation=args.orientation,
                       header=not args.no_header, label_column=args.label_column)


def _emit(text, dest):
    if dest == "-":
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(dest, "w", encoding="utf-8") as fh:
            fh.write(text)


def results_to_csv(results):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=RESULT_COLUMNS, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in results:
        w.writerow(r)
    return buf.getvalue()


def _write_report(report, args):
    if args.format == "csv":
        rows = list(report.results)
        _emit(results_to_csv(rows), args.output)
    else:
        _emit(report.to_json(), args.output)


def _spec(mid, args, base=None):
    if mid == "cramp":
        return MethodSpec("cramp", base=base, k=args.proj_dim, K=args.projections, n_null=args.null_reps,
                          null_route=args.null_route)
    real = "syk2" if mid == "syk" and getattr(args, "command", "") == "test2" else mid
    return MethodSpec(real, k=args.proj_dim, K=args.projections, n_null=args.null_reps,
                      strategy=getattr(args, "strategy", None), n_mc=getattr(args, "mc_reps", 500),
                      label=mid, null_route=args.null_route)


def _provenance(args, argv, digests, cfg):
    return {"package_version": __version__, "argv": list(argv), "seed": args.seed,
            "input_digest": digests, "config": cfg.to_dict() if cfg else None}


def cmd_test1(args, argv):
    mat = _load(args)
    cfg = _config(args, args.base)
    results = []
    for mid in _methods(args.method):
        spec = _spec(mid, args, base=args.base)
        if spec.two_sample:
            raise ConfigError(f"method {mid!r} is a two-sample test; use test2")
        out = evaluate(spec, mat.values, alpha=args.alpha, seed=args.seed, threads=args.threads,
                       cache=cfg.cache)
        results.append(out.to_dict())
    report = AnalysisReport("test1", args.alpha, results,
                            provenance=_provenance(args, argv, [mat.digest], cfg))
    _write_report(report, args)


def cmd_test2(args, argv):
    if args.input2 and args.groups:
        raise ConfigError("use either --input2 or --groups, not both")
    if args.input2:
        a, b = _load(args), _load(args, args.input2)
        if a.gene_ids != b.gene_ids:
            raise DataMismatch("the two inputs do not share the same variables")
        X, Y, digests = a.values, b.values, [a.digest, b.digest]
    elif args.groups:
        mat = _load(args)
        ga, gb = _two_groups(args.groups)
        X, Y, digests = mat.group(ga), mat.group(gb), [mat.digest]
    else:
        raise ConfigError("test2 needs --input2 or --groups")
    results = []
    cfg = None
    for mid in _methods(args.method):
        spec = _spec(mid, args, base="box-m")
        if not spec.two_sample:
            raise ConfigError(f"method {mid!r} is a one-sample test; use test1")
        if spec.id == "cramp":
            cfg = spec.cramp_config(args.alpha, args.seed)
        out = evaluate(spec, X, Y, alpha=args.alpha, seed=args.seed, threads=args.threads,
                       rng=np.random.default_rng([args.seed, 1]), cache=not args.no_cache)
        results.append(out.to_dict())
    cfg = cfg or _config(args, "box-m")
    report = AnalysisReport("test2", args.alpha, results,
                            provenance=_provenance(args, argv, digests, cfg))
    _write_report(report, args)


def _two_groups(text):
    parts = [t.strip() for t in text.split(",")]
    if len(parts) != 2 or not all(parts):
        raise ConfigError(f"--groups expects two labels A,B, got {text!r}")
    return parts


def cmd_simulate(args, argv):
    plan = load_grid(args.config)
    if args.seed is not None:
        plan.grid = [(s.with_(seed=args.seed), m) for s, m in plan.grid]
    threads = args.threads if args.threads is not None else plan.threads

    def progress(row):
        log.info("%s / %s: %s = %.3f (%.1fs)%s", row.scenario, row.method, row.metric, row.value,
                 row.wall_time, f" ERROR {row.error}" if row.error else "")

    rows = run_study(plan.grid, alpha=plan.alpha, threads=threads, on_row=progress)
    if args.format == "csv":
        _emit(rows_to_csv(rows), args.output)
    else:
        _emit(rows_to_json(rows, {"argv": list(argv), "package_version": __version__}), args.output)


def cmd_nulldist(args, argv):
    cfg = _config(args, args.base)
    sample = null_distribution(args.n, args.p, cfg, m=args.m)
    q = critical_value(sample, cfg.alpha)
    doc = {"schema": "cramp.nulldist/1", "critical_value": q, "alpha": cfg.alpha,
           "n": args.n, "m": args.m, "p": args.p, "config": cfg.to_dict(),
           "null_mean": float(np.mean(sample)), "null_sd": float(np.std(sample, ddof=1))}
    if args.format == "csv":
        _emit("n,m,p,base,k,K,n_null,alpha,critical_value\n"
              f"{args.n},{'' if args.m is None else args.m},{args.p},{args.base},{cfg.k},{cfg.K},"
              f"{cfg.n_null},{cfg.alpha},{q!r}\n", args.output)
    else:
        _emit(json.dumps(doc, indent=2), args.output)


def cmd_genes(args, argv):
    mat = _load(args)
    ga, gb = _two_groups(args.groups)
    top = min(args.top, len(mat.gene_ids))
    mat = select_top_genes(mat, top)
    cfg = _config(args, "box-m")
    cmp_report = compare_groups(mat, ga, gb, _methods(args.method), cfg)
    boot = None
    if args.split_reps < 0:
        raise ConfigError("--split-reps must be >= 0")
    if args.split_reps:
        split = split_type1_study(mat, args.split_group or gb, args.split_reps, cfg,
                                  methods=_methods(args.split_methods), subsample=args.subsample)
        boot = dict(split.bootstrap)
        boot["methods"] = split.results
    prov = _provenance(args, argv, [mat.digest], cfg)
    prov.update({"genes_kept": top, "groups": [ga, gb], "dropped_samples": mat.dropped})
    report = AnalysisReport("genes", args.alpha, cmp_report.results, bootstrap=boot, provenance=prov)
    _write_report(report, args)


COMMANDS = {"test1": cmd_test1, "test2": cmd_test2, "simulate": cmd_simulate,
            "nulldist": cmd_nulldist, "genes": cmd_genes}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "cache_dir", None):
        os.environ["CRAMP_CACHE_DIR"] = args.cache_dir
    try:
        COMMANDS[args.command](args, argv)
    except (ConfigError, ArgumentError) as exc:
        print(f"cramp: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CrampError, OSError) as exc:
        print(f"cramp: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
