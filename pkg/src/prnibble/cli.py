"""``nibble`` command line entry point.

Exit codes: 0 success, 2 validation error, 3 PageRank non-convergence.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import sampler, sbm, theory
from .errors import NonConvergenceError, ValidationError
from .experiments import ExperimentConfig, PartialResults, run_experiment, write_rows, write_vertices
from .nibble import classify, default_threshold
from .pagerank import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    personalized_pagerank,
    read_personalization,
    seed_personalization,
    uniform_personalization,
)

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED = 0, 2, 3


def _out_handle(path: Optional[str]):
    if path in (None, "-"):
        return contextlib.nullcontext(sys.stdout)
    return open(path, "w", newline="", encoding="utf-8")


def _parse_grid(spec: str):
    """``name=start:stop:step`` -> (name, values), stop inclusive."""
    try:
        name, rng = spec.split("=", 1)
        start, stop, step = (float(x) for x in rng.split(":"))
    except ValueError:
        raise ValidationError(f"bad grid {spec!r}; expected name=start:stop:step") from None
    if name not in ("a", "b", "s", "c") or step <= 0 or stop < start:
        raise ValidationError(f"bad grid {spec!r}")
    k = int(np.floor((stop - start) / step + 1e-9))
    return name, np.round(start + step * np.arange(k + 1), 12)


# -- subcommands --------------------------------------------------------------------


def cmd_generate(args) -> int:
    params = sbm.ModelParams(args.n, args.a, args.b, args.s, args.c)
    g = sbm.generate(params, args.seed, method=args.method, random_seeds=args.random_seeds)
    sbm.save(g, args.out)
    st = sbm.degree_stats(g)
    logging.info("wrote %s: %d edges, %d dangling", args.out, st.n_edges, st.dangling)
    return EXIT_OK


def _personalization(args, g):
    if args.personalization == "seeds":
        return seed_personalization(g)
    if args.personalization == "uniform":
        return uniform_personalization(g)
    if not args.personalization_file:
        raise ValidationError("--personalization file needs --personalization-file")
    return read_personalization(args.personalization_file, g.n)


def cmd_pagerank(args) -> int:
    g = sbm.load(args.graph)
    pr = personalized_pagerank(g, _personalization(args, g), args.c, args.tol, args.max_iter, args.dangling)
    with _out_handle(args.out) as fh:
        write_vertices(fh, g, pr.R)
    if not pr.converged:
        logging.error("no convergence after %d sweeps (residual %.3g)", pr.iterations, pr.residual)
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_classify(args) -> int:
    g = sbm.load(args.graph)
    pr = personalized_pagerank(g, seed_personalization(g), args.c, args.tol, args.max_iter)
    thresholds: List[float] = []
    for tok in args.x0.split(","):
        if tok == "auto":
            s = g.params.s if g.params is not None else g.seeds.size / max(1, int((g.labels == 1).sum()))
            thresholds.append(default_threshold(s))
        else:
            try:
                thresholds.append(float(tok))
            except ValueError:
                raise ValidationError(f"bad --x0 value {tok!r}") from None
    rows = [classify(pr, g, x).row() for x in thresholds]
    with _out_handle(args.out) as fh:
        write_rows(fh, rows)
    if not pr.converged:
        logging.error("no convergence after %d sweeps (residual %.3g)", pr.iterations, pr.residual)
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_theory(args) -> int:
    base = {"a": args.a, "b": args.b, "s": args.s, "c": args.c}
    points = [dict(base)]
    if args.grid:
        name, values = _parse_grid(args.grid)
        points = [dict(base, **{name: float(v)}) for v in values]
    rows = [theory.theory_stats(p["a"], p["b"], p["s"], p["c"]).as_dict() for p in points]
    with _out_handle(args.out) as fh:
        write_rows(fh, rows)
    return EXIT_OK


def cmd_sample_fp(args) -> int:
    p = sampler.FpParams(args.a, args.b, args.s, args.c, n_samples=args.n_samples,
                         depth=args.depth, tol=args.tol, rng_seed=args.seed)
    if args.community == "both":
        dists = sampler.sample_both(p, args.method)
    else:
        k = int(args.community)
        dists = {k: sampler.sample_limit_pagerank(p, k, args.method)}
    depth = p.resolved_depth
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("community,value\n")
        for k, d in dists.items():
            for x in d.samples.tolist():
                fh.write(f"{k},{x!r}\n")
    summary = {
        "n_samples": p.n_samples, "depth": depth, "tol": p.tol, "rng_seed": p.rng_seed,
        "truncation_bound": sampler.truncation_bound(p.c, depth),
        "communities": {
            str(k): {"mean": d.mean(), "var": d.var(), "std_err": d.std_err(), "method": d.meta.get("method")}
            for k, d in dists.items()
        },
    }
    summary_path = args.summary or str(Path(args.out).with_suffix(".json"))
    Path(summary_path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_experiment(args) -> int:
    overrides = {}
    if args.config:
        try:
            overrides = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {args.config}: {exc}") from None
        if not isinstance(overrides, dict):
            raise ValidationError("config file must hold a flat JSON object")
    flag_map = {
        "n": args.n, "a": args.a, "b": args.b, "s": args.s, "c": args.c,
        "rng_seed": args.seed, "replications": args.replications, "x0": args.x0,
        "tol": args.tol, "max_iter": args.max_iter, "n_samples": args.n_samples,
        "output_dir": args.out,
    }
    if args.write_vertices:
        flag_map["write_vertices"] = True
    overrides.update({k: v for k, v in flag_map.items() if v is not None})
    cfg = ExperimentConfig.for_mode(args.mode, overrides)
    try:
        report = run_experiment(cfg)
    except PartialResults as exc:
        logging.error("experiment aborted after %d rows: %s", len(exc.report.rows), exc.cause)
        raise exc.cause
    print(json.dumps({k: v for k, v in report.aggregates.items() if k != "groups"} or
                     report.aggregates["groups"], indent=2, default=str))
    return EXIT_OK


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nibble", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample a dSBM graph and write it to a file")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--a", type=float, required=True)
    g.add_argument("--b", type=float, required=True)
    g.add_argument("--s", type=float, required=True)
    g.add_argument("--c", type=float, default=0.85)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--method", choices=("auto", "bernoulli", "binomial"), default="auto")
    g.add_argument("--random-seeds", action="store_true", help="pick seeds uniformly in community 1")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    pr = sub.add_parser("pagerank", help="personalized scale-free PageRank of a graph file")
    pr.add_argument("--graph", required=True)
    pr.add_argument("--c", type=float, default=0.85)
    pr.add_argument("--tol", type=float, default=DEFAULT_TOL)
    pr.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    pr.add_argument("--personalization", choices=("seeds", "uniform", "file"), default="seeds")
    pr.add_argument("--personalization-file")
    pr.add_argument("--dangling", choices=("leak", "personalization"), default="leak")
    pr.add_argument("--out")
    pr.set_defaults(func=cmd_pagerank)

    cl = sub.add_parser("classify", help="threshold seed-personalized PageRank")
    cl.add_argument("--graph", required=True)
    cl.add_argument("--c", type=float, default=0.85)
    cl.add_argument("--x0", default="auto", help="'auto' (5s/8), a value, or a comma-separated list")
    cl.add_argument("--tol", type=float, default=DEFAULT_TOL)
    cl.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    cl.add_argument("--out")
    cl.set_defaults(func=cmd_classify)

    th = sub.add_parser("theory", help="closed-form limit quantities")
    th.add_argument("--a", type=float, required=True)
    th.add_argument("--b", type=float, required=True)
    th.add_argument("--s", type=float, required=True)
    th.add_argument("--c", type=float, required=True)
    th.add_argument("--grid", help="name=start:stop:step, e.g. c=0.5:0.99:0.005")
    th.add_argument("--out")
    th.set_defaults(func=cmd_theory)

    fp = sub.add_parser("sample-fp", help="Monte Carlo samples of the limit PageRank")
    fp.add_argument("--a", type=float, required=True)
    fp.add_argument("--b", type=float, required=True)
    fp.add_argument("--s", type=float, required=True)
    fp.add_argument("--c", type=float, required=True)
    fp.add_argument("--n-samples", type=int, default=100_000)
    fp.add_argument("--tol", type=float, default=sampler.DEFAULT_TOL)
    fp.add_argument("--depth", type=int)
    fp.add_argument("--community", choices=("1", "2", "both"), default="both")
    fp.add_argument("--method", choices=("auto", "tree", "population"), default="auto")
    fp.add_argument("--seed", type=int, default=0)
    fp.add_argument("--out", required=True)
    fp.add_argument("--summary", help="summary JSON path (default: --out with .json suffix)")
    fp.set_defaults(func=cmd_sample_fp)

    ex = sub.add_parser("experiment", help="run a replicated experiment pipeline")
    ex.add_argument("mode", choices=("figure1", "figure2", "convergence", "bounds", "custom"))
    ex.add_argument("--config", help="flat JSON object of ExperimentConfig fields")
    ex.add_argument("--out", help="output directory")
    ex.add_argument("--n", type=int)
    ex.add_argument("--a", type=float)
    ex.add_argument("--b", type=float)
    ex.add_argument("--s", type=float)
    ex.add_argument("--c", type=float)
    ex.add_argument("--seed", type=int)
    ex.add_argument("--replications", type=int)
    ex.add_argument("--x0", type=float)
    ex.add_argument("--tol", type=float)
    ex.add_argument("--max-iter", type=int)
    ex.add_argument("--n-samples", type=int)
    ex.add_argument("--write-vertices", action="store_true")
    ex.set_defaults(func=cmd_experiment)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
