"""Seeded, replicated experiment pipelines and their on-disk reports.

All randomness flows from ``ExperimentConfig.rng_seed``: a pipeline component
labelled ``label`` in replication ``rep`` uses ``derive_seed(rng_seed, label, rep)``,
so any replication can be rerun in isolation.

A report directory holds ``summary.json`` (config echo, aggregates, theory
snapshot, provenance), ``rows.csv`` (one row per replication, or per
replication and grid point) and optionally ``vertices_rep<k>.csv``.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import platform
import zlib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import __version__
from . import theory
from .errors import NonConvergenceError, ValidationError
from .nibble import classify, default_threshold, best_threshold, sweep_thresholds
from .pagerank import DEFAULT_MAX_ITER, DEFAULT_TOL, personalized_pagerank, seed_personalization
from .sampler import FpParams, EmpiricalDist, ks_distance, sample_both
from .sbm import ModelParams, generate

log = logging.getLogger(__name__)

MODES = ("figure1", "figure2", "convergence", "bounds", "custom")

MODE_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "figure1": dict(n=20000, a=150.0, b=10.0, s=0.2, c=0.85),
    "custom": dict(n=20000, a=150.0, b=10.0, s=0.2, c=0.85),
    "figure2": dict(n=2000, a=100.0, b=2.0, s=0.15, c=0.85, max_iter=10000),
    "convergence": dict(n=20000, a=150.0, b=10.0, s=0.2, c=0.85),
    "bounds": dict(n=20000, a=9950.0, b=50.0, s=0.9, c=0.95, tol=1e-6),
}

DEFAULT_BOUNDS_GRID = (
    dict(a=9950.0, b=50.0, s=0.9, c=0.95),
    dict(a=150.0, b=10.0, s=0.2, c=0.85),
)


def derive_seed(rng_seed: int, label: str, rep: int) -> int:
    """64-bit seed for component ``label`` of replication ``rep``."""
    ss = np.random.SeedSequence([int(rng_seed), zlib.crc32(label.encode()), int(rep)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class ExperimentConfig:
    mode: str = "figure1"
    n: int = 20000
    a: float = 150.0
    b: float = 10.0
    s: float = 0.2
    c: float = 0.85
    rng_seed: int = 0
    replications: int = 5
    output_dir: Optional[str] = None
    x0: Optional[float] = None
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    c_grid: Tuple[float, float, float] = (0.5, 0.99, 0.01)
    n_ladder: Tuple[int, ...] = (2500, 5000, 10000, 20000)
    n_samples: int = 100_000
    sampler_tol: float = 1e-6
    bounds_grid: Tuple[dict, ...] = DEFAULT_BOUNDS_GRID
    epsilon: float = 0.05
    write_vertices: bool = False

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.replications < 1:
            raise ValidationError("replications must be >= 1")
        self.c_grid = tuple(float(x) for x in self.c_grid)
        self.n_ladder = tuple(int(x) for x in self.n_ladder)
        self.bounds_grid = tuple(dict(r) for r in self.bounds_grid)
        self.model  # validates

    @property
    def model(self) -> ModelParams:
        return ModelParams(int(self.n), float(self.a), float(self.b), float(self.s), float(self.c))

    @classmethod
    def for_mode(cls, mode: str, overrides: Optional[dict] = None) -> "ExperimentConfig":
        """Mode defaults, then ``overrides`` (unknown keys are rejected)."""
        known = {f.name for f in fields(cls)}
        values = dict(MODE_DEFAULTS.get(mode, {}))
        for k, v in (overrides or {}).items():
            if k not in known:
                raise ValidationError(f"unknown config key {k!r}")
            if v is not None:
                values[k] = v
        values["mode"] = mode
        return cls(**values)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["c_grid"] = list(self.c_grid)
        d["n_ladder"] = list(self.n_ladder)
        d["bounds_grid"] = [dict(r) for r in self.bounds_grid]
        return d


@dataclass
class ExperimentReport:
    mode: str
    config: dict
    rows: List[dict]
    aggregates: dict
    theory: dict
    provenance: dict
    vertices: Dict[int, np.ndarray] = field(default_factory=dict, repr=False)


# -- aggregation ---------------------------------------------------------------

GROUP_KEYS = {
    "figure1": (),
    "custom": (),
    "figure2": ("c",),
    "convergence": ("n", "community"),
    "bounds": ("row",),
}


def _numeric(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def aggregate(mode: str, rows: List[dict]) -> dict:
    """Mean and sample stddev of every numeric column, grouped per mode, plus derived values.

    Pure function of ``rows``; used both when building and when loading a report.
    """
    keys = GROUP_KEYS[mode]
    groups: Dict[tuple, List[dict]] = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in keys), []).append(r)
    out_groups = []
    for gk, members in groups.items():
        entry: Dict[str, Any] = dict(zip(keys, gk))
        entry["count"] = len(members)
        for col in members[0]:
            if col in keys or col in ("rep", "graph_seed") or not _numeric(members[0][col]):
                continue
            vals = np.array([m[col] for m in members], dtype=float)
            entry[f"{col}_mean"] = float(vals.mean())
            entry[f"{col}_std"] = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        for col in members[0]:
            if isinstance(members[0][col], bool):
                entry[f"{col}_all"] = all(bool(m[col]) for m in members)
        out_groups.append(entry)
    agg: Dict[str, Any] = {"groups": out_groups}

    if mode == "figure2" and out_groups:
        best = max(out_groups, key=lambda e: e["diff_emp_mean"])
        agg["empirical_argmax_c"] = best["c"]
        agg["theory_argmax_c_on_grid"] = max(out_groups, key=lambda e: e["diff_theory_mean"])["c"]
    if mode == "convergence" and out_groups:
        for comm in (1, 2):
            seq = sorted((e["n"], e["ks_mean"]) for e in out_groups if e["community"] == comm)
            agg[f"ks_ladder_c{comm}"] = [ks for _, ks in seq]
    return agg


# -- I/O -----------------------------------------------------------------------


def _cell(v) -> str:
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_cell(s: str):
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def write_rows(path_or_file, rows: List[dict]) -> None:
    """CSV with a header row; floats via repr(), booleans as true/false."""
    cols: List[str] = []
    for r in rows:
        cols.extend(k for k in r if k not in cols)
    if hasattr(path_or_file, "write"):
        _write_csv(path_or_file, cols, rows)
        return
    with open(path_or_file, "w", newline="", encoding="utf-8") as fh:
        _write_csv(fh, cols, rows)


def _write_csv(fh, cols, rows) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_cell(r.get(k, "")) for k in cols])


def read_rows(path: Union[str, os.PathLike]) -> List[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [{k: _parse_cell(v) for k, v in r.items()} for r in csv.DictReader(fh)]


def write_vertices(path_or_file, g, R) -> None:
    """Per-vertex CSV ``v,label,is_seed,R`` with 1-based ``v``."""
    if not hasattr(path_or_file, "write"):
        with open(path_or_file, "w", encoding="utf-8", newline="\n") as fh:
            write_vertices(fh, g, R)
        return
    path_or_file.write("v,label,is_seed,R\n")
    seed = g.seed_mask
    for v, (lab, x) in enumerate(zip(g.labels.tolist(), np.asarray(R, dtype=float).tolist())):
        path_or_file.write(f"{v + 1},{lab},{int(seed[v])},{x!r}\n")


def read_vertices(path) -> np.ndarray:
    """Structured array with fields ``v, label, is_seed, R``."""
    return np.genfromtxt(path, delimiter=",", names=True, dtype=None, encoding="utf-8")


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_report(report: ExperimentReport, out_dir: Union[str, os.PathLike]) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = {
        "mode": report.mode,
        "config": report.config,
        "n_rows": len(report.rows),
        "aggregates": report.aggregates,
        "theory": report.theory,
        "provenance": report.provenance,
    }
    (out / "summary.json").write_text(json.dumps(_json_safe(summary), indent=2, sort_keys=True) + "\n")
    write_rows(out / "rows.csv", report.rows)
    return out


def read_report(out_dir: Union[str, os.PathLike]) -> ExperimentReport:
    """Load a report and check its aggregates against a recomputation from the rows."""
    out = Path(out_dir)
    summary = json.loads((out / "summary.json").read_text())
    rows = read_rows(out / "rows.csv")
    if len(rows) != summary["n_rows"]:
        raise ValidationError(f"rows.csv has {len(rows)} rows, summary says {summary['n_rows']}")
    again = _json_safe(aggregate(summary["mode"], rows))
    if json.dumps(again, sort_keys=True) != json.dumps(summary["aggregates"], sort_keys=True):
        raise ValidationError("aggregates in summary.json do not match rows.csv")
    return ExperimentReport(summary["mode"], summary["config"], rows, summary["aggregates"],
                            summary["theory"], summary["provenance"])


# -- pipelines ---------------------------------------------------------------------


def _provenance(cfg: ExperimentConfig) -> dict:
    import numba

    return {
        "package_version": __version__,
        "numpy": np.__version__,
        "numba": numba.__version__,
        "python": platform.python_version(),
        "rng_seed": cfg.rng_seed,
        "seed_derivation": "SeedSequence([rng_seed, crc32(label), rep])",
    }


class PartialResults(Exception):
    """Wraps a pipeline error together with the report assembled so far."""

    def __init__(self, cause: BaseException, report: ExperimentReport) -> None:
        super().__init__(str(cause))
        self.cause = cause
        self.report = report


def _finish(cfg: ExperimentConfig, rows, theory_snapshot, vertices=None) -> ExperimentReport:
    report = ExperimentReport(
        mode=cfg.mode,
        # the output location is left out so reports do not depend on where they are written
        config={k: v for k, v in cfg.to_dict().items() if k != "output_dir"},
        rows=rows,
        aggregates=aggregate(cfg.mode, rows),
        theory=theory_snapshot,
        provenance=_provenance(cfg),
        vertices=vertices or {},
    )
    if cfg.output_dir:
        write_report(report, cfg.output_dir)
        for rep, arr in report.vertices.items():
            write_vertices(Path(cfg.output_dir) / f"vertices_rep{rep}.csv", *arr)
    return report


def _run_guarded(cfg, body, theory_snapshot):
    rows: List[dict] = []
    vertices: dict = {}
    try:
        body(rows, vertices)
    except Exception as exc:
        raise PartialResults(exc, _finish(cfg, rows, theory_snapshot, vertices)) from exc
    return _finish(cfg, rows, theory_snapshot, vertices)


def _pagerank(g, c, cfg):
    pr = personalized_pagerank(g, seed_personalization(g), c, cfg.tol, cfg.max_iter)
    if not pr.converged:
        raise NonConvergenceError(
            f"PageRank did not converge in {pr.iterations} sweeps (residual {pr.residual:.3g}, c={c})"
        )
    return pr


def _community_means(g, R):
    lab1 = g.labels == 1
    nonseed1 = lab1 & ~g.seed_mask
    return float(R[lab1].mean()), float(R[~lab1].mean()), float(R[nonseed1].mean())


def run_figure1(cfg: ExperimentConfig) -> ExperimentReport:
    """Per replication: generate, seed-personalized PageRank, classify at ``x0`` (default 5s/8)."""
    m = cfg.model
    x0 = default_threshold(m.s) if cfg.x0 is None else float(cfg.x0)
    snapshot = theory.theory_stats(m.a, m.b, m.s, m.c).as_dict()

    def body(rows, vertices):
        for rep in range(cfg.replications):
            seed = derive_seed(cfg.rng_seed, "graph", rep)
            g = generate(m, seed)
            pr = _pagerank(g, m.c, cfg)
            cl = classify(pr, g, x0)
            mean1, mean2, mean1_ns = _community_means(g, pr.R)
            sweep = sweep_thresholds(pr, g, np.linspace(0.0, 2.0 * x0, 201))
            rows.append({
                "rep": rep, "graph_seed": seed, "n_edges": g.n_edges,
                "iterations": pr.iterations, "residual": pr.residual, "x0": x0,
                "misclass_c1": cl.misclass_c1, "misclass_c1_nonseed": cl.misclass_c1_nonseed,
                "misclass_c2": cl.misclass_c2, "sym_diff": cl.sym_diff,
                "sym_diff_rate": 2.0 * cl.sym_diff / g.n,
                "mean_R_c1": mean1, "mean_R_c2": mean2, "mean_R_c1_nonseed": mean1_ns,
                "best_x0": best_threshold(sweep),
            })
            log.info("figure1 rep %d: misclass_c1=%.4f", rep, cl.misclass_c1)
            if cfg.write_vertices:
                vertices[rep] = (g, pr.R.copy())

    return _run_guarded(cfg, body, snapshot)


run_custom = run_figure1


def c_grid_values(c_grid: Sequence[float]) -> np.ndarray:
    start, stop, step = c_grid
    k = int(math.floor((stop - start) / step + 1e-9))
    return np.round(start + step * np.arange(k + 1), 10)


def run_figure2(cfg: ExperimentConfig) -> ExperimentReport:
    """Mean PageRank of non-seed community-1 vertices minus community 2, across a damping grid."""
    m = cfg.model
    e, c_star = theory.optimal_damping(m.a, m.b)
    snapshot = {"E": e, "c_star": c_star, "a": m.a, "b": m.b, "s": m.s}
    grid = c_grid_values(cfg.c_grid)

    def body(rows, vertices):
        for rep in range(cfg.replications):
            seed = derive_seed(cfg.rng_seed, "graph", rep)
            g = generate(m, seed)
            for c in grid:
                c = float(c)
                pr = _pagerank(g, c, cfg)
                _, mean2, mean1_ns = _community_means(g, pr.R)
                rows.append({
                    "rep": rep, "c": c, "r1_hat_emp": mean1_ns, "r2_emp": mean2,
                    "diff_emp": mean1_ns - mean2,
                    "diff_theory": theory.nonseed_gap(m.a, m.b, m.s, c),
                    "r1_minus_r2_theory": theory.community_gap(m.a, m.b, m.s, c),
                    "iterations": pr.iterations,
                })

    return _run_guarded(cfg, body, snapshot)


def run_convergence(cfg: ExperimentConfig) -> ExperimentReport:
    """KS distance between finite-n community PageRank laws and limit samples along ``n_ladder``."""
    m = cfg.model
    snapshot = theory.theory_stats(m.a, m.b, m.s, m.c).as_dict()

    def body(rows, vertices):
        for rep in range(cfg.replications):
            fp = FpParams(m.a, m.b, m.s, m.c, n_samples=cfg.n_samples, tol=cfg.sampler_tol,
                          rng_seed=derive_seed(cfg.rng_seed, "sampler", rep))
            limit = sample_both(fp)
            for n in cfg.n_ladder:
                mn = replace(m, n=int(n))
                g = generate(mn, derive_seed(cfg.rng_seed, f"graph-n{n}", rep))
                pr = _pagerank(g, m.c, cfg)
                for comm in (1, 2):
                    finite = EmpiricalDist(pr.R[g.labels == comm], comm)
                    rows.append({
                        "rep": rep, "n": int(n), "community": comm,
                        "ks": ks_distance(finite, limit[comm]),
                        "mean_finite": finite.mean(), "mean_limit": limit[comm].mean(),
                        "var_finite": finite.var(), "var_limit": limit[comm].var(),
                    })
                log.info("convergence rep %d n=%d done", rep, n)

    return _run_guarded(cfg, body, snapshot)


def run_bounds_table(cfg: ExperimentConfig) -> ExperimentReport:
    """Theoretical misclassification bounds next to simulated rates at threshold 5s/8."""
    n = int(cfg.n)
    snapshot = {}
    for i, spec in enumerate(cfg.bounds_grid):
        a, b, s, c = (float(spec[k]) for k in ("a", "b", "s", "c"))
        snapshot[str(i)] = theory.theory_stats(a, b, s, c).as_dict()

    def body(rows, vertices):
        for i, spec in enumerate(cfg.bounds_grid):
            a, b, s, c = (float(spec[k]) for k in ("a", "b", "s", "c"))
            d1, d2, ok = theory.misclassification_bounds(a, b, s, c)
            mp = ModelParams(n, a, b, s, c)
            x0 = default_threshold(s)
            for rep in range(cfg.replications):
                g = generate(mp, derive_seed(cfg.rng_seed, f"bounds-{i}", rep))
                pr = _pagerank(g, c, cfg)
                cl = classify(pr, g, x0)
                del g, pr
                rate = 2.0 * cl.sym_diff / n
                rows.append({
                    "row": i, "rep": rep, "a": a, "b": b, "s": s, "c": c, "n": n,
                    "conditions_met": ok, "delta1": d1, "delta2": d2, "delta": d1 + d2,
                    "misclass_c1": cl.misclass_c1, "misclass_c2": cl.misclass_c2,
                    "sym_diff_rate": rate,
                    "verdict": ("holds" if rate <= d1 + d2 + cfg.epsilon else "fails") if ok else "n/a",
                })
                log.info("bounds row %d rep %d: rate=%.4g delta=%.4g", i, rep, rate, d1 + d2)

    return _run_guarded(cfg, body, snapshot)


PIPELINES = {
    "figure1": run_figure1,
    "custom": run_custom,
    "figure2": run_figure2,
    "convergence": run_convergence,
    "bounds": run_bounds_table,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    return PIPELINES[cfg.mode](cfg)
