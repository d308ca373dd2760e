"""Two-community sparse directed stochastic block model.

Vertices are 0-based internally and 1-based in the text format. The first
``n/2`` vertices form community 1, the rest community 2, and the seed set is
(by default) the first ``round(s*n/2)`` vertices of community 1.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numba
import numpy as np

from .errors import GraphFormatError, ValidationError

# Largest n for which ``method="auto"`` uses the per-pair Bernoulli path.
BERNOULLI_MAX_N = 2000


@dataclass(frozen=True)
class ModelParams:
    """Experiment parameters: vertex count, kernel entries, seed fraction, damping."""

    n: int
    a: float
    b: float
    s: float
    c: float = 0.85

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 2 or self.n % 2:
            raise ValidationError(f"n must be an even integer >= 2, got {self.n}")
        if not (self.a >= 0 and self.b >= 0):
            raise ValidationError(f"a and b must be non-negative, got a={self.a}, b={self.b}")
        if not 0 < self.s < 1:
            raise ValidationError(f"s must lie in (0, 1), got {self.s}")
        if not 0 < self.c < 1:
            raise ValidationError(f"c must lie in (0, 1), got {self.c}")

    @property
    def half(self) -> int:
        return self.n // 2

    @property
    def n_seeds(self) -> int:
        # round-half-up, at least one seed
        return max(1, int(math.floor(self.s * self.half + 0.5)))

    @property
    def p_within(self) -> float:
        return min(self.a / self.n, 1.0)

    @property
    def p_cross(self) -> float:
        return min(self.b / self.n, 1.0)

    @property
    def kernel(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.b, self.a]], dtype=float)


@numba.njit(cache=True)
def _transpose_csr(n, indptr, indices):
    counts = np.zeros(n + 1, dtype=np.int64)
    for k in range(indices.shape[0]):
        counts[indices[k] + 1] += 1
    t_indptr = np.cumsum(counts)
    t_indices = np.empty(indices.shape[0], dtype=np.int32)
    fill = t_indptr[:-1].copy()
    for v in range(n):
        for k in range(indptr[v], indptr[v + 1]):
            w = indices[k]
            t_indices[fill[w]] = v
            fill[w] += 1
    return t_indptr, t_indices


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


class DsbmGraph:
    """Immutable directed graph in CSR form, in both directions, with labels and seeds.

    ``out_indices[out_indptr[v]:out_indptr[v+1]]`` are the out-neighbours of
    ``v`` (sorted ascending); the ``in_*`` arrays are the transpose.
    """

    __slots__ = (
        "params", "rng_seed", "labels", "seeds",
        "out_indptr", "out_indices", "in_indptr", "in_indices",
    )

    def __init__(
        self,
        labels: np.ndarray,
        out_indptr: np.ndarray,
        out_indices: np.ndarray,
        seeds: np.ndarray,
        params: Optional[ModelParams] = None,
        rng_seed: Optional[int] = None,
    ) -> None:
        n = labels.shape[0]
        if out_indptr.shape[0] != n + 1:
            raise ValidationError("out_indptr must have n+1 entries")
        out_indptr = np.ascontiguousarray(out_indptr, dtype=np.int64)
        out_indices = np.ascontiguousarray(out_indices, dtype=np.int32)
        raw = np.asarray(seeds, dtype=np.int64).ravel()
        seeds = np.unique(raw)
        if seeds.size != raw.size:
            raise ValidationError("duplicate seed")
        if seeds.size and (seeds[0] < 0 or seeds[-1] >= n or np.any(labels[seeds] != 1)):
            raise ValidationError("seeds must be community-1 vertices")
        in_indptr, in_indices = _transpose_csr(n, out_indptr, out_indices)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "rng_seed", rng_seed)
        object.__setattr__(self, "labels", _frozen(np.asarray(labels, dtype=np.int8)))
        object.__setattr__(self, "seeds", _frozen(seeds))
        object.__setattr__(self, "out_indptr", _frozen(out_indptr))
        object.__setattr__(self, "out_indices", _frozen(out_indices))
        object.__setattr__(self, "in_indptr", _frozen(in_indptr))
        object.__setattr__(self, "in_indices", _frozen(in_indices))

    def __setattr__(self, name, value):
        raise AttributeError("DsbmGraph is immutable")

    @property
    def n(self) -> int:
        return int(self.labels.shape[0])

    @property
    def n_edges(self) -> int:
        return int(self.out_indices.shape[0])

    @property
    def out_degree(self) -> np.ndarray:
        return np.diff(self.out_indptr)

    @property
    def in_degree(self) -> np.ndarray:
        return np.diff(self.in_indptr)

    @property
    def seed_mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        mask[self.seeds] = True
        return mask

    def out_neighbors(self, v: int) -> np.ndarray:
        return self.out_indices[self.out_indptr[v]:self.out_indptr[v + 1]]

    def in_neighbors(self, v: int) -> np.ndarray:
        return self.in_indices[self.in_indptr[v]:self.in_indptr[v + 1]]

    def edges(self) -> np.ndarray:
        """All edges as an ``(E, 2)`` array of 0-based ``(source, target)`` pairs."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.out_degree)
        return np.column_stack([src, self.out_indices.astype(np.int64)])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DsbmGraph):
            return NotImplemented
        return (
            self.params == other.params
            and self.rng_seed == other.rng_seed
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.seeds, other.seeds)
            and np.array_equal(self.out_indptr, other.out_indptr)
            and np.array_equal(self.out_indices, other.out_indices)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"DsbmGraph(n={self.n}, edges={self.n_edges}, seeds={self.seeds.size}, params={self.params})"


def default_labels(n: int) -> np.ndarray:
    labels = np.full(n, 2, dtype=np.int8)
    labels[: n - n // 2] = 1
    return labels


def from_edges(
    n: int,
    edges: Iterable[Sequence[int]],
    labels: Optional[Sequence[int]] = None,
    seeds: Sequence[int] = (),
    params: Optional[ModelParams] = None,
    rng_seed: Optional[int] = None,
) -> DsbmGraph:
    """Build a graph directly from 0-based directed edges.

    Rejects self-loops and duplicate edges. Rows are stored sorted.
    """
    e = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    if e.size and (e.min() < 0 or e.max() >= n):
        raise ValidationError("edge endpoint out of range")
    if np.any(e[:, 0] == e[:, 1]):
        raise ValidationError("self-loops are not allowed")
    order = np.lexsort((e[:, 1], e[:, 0]))
    e = e[order]
    if e.shape[0] > 1 and np.any(np.all(e[1:] == e[:-1], axis=1)):
        raise ValidationError("duplicate directed edge")
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(e[:, 0], minlength=n), out=indptr[1:])
    lab = default_labels(n) if labels is None else np.asarray(labels, dtype=np.int8)
    if lab.shape[0] != n or not np.all((lab == 1) | (lab == 2)):
        raise ValidationError("labels must be n values in {1, 2}")
    return DsbmGraph(lab, indptr, e[:, 1], np.asarray(seeds, dtype=np.int64), params, rng_seed)


def _vertex_rng(rng_seed: int, v: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(rng_seed, spawn_key=(0, v))))


def _row_bernoulli(rng, v, labels, p_within, p_cross):
    p = np.where(labels == labels[v], p_within, p_cross)
    hit = rng.random(labels.shape[0]) < p
    hit[v] = False
    return np.flatnonzero(hit)


def _row_binomial(rng, v, half, p_within, p_cross):
    own = 0 if v < half else 1
    parts = []
    for blk in (own, 1 - own):
        start = blk * half
        if blk == own:
            k = rng.binomial(half - 1, p_within)
            t = rng.choice(half - 1, size=k, replace=False)
            t[t >= v - start] += 1  # skip the self slot
        else:
            k = rng.binomial(half, p_cross)
            t = rng.choice(half, size=k, replace=False)
        parts.append(t + start)
    row = np.concatenate(parts)
    row.sort()
    return row


def generate(
    params: ModelParams,
    rng_seed: int,
    method: str = "auto",
    random_seeds: bool = False,
) -> DsbmGraph:
    """Sample a dSBM graph.

    Every ordered pair ``(v, w)``, ``v != w``, is an edge independently with
    probability ``min(a/n, 1)`` within a community and ``min(b/n, 1)`` across.
    Each source vertex draws from its own substream derived from
    ``(rng_seed, v)``, so the result does not depend on evaluation order.

    ``method`` is ``"bernoulli"`` (one uniform per ordered pair),
    ``"binomial"`` (binomial out-degree per block, then uniform placement) or
    ``"auto"`` (Bernoulli up to ``BERNOULLI_MAX_N`` vertices).
    """
    if method == "auto":
        method = "bernoulli" if params.n <= BERNOULLI_MAX_N else "binomial"
    if method not in ("bernoulli", "binomial"):
        raise ValidationError(f"unknown sampling method {method!r}")
    n, half = params.n, params.half
    labels = default_labels(n)
    pw, pc = params.p_within, params.p_cross
    rows = []
    for v in range(n):
        rng = _vertex_rng(rng_seed, v)
        if method == "bernoulli":
            rows.append(_row_bernoulli(rng, v, labels, pw, pc))
        else:
            rows.append(_row_binomial(rng, v, half, pw, pc))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum([r.size for r in rows], out=indptr[1:])
    indices = np.concatenate(rows).astype(np.int32) if rows else np.empty(0, np.int32)
    del rows

    if random_seeds:
        srng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(rng_seed, spawn_key=(1,))))
        seeds = srng.choice(half, size=params.n_seeds, replace=False)
    else:
        seeds = np.arange(params.n_seeds)
    return DsbmGraph(labels, indptr, indices, seeds, params, rng_seed)


@dataclass(frozen=True)
class DegreeStats:
    n_edges: int
    dangling: int
    mean_out: dict
    mean_in: dict
    max_out: dict
    max_in: dict
    mean_out_within: dict
    mean_out_cross: dict


def degree_stats(g: DsbmGraph) -> DegreeStats:
    """Exact per-community degree summary; dicts are keyed by community 1 and 2."""
    out_deg, in_deg = g.out_degree, g.in_degree
    src = np.repeat(np.arange(g.n), out_deg)
    within = g.labels[src] == g.labels[g.out_indices]
    within_count = np.bincount(src[within], minlength=g.n)
    cross_count = out_deg - within_count

    def per(values, agg):
        res = {}
        for k in (1, 2):
            sel = values[g.labels == k]
            res[k] = float(agg(sel)) if sel.size else 0.0
        return res

    return DegreeStats(
        n_edges=g.n_edges,
        dangling=int(np.count_nonzero(out_deg == 0)),
        mean_out=per(out_deg, np.mean),
        mean_in=per(in_deg, np.mean),
        max_out={k: int(v) for k, v in per(out_deg, np.max).items()},
        max_in={k: int(v) for k, v in per(in_deg, np.max).items()},
        mean_out_within=per(within_count, np.mean),
        mean_out_cross=per(cross_count, np.mean),
    )


# -- text format -------------------------------------------------------------
#
#   dsbm n a b s rng_seed c        header ('-' for unknown fields)
#   label v k                      one per vertex, k in {1, 2}
#   seed v                         one per seed
#   edge v w                       one per directed edge
#   end E                          trailer with the edge count
#
# Vertices are 1-based. Floats are written with repr() so they round-trip.


def _fmt(x) -> str:
    return "-" if x is None else repr(x)


def save(g: DsbmGraph, path: Union[str, os.PathLike]) -> None:
    p = g.params
    head = ["dsbm", str(g.n)]
    if p is None:
        head += ["-", "-", "-"]
    else:
        head += [_fmt(float(p.a)), _fmt(float(p.b)), _fmt(float(p.s))]
    head.append("-" if g.rng_seed is None else str(int(g.rng_seed)))
    head.append("-" if p is None else _fmt(float(p.c)))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(" ".join(head) + "\n")
        vs = np.arange(1, g.n + 1)
        np.savetxt(fh, np.column_stack([vs, g.labels]), fmt="label %d %d")
        if g.seeds.size:
            np.savetxt(fh, g.seeds + 1, fmt="seed %d")
        if g.n_edges:
            np.savetxt(fh, g.edges() + 1, fmt="edge %d %d")
        fh.write(f"end {g.n_edges}\n")


def _parse_float(tok: str, lineno: int, what: str) -> Optional[float]:
    if tok == "-":
        return None
    try:
        return float(tok)
    except ValueError:
        raise GraphFormatError(lineno, f"bad {what} {tok!r}") from None


def _parse_int(tok: str, lineno: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise GraphFormatError(lineno, f"bad {what} {tok!r}") from None


def load(path: Union[str, os.PathLike]) -> DsbmGraph:
    """Read a graph written by :func:`save`; malformed input raises GraphFormatError."""
    text = Path(path).read_text(encoding="ascii", errors="replace")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise GraphFormatError(1, "empty file")

    head = lines[0].split()
    if len(head) not in (6, 7) or head[0] != "dsbm":
        raise GraphFormatError(1, "expected header 'dsbm n a b s rng_seed [c]'")
    n = _parse_int(head[1], 1, "n")
    if n < 1:
        raise GraphFormatError(1, f"bad n {n}")
    a = _parse_float(head[2], 1, "a")
    b = _parse_float(head[3], 1, "b")
    s = _parse_float(head[4], 1, "s")
    rng_seed = None if head[5] == "-" else _parse_int(head[5], 1, "rng_seed")
    c = _parse_float(head[6], 1, "c") if len(head) == 7 else None

    labels = np.zeros(n, dtype=np.int8)
    seeds: list = []
    src: list = []
    dst: list = []
    end_seen = None
    for lineno, line in enumerate(lines[1:], start=2):
        if end_seen is not None:
            raise GraphFormatError(lineno, "content after end marker")
        tok = line.split()
        if not tok:
            raise GraphFormatError(lineno, "blank line")
        kind = tok[0]
        if kind == "edge" and len(tok) == 3:
            v = _parse_int(tok[1], lineno, "vertex")
            w = _parse_int(tok[2], lineno, "vertex")
            if not (1 <= v <= n and 1 <= w <= n):
                raise GraphFormatError(lineno, "vertex out of range")
            if v == w:
                raise GraphFormatError(lineno, "self-loop")
            src.append(v - 1)
            dst.append(w - 1)
        elif kind == "label" and len(tok) == 3:
            v = _parse_int(tok[1], lineno, "vertex")
            k = _parse_int(tok[2], lineno, "label")
            if not 1 <= v <= n or k not in (1, 2):
                raise GraphFormatError(lineno, "bad label line")
            if labels[v - 1]:
                raise GraphFormatError(lineno, f"duplicate label for vertex {v}")
            labels[v - 1] = k
        elif kind == "seed" and len(tok) == 2:
            v = _parse_int(tok[1], lineno, "vertex")
            if not 1 <= v <= n:
                raise GraphFormatError(lineno, "vertex out of range")
            seeds.append(v - 1)
        elif kind == "end" and len(tok) == 2:
            end_seen = (lineno, _parse_int(tok[1], lineno, "edge count"))
        else:
            raise GraphFormatError(lineno, f"unrecognised line {line[:40]!r}")

    if end_seen is None:
        raise GraphFormatError(len(lines) + 1, "missing end marker (truncated file?)")
    if end_seen[1] != len(src):
        raise GraphFormatError(end_seen[0], f"end marker says {end_seen[1]} edges, found {len(src)}")
    if np.any(labels == 0):
        missing = int(np.flatnonzero(labels == 0)[0]) + 1
        raise GraphFormatError(end_seen[0], f"no label for vertex {missing}")

    params = None
    if None not in (a, b, s):
        try:
            params = ModelParams(n, a, b, s, 0.85 if c is None else c)
        except ValidationError as exc:
            raise GraphFormatError(1, str(exc)) from None
    e = np.column_stack([np.asarray(src, dtype=np.int64), np.asarray(dst, dtype=np.int64)])
    try:
        return from_edges(n, e, labels, np.asarray(seeds, dtype=np.int64), params, rng_seed)
    except ValidationError as exc:
        raise GraphFormatError(end_seen[0], str(exc)) from None
