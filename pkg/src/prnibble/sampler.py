"""Monte Carlo samples of the limiting PageRank of a typical vertex in each community.

The limit is the root value of a two-type Galton-Watson tree: a node of type
``i`` has ``Poisson(a/2)`` children of its own type and ``Poisson(b/2)`` of the
other type, each child ``j`` has out-degree ``D_j = 1 + Poisson((a+b)/2)``, and

    value = c * sum_j value_j / D_j + (1 - c) * Q,

with ``Q ~ Bernoulli(s)`` for type 1 and ``Q = 0`` for type 2. Nodes deeper
than ``depth`` are given value 0, so truncated samples are lower bounds.

Two samplers are provided. ``"tree"`` expands one independent tree per sample
and is exact for the truncated recursion, but its cost grows like
``((a+b)/2)**depth``. ``"population"`` iterates the recursion ``depth + 1``
times on pools of values per type, drawing children from the previous pool;
it has the same depth-truncated target law up to pool resampling noise and
costs ``O(n_samples * (a+b)/2 * depth)``.

Samples from one pool share their ancestry, so they are exchangeable but not
independent, and ``sqrt(var/n)`` understates the error of their mean. The
population sampler therefore splits ``n_samples`` over independent pools and
``EmpiricalDist.std_err`` uses the spread of the pool means.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Union

import numpy as np

from .errors import SamplerBudgetError, ValidationError

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6
DEFAULT_NODE_BUDGET = 10**8
DEFAULT_POOLS = 20


def default_depth(c: float, tol: float = DEFAULT_TOL) -> int:
    """Smallest depth ``ceil(log(tol (1-c)) / log c)`` (at least 0)."""
    if not 0 < c < 1 or not tol > 0:
        raise ValidationError("need c in (0, 1) and tol > 0")
    return max(0, math.ceil(math.log(tol * (1.0 - c)) / math.log(c)))


def truncation_bound(c: float, depth: int) -> float:
    """``c**(depth+1) / (1-c)``.

    Bounds the mean of the gap between exact and depth-truncated values: the
    mean of ``sum_j 1/D_j`` over a node's children is at most 1, and ``Q <= 1``.
    """
    if not 0 < c < 1:
        raise ValidationError("c must lie in (0, 1)")
    return c ** (depth + 1) / (1.0 - c)


@dataclass(frozen=True)
class FpParams:
    a: float
    b: float
    s: float
    c: float
    n_samples: int = 100_000
    depth: Optional[int] = None
    tol: float = DEFAULT_TOL
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.a < 0 or self.b < 0:
            raise ValidationError("a and b must be non-negative")
        if not 0 <= self.s <= 1:
            raise ValidationError("s must lie in [0, 1]")
        if not 0 < self.c < 1:
            raise ValidationError("c must lie in (0, 1)")
        if self.n_samples < 1:
            raise ValidationError("n_samples must be positive")
        if self.depth is not None and self.depth < 0:
            raise ValidationError("depth must be non-negative")

    @property
    def resolved_depth(self) -> int:
        return default_depth(self.c, self.tol) if self.depth is None else int(self.depth)


@dataclass(frozen=True)
class EmpiricalDist:
    """Sorted sample with exact moment and CDF queries."""

    samples: np.ndarray
    community: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        arr = np.sort(np.asarray(self.samples, dtype=float))
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def size(self) -> int:
        return int(self.samples.size)

    def mean(self) -> float:
        return float(self.samples.mean())

    def var(self) -> float:
        return float(self.samples.var(ddof=1)) if self.size > 1 else 0.0

    def std_err(self) -> float:
        """Standard error of ``mean()``.

        From independent batch means when ``meta["batch_means"]`` is present,
        otherwise the i.i.d. formula.
        """
        bm = self.meta.get("batch_means")
        if bm is not None and len(bm) > 1:
            return float(np.std(bm, ddof=1) / math.sqrt(len(bm)))
        return math.sqrt(self.var() / self.size)

    def cdf(self, x):
        """Right-continuous empirical CDF ``P(X <= x)``."""
        return np.searchsorted(self.samples, x, side="right") / self.size


def ks_distance(d1: Union[EmpiricalDist, np.ndarray], d2: Union[EmpiricalDist, np.ndarray]) -> float:
    """Exact two-sample Kolmogorov-Smirnov statistic ``sup_x |F1(x) - F2(x)|``."""
    x1 = d1.samples if isinstance(d1, EmpiricalDist) else np.sort(np.asarray(d1, float))
    x2 = d2.samples if isinstance(d2, EmpiricalDist) else np.sort(np.asarray(d2, float))
    if x1.size == 0 or x2.size == 0:
        raise ValidationError("KS distance needs two non-empty samples")
    # the sup is attained at a sample point
    pts = np.concatenate([x1, x2])
    f1 = np.searchsorted(x1, pts, side="right") / x1.size
    f2 = np.searchsorted(x2, pts, side="right") / x2.size
    return float(np.max(np.abs(f1 - f2)))


def expected_tree_size(a: float, b: float, depth: int) -> float:
    """Expected node count of one tree truncated at ``depth`` (root is level 0)."""
    m = (a + b) / 2.0
    if m == 1.0:
        return float(depth + 1)
    return (m ** (depth + 1) - 1.0) / (m - 1.0)


def _tree_one(rng: np.random.Generator, p: FpParams, community: int, depth: int) -> float:
    mu_d = (p.a + p.b) / 2.0
    types = np.array([community], dtype=np.int8)
    weights = np.ones(1)
    total = 0.0
    for level in range(depth + 1):
        ones = types == 1
        n1 = int(ones.sum())
        if n1:
            q = rng.random(n1) < p.s
            total += (1.0 - p.c) * float(weights[ones][q].sum())
        if level == depth:
            break
        mean_to1 = np.where(ones, p.a / 2.0, p.b / 2.0)
        mean_to2 = np.where(ones, p.b / 2.0, p.a / 2.0)
        k1 = rng.poisson(mean_to1)
        k2 = rng.poisson(mean_to2)
        w = np.concatenate([np.repeat(weights, k1), np.repeat(weights, k2)])
        if w.size == 0:
            break
        types = np.concatenate([np.ones(k1.sum(), np.int8), np.full(k2.sum(), 2, np.int8)])
        weights = w * p.c / (1.0 + rng.poisson(mu_d, size=w.size))
    return total


def sample_tree(p: FpParams, community: int, node_budget: float = DEFAULT_NODE_BUDGET) -> EmpiricalDist:
    """Independent samples, one explicit truncated tree each.

    Sample ``k`` uses the substream ``(rng_seed, community, k)``, so the sample
    set does not depend on how the work is scheduled.
    """
    if community not in (1, 2):
        raise ValidationError("community must be 1 or 2")
    depth = p.resolved_depth
    visits = p.n_samples * expected_tree_size(p.a, p.b, depth)
    if visits > node_budget:
        raise SamplerBudgetError(
            f"expected {visits:.3g} node visits for depth {depth} with mean offspring "
            f"{(p.a + p.b) / 2:g} exceeds the budget of {node_budget:.3g}; "
            "use the population sampler or a smaller depth"
        )
    out = np.empty(p.n_samples)
    for k in range(p.n_samples):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(p.rng_seed, spawn_key=(community, k))))
        out[k] = _tree_one(rng, p, community, depth)
    return EmpiricalDist(out, community, {"method": "tree", "depth": depth})


def _children_sum(rng, pool, mean_count, mu_d, chunk=2_000_000):
    m = pool.shape[0]
    counts = rng.poisson(mean_count, size=m)
    if not pool.any():
        # children of value 0 contribute nothing, but keep the stream layout fixed
        return np.zeros(m)
    acc = np.zeros(m)
    parents = np.repeat(np.arange(m), counts)
    for lo in range(0, parents.size, chunk):
        par = parents[lo:lo + chunk]
        picks = rng.integers(m, size=par.size)
        deg = 1.0 + rng.poisson(mu_d, size=par.size)
        acc += np.bincount(par, weights=pool[picks] / deg, minlength=m)
    return acc


def _population_run(p: FpParams, m: int, depth: int, stream: int):
    mu_d = (p.a + p.b) / 2.0
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(p.rng_seed, spawn_key=(3, stream))))
    pool1 = np.zeros(m)
    pool2 = np.zeros(m)
    for _ in range(depth + 1):
        new1 = (1.0 - p.c) * (rng.random(m) < p.s)
        new1 += p.c * (_children_sum(rng, pool1, p.a / 2.0, mu_d) + _children_sum(rng, pool2, p.b / 2.0, mu_d))
        new2 = p.c * (_children_sum(rng, pool1, p.b / 2.0, mu_d) + _children_sum(rng, pool2, p.a / 2.0, mu_d))
        pool1, pool2 = new1, new2
    return pool1, pool2


def sample_population(p: FpParams, n_pools: int = DEFAULT_POOLS) -> Dict[int, EmpiricalDist]:
    """Both communities by pool iteration; returns ``{1: dist, 2: dist}``.

    ``n_samples`` is split as evenly as possible over ``n_pools`` independent
    pools; pool ``j`` uses the substream ``(rng_seed, 3, j)``.
    """
    if n_pools < 1:
        raise ValidationError("n_pools must be positive")
    depth = p.resolved_depth
    n_pools = min(n_pools, p.n_samples)
    sizes = np.full(n_pools, p.n_samples // n_pools)
    sizes[: p.n_samples % n_pools] += 1
    runs = [_population_run(p, int(m), depth, j) for j, m in enumerate(sizes)]
    out = {}
    for k in (1, 2):
        pools = [r[k - 1] for r in runs]
        meta = {"method": "population", "depth": depth, "n_pools": n_pools,
                "batch_means": tuple(float(x.mean()) for x in pools)}
        out[k] = EmpiricalDist(np.concatenate(pools), k, meta)
    return out


def sample_limit_pagerank(
    p: FpParams,
    community: int,
    method: str = "auto",
    node_budget: float = DEFAULT_NODE_BUDGET,
) -> EmpiricalDist:
    """Samples of the limit PageRank for one community.

    ``method="auto"`` uses the exact tree sampler when its expected work fits
    in ``node_budget`` and the population sampler otherwise.
    """
    if community not in (1, 2):
        raise ValidationError("community must be 1 or 2")
    if method == "auto":
        visits = p.n_samples * expected_tree_size(p.a, p.b, p.resolved_depth)
        method = "tree" if visits <= node_budget else "population"
        log.debug("sampler: expected tree visits %.3g -> %s", visits, method)
    if method == "tree":
        return sample_tree(p, community, node_budget)
    if method == "population":
        return sample_population(p)[community]
    raise ValidationError(f"unknown sampler method {method!r}")


def sample_both(p: FpParams, method: str = "auto", node_budget: float = DEFAULT_NODE_BUDGET) -> Dict[int, EmpiricalDist]:
    if method == "population" or (
        method == "auto" and p.n_samples * expected_tree_size(p.a, p.b, p.resolved_depth) > node_budget
    ):
        return sample_population(p)
    return {k: sample_limit_pagerank(p, k, method, node_budget) for k in (1, 2)}
