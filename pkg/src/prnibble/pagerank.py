"""Personalized scale-free PageRank by damped power iteration.

Solves ``R_v = c * sum_{w -> v} R_w / D_w + (1 - c) * Q_v`` where ``D_w`` is
the out-degree of ``w`` and ``Q = n * q`` is the scale-free personalization.
Dangling vertices (out-degree 0) pass no mass by default.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import List, Union

import numba
import numpy as np

from .errors import ValidationError
from .sbm import DsbmGraph

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 1000


@dataclass
class PagerankResult:
    R: np.ndarray
    iterations: int
    residual: float
    c: float
    converged: bool
    residuals: List[float] = field(default_factory=list, repr=False)


@numba.njit(cache=True)
def _pull_sweep(indptr, indices, y, base, c, out):
    # out[v] = c * sum(y[w] for w in in(v)) + base[v]
    n = out.shape[0]
    for v in range(n):
        acc = 0.0
        for k in range(indptr[v], indptr[v + 1]):
            acc += y[indices[k]]
        out[v] = c * acc + base[v]


def seed_personalization(g: DsbmGraph) -> np.ndarray:
    """``Q_v = 1`` on seeds, 0 elsewhere."""
    return g.seed_mask.astype(float)


def uniform_personalization(g: DsbmGraph) -> np.ndarray:
    return np.ones(g.n)


def read_personalization(path: Union[str, os.PathLike], n: int) -> np.ndarray:
    """One non-negative weight per line, in vertex order."""
    q = np.loadtxt(path, dtype=float, ndmin=1)
    if q.shape != (n,):
        raise ValidationError(f"personalization file has {q.size} values, graph has {n} vertices")
    return q


def _check(g: DsbmGraph, Q: np.ndarray, c: float) -> np.ndarray:
    if not 0 < c < 1:
        raise ValidationError(f"damping c must lie in (0, 1), got {c}")
    Q = np.ascontiguousarray(Q, dtype=float)
    if Q.shape != (g.n,):
        raise ValidationError(f"personalization has length {Q.size}, expected {g.n}")
    if np.any(Q < 0) or not np.any(Q > 0):
        raise ValidationError("personalization must be non-negative with a positive entry")
    return Q


def _iterate(g, Q, c, tol, max_iter, dangling):
    deg = g.out_degree.astype(float)
    dang = deg == 0
    inv_deg = np.where(dang, 0.0, 1.0 / np.where(dang, 1.0, deg))
    base = (1.0 - c) * Q
    q_dist = Q / Q.sum()
    R = base.copy()
    new = np.empty_like(R)
    residuals = []
    # ||R_t - R*||_1 <= c/(1-c) * ||R_t - R_{t-1}||_1 for an L1 contraction of ratio c
    err_factor = max(1.0, c / (1.0 - c))
    for it in range(1, max_iter + 1):
        y = R * inv_deg
        if dangling == "personalization":
            extra = c * R[dang].sum() * q_dist
            _pull_sweep(g.in_indptr, g.in_indices, y, base + extra, c, new)
        else:
            _pull_sweep(g.in_indptr, g.in_indices, y, base, c, new)
        res = float(np.abs(new - R).sum())
        residuals.append(res)
        R, new = new, R
        if tol is not None and res * err_factor <= tol:
            return R, it, residuals, True
    return R, max_iter, residuals, False


def personalized_pagerank(
    g: DsbmGraph,
    Q: np.ndarray,
    c: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    dangling: str = "leak",
) -> PagerankResult:
    """Damped fixed-point iteration from ``R = (1-c) Q``.

    The t-th iterate is the length-t Neumann partial sum, so iterates increase
    monotonically and the L1 change shrinks at least by a factor ``c`` per
    sweep. Iteration stops once ``max(1, c/(1-c))`` times the last L1 change
    is at most ``tol``, which bounds both that change and the L1 distance to
    the exact fixed point by ``tol``. On hitting ``max_iter`` the result has
    ``converged=False`` and carries the last iterate.

    ``dangling="personalization"`` is the random-surfer variant that sends a
    dangling vertex's mass back according to ``Q``; the default ``"leak"``
    follows the fixed-point equation literally.
    """
    Q = _check(g, Q, c)
    if not tol > 0:
        raise ValidationError("tol must be positive")
    if dangling not in ("leak", "personalization"):
        raise ValidationError(f"unknown dangling mode {dangling!r}")
    R, iters, residuals, ok = _iterate(g, Q, c, tol, max_iter, dangling)
    return PagerankResult(R, iters, residuals[-1] if residuals else 0.0, c, ok, residuals)


def residual_history(g: DsbmGraph, Q: np.ndarray, c: float, iters: int) -> List[float]:
    """L1 change of each of ``iters`` sweeps (no early stop)."""
    Q = _check(g, Q, c)
    return _iterate(g, Q, c, None, iters, "leak")[2]


def apply_map(g: DsbmGraph, R: np.ndarray, Q: np.ndarray, c: float) -> np.ndarray:
    """One application of the PageRank map to ``R``."""
    deg = g.out_degree.astype(float)
    y = np.divide(R, deg, out=np.zeros(g.n), where=deg > 0)
    out = np.empty(g.n)
    _pull_sweep(g.in_indptr, g.in_indices, y, (1.0 - c) * np.asarray(Q, float), c, out)
    return out
