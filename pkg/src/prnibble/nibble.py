"""Threshold classification of PageRank scores into community 1 (PageRank Nibble)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Union

import numpy as np

from .errors import ValidationError
from .pagerank import PagerankResult
from .sbm import DsbmGraph


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class ClassificationResult:
    """Outcome of ``predicted_c1 = {v : R_v > threshold}``.

    ``confusion`` counts every vertex; ``confusion_nonseed`` leaves the seeds out.
    Community 1 is the positive class.
    """

    predicted_c1: np.ndarray
    threshold: float
    confusion: Confusion
    confusion_nonseed: Confusion
    sym_diff: int

    @property
    def misclass_c1(self) -> float:
        """Fraction of all community-1 vertices (seeds included) not predicted."""
        cf = self.confusion
        return cf.fn / (cf.tp + cf.fn) if cf.tp + cf.fn else 0.0

    @property
    def misclass_c1_nonseed(self) -> float:
        cf = self.confusion_nonseed
        return cf.fn / (cf.tp + cf.fn) if cf.tp + cf.fn else 0.0

    @property
    def misclass_c2(self) -> float:
        cf = self.confusion
        return cf.fp / (cf.fp + cf.tn) if cf.fp + cf.tn else 0.0

    def row(self) -> dict:
        cf = self.confusion
        return {
            "x0": self.threshold, "tp": cf.tp, "fp": cf.fp, "tn": cf.tn, "fn": cf.fn,
            "sym_diff": self.sym_diff, "misclass_c1": self.misclass_c1, "misclass_c2": self.misclass_c2,
        }


def default_threshold(s: float) -> float:
    """``5s/8``."""
    if not 0 < s < 1:
        raise ValidationError("s must lie in (0, 1)")
    return 5.0 * s / 8.0


def _scores(result: Union[PagerankResult, np.ndarray], g: DsbmGraph) -> np.ndarray:
    R = result.R if isinstance(result, PagerankResult) else np.asarray(result, dtype=float)
    if R.shape != (g.n,):
        raise ValidationError(f"score vector has length {R.size}, graph has {g.n} vertices")
    return R


def _confusion(pred: np.ndarray, truth: np.ndarray) -> Confusion:
    tp = int(np.count_nonzero(pred & truth))
    fp = int(np.count_nonzero(pred & ~truth))
    fn = int(np.count_nonzero(~pred & truth))
    tn = int(pred.size - tp - fp - fn)
    return Confusion(tp, fp, tn, fn)


def classify(result: Union[PagerankResult, np.ndarray], g: DsbmGraph, x0: float) -> ClassificationResult:
    """Predict community 1 for ``R_v > x0``; ties go to community 2."""
    R = _scores(result, g)
    pred = R > x0
    truth = g.labels == 1
    nonseed = ~g.seed_mask
    full = _confusion(pred, truth)
    pred.setflags(write=False)
    return ClassificationResult(
        predicted_c1=pred,
        threshold=float(x0),
        confusion=full,
        confusion_nonseed=_confusion(pred[nonseed], truth[nonseed]),
        sym_diff=full.fn + full.fp,
    )


def sweep_thresholds(
    result: Union[PagerankResult, np.ndarray], g: DsbmGraph, grid: Iterable[float]
) -> List[ClassificationResult]:
    """One :func:`classify` per threshold, in grid order."""
    grid = list(grid)
    if not grid:
        raise ValidationError("threshold grid is empty")
    R = _scores(result, g)
    return [classify(R, g, x) for x in grid]


def best_threshold(rows: List[ClassificationResult]) -> float:
    """Threshold with the smallest symmetric difference (first one on ties)."""
    if not rows:
        return math.nan
    return min(rows, key=lambda r: r.sym_diff).threshold
