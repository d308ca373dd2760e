"""PageRank Nibble community recovery on the sparse two-community directed SBM."""

__version__ = "0.1.0"

from .errors import GraphFormatError, NonConvergenceError, SamplerBudgetError, ValidationError
from .nibble import ClassificationResult, classify, default_threshold, sweep_thresholds
from .pagerank import PagerankResult, personalized_pagerank, residual_history, seed_personalization
from .sampler import EmpiricalDist, FpParams, ks_distance, sample_limit_pagerank, truncation_bound
from .sbm import DsbmGraph, ModelParams, degree_stats, from_edges, generate, load, save
from .theory import TheoryStats, theory_stats

__all__ = [
    "ClassificationResult", "DsbmGraph", "EmpiricalDist", "FpParams", "GraphFormatError",
    "ModelParams", "NonConvergenceError", "PagerankResult", "SamplerBudgetError", "TheoryStats",
    "ValidationError", "classify", "default_threshold", "degree_stats", "from_edges", "generate",
    "ks_distance", "load", "personalized_pagerank", "residual_history", "sample_limit_pagerank",
    "save", "seed_personalization", "sweep_thresholds", "theory_stats", "truncation_bound",
]
