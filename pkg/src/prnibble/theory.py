"""Closed-form limit quantities for seed-personalized PageRank on the symmetric dSBM.

All functions take the kernel entries ``a`` (within) and ``b`` (across), the
seed fraction ``s`` of community 1 and the damping factor ``c``. The limit
personalization is ``Q ~ Bernoulli(s)`` in community 1 and ``Q = 0`` in
community 2; in-neighbour out-degrees are ``1 + Poisson((a+b)/2)``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ValidationError

_TAIL = 1e-16


def _lam(a: float, b: float) -> float:
    # 1 - exp(-(a+b)/2) = E[1/D] * (a+b)/2
    return -math.expm1(-(a + b) / 2.0)


def _check_ab(a: float, b: float) -> None:
    if a < 0 or b < 0 or a + b <= 0:
        raise ValidationError(f"need a, b >= 0 with a + b > 0, got a={a}, b={b}")


def mean_system(a: float, b: float, s: float, c: float):
    """Matrix and right-hand side of the linear system solved by ``(r1, r2)``."""
    lam = _lam(a, b)
    x = c * lam * a / (a + b)
    y = c * lam * b / (a + b)
    return np.array([[1.0 - x, -y], [-y, 1.0 - x]]), np.array([(1.0 - c) * s, 0.0])


def limit_means(a: float, b: float, s: float, c: float):
    """Return ``(r1, r2, r1_hat)``: limit mean PageRank of each community and of non-seeds.

    The closed form is cross-checked against a direct solve of the 2x2 system.
    """
    _check_ab(a, b)
    if not 0 <= c < 1:
        raise ValidationError(f"c must lie in [0, 1), got {c}")
    lam = _lam(a, b)
    if c * lam >= 1:
        raise ValidationError("c * lambda must be < 1")
    x = c * lam * a / (a + b)
    y = c * lam * b / (a + b)
    delta = (1.0 - x) ** 2 - y**2
    r1 = (1.0 - x) * s * (1.0 - c) / delta
    r2 = y * s * (1.0 - c) / delta
    e2 = lam * (a - b) / (a + b)
    denom = (1.0 - c * lam) * (1.0 - c * e2)
    r1_hat = (1.0 - c) * s * ((1.0 - x) / denom - 1.0)

    A, rhs = mean_system(a, b, s, c)
    sol = np.linalg.solve(A, rhs)
    if abs(sol[0] - r1) > 1e-12 or abs(sol[1] - r2) > 1e-12:
        raise ArithmeticError(f"closed-form means disagree with linear solve: {(r1, r2)} vs {sol}")
    return r1, r2, r1_hat


def mean_bounds(a: float, b: float, s: float, c: float):
    """Lower bound on r1, upper bound on r2, and whether the bounds' conditions hold."""
    ok = a > 0 and math.exp(-(a + b) / 2.0) <= b / (4.0 * a) and c > 0.5
    r1_lower = s * (1.0 - 2.0 * b / ((1.0 - c) * (a + b)))
    return r1_lower, s / 2.0, bool(ok)


def _poisson_cutoff(mu: float) -> int:
    # smallest m > mu with Chernoff tail exp(-mu) (e mu / m)^m below _TAIL
    if mu == 0:
        return 1
    m = max(int(math.ceil(mu)) + 1, 1)
    while -mu + m * (1.0 + math.log(mu / m)) > math.log(_TAIL):
        m += max(1, int(math.sqrt(mu)))
    return m


def _poisson_pmf_terms(mu: float, m: int) -> np.ndarray:
    k = np.arange(m + 1, dtype=float)
    if mu == 0:
        out = np.zeros(m + 1)
        out[0] = 1.0
        return out
    logp = -mu + k * math.log(mu) - np.array([math.lgamma(i + 1.0) for i in k])
    return np.exp(logp)


def poisson_inv_sq_moment(mu: float) -> float:
    """``E[1/(N+1)^2]`` for ``N ~ Poisson(mu)``, summed until the Poisson tail is below 1e-16."""
    if mu < 0:
        raise ValidationError("mu must be non-negative")
    m = _poisson_cutoff(mu)
    k = np.arange(m + 1, dtype=float)
    return math.fsum(_poisson_pmf_terms(mu, m) / (k + 1.0) ** 2)


def limit_variances(a: float, b: float, s: float, c: float):
    """Return ``(v1, v2, g1, g2, v1_bound, v2_bound)``.

    ``g1``/``g2`` are ``c^2 E[1/D^2]`` times ``(a-b)/2`` and ``(a+b)/2``, the
    eigenvalues of the variance recursion. The bounds are the a-priori ones
    that only use ``r_i <= s`` and ``E[1/D^2] <= 8/(a+b)^2``.
    """
    _check_ab(a, b)
    r1, r2, _ = limit_means(a, b, s, c)
    m2 = poisson_inv_sq_moment((a + b) / 2.0)
    g1 = c * c * m2 * (a - b) / 2.0
    g2 = c * c * m2 * (a + b) / 2.0
    if g2 >= 1:
        raise ValidationError("variance recursion is not contracting (g2 >= 1)")
    diag = g1 + g2 - 2.0 * g1 * g2
    off = g2 - g1
    K = np.array([[diag, off], [off, diag]])
    k = np.array([2.0 - g1 - g2, g2 - g1])
    h = (1.0 - c) ** 2 * s * (1.0 - s)
    v = (K @ np.array([r1 * r1, r2 * r2]) + h * k) / (2.0 * (1.0 - g1) * (1.0 - g2))
    v1_bound, v2_bound = variance_bounds(a, b, s, c)
    return float(v[0]), float(v[1]), g1, g2, v1_bound, v2_bound


def variance_bounds(a: float, b: float, s: float, c: float):
    if not 0 < s < 1:
        raise ValidationError("variance bounds need s in (0, 1)")
    base = 4.0 * c * c * s * s / ((a + b) * (1.0 - c * c))
    v1b = base + (1.0 - c) / (1.0 + c) * s * (1.0 - s)
    v2b = base * (1.0 + (1.0 - c) * (1.0 - s) / (2.0 * s * (1.0 + c)))
    return v1b, v2b


def misclassification_conditions(a: float, b: float, c: float) -> bool:
    if a + b <= 0 or a <= 0:
        return False
    ratio = 8.0 * b / (a + b)
    return bool(
        ratio < 0.5
        and math.exp(-(a + b) / 2.0) < b / (4.0 * a)
        and 0.5 < c <= 1.0 - ratio
    )


def misclassification_bounds(a: float, b: float, s: float, c: float):
    """Chebyshev bounds ``(delta1, delta2, conditions_met)`` at threshold ``5s/8``.

    ``delta1`` bounds the community-1 miss rate, ``delta2`` the community-2
    false-inclusion rate. Values above 1 are returned unchanged.
    """
    spread = 256.0 * c * c / ((a + b) * (1.0 - c * c)) if c < 1 else math.inf
    d1 = spread + 64.0 * (1.0 - c) * (1.0 - s) / ((1.0 + c) * s)
    d2 = spread * (1.0 + (1.0 - c) * (1.0 - s) / (2.0 * (1.0 + c) * s))
    return d1, d2, misclassification_conditions(a, b, c)


def optimal_threshold(r1: float, r2: float, v1: float, v2: float) -> float:
    """Threshold minimising ``v1/(r1-x)^2 + v2/(x-r2)^2``."""
    if v1 <= 0 or v2 <= 0:
        raise ValidationError("optimal threshold needs positive variances")
    w1, w2 = v1 ** (1.0 / 3.0), v2 ** (1.0 / 3.0)
    return (r1 * w2 + r2 * w1) / (w1 + w2)


def second_eigenvalue(a: float, b: float) -> float:
    """``E = lambda (a-b)/(a+b)``."""
    return _lam(a, b) * (a - b) / (a + b)


def optimal_damping(a: float, b: float):
    """Return ``(E, c_star)`` with ``c_star`` maximising ``r1_hat(c) - r2(c)``.

    ``c_star = (1 - sqrt(1-E))/E`` is evaluated as ``1/(1 + sqrt(1-E))``,
    which is the same number and tends to 1/2 as ``E -> 0``.
    """
    _check_ab(a, b)
    if a < b:
        raise ValidationError("optimal damping needs a >= b")
    e = second_eigenvalue(a, b)
    return e, 1.0 / (1.0 + math.sqrt(1.0 - e))


def nonseed_gap(a: float, b: float, s: float, c: float) -> float:
    """Limit ``r1_hat - r2 = s E c (1-c) / (1 - c E)``."""
    e = second_eigenvalue(a, b)
    return s * e * c * (1.0 - c) / (1.0 - c * e)


def community_gap(a: float, b: float, s: float, c: float) -> float:
    """Limit ``r1 - r2 = (1-c) s / (1 - c E)``; decreasing in ``c``."""
    e = second_eigenvalue(a, b)
    return (1.0 - c) * s / (1.0 - c * e)


@dataclass(frozen=True)
class TheoryStats:
    a: float
    b: float
    s: float
    c: float
    lam: float
    Delta: float
    r1: float
    r2: float
    r1_hat: float
    inv_sq_moment: float
    g1: float
    g2: float
    v1: float
    v2: float
    v1_bound: float
    v2_bound: float
    delta1: float
    delta2: float
    E: float
    c_star: float
    x0_star: float
    mean_bounds_ok: bool
    conditions_met: bool
    vacuous: bool

    def as_dict(self) -> dict:
        return asdict(self)


def theory_stats(a: float, b: float, s: float, c: float) -> TheoryStats:
    """Every closed-form limit quantity for one parameter point.

    ``c_star`` is left as NaN when ``a < b``; ``x0_star`` when a variance is 0.
    """
    r1, r2, r1_hat = limit_means(a, b, s, c)
    v1, v2, g1, g2, v1b, v2b = limit_variances(a, b, s, c)
    d1, d2, ok = misclassification_bounds(a, b, s, c)
    lam = _lam(a, b)
    x = c * lam * a / (a + b)
    y = c * lam * b / (a + b)
    e = second_eigenvalue(a, b)
    c_star = optimal_damping(a, b)[1] if a >= b else math.nan
    x0s = optimal_threshold(r1, r2, v1, v2) if v1 > 0 and v2 > 0 else math.nan
    return TheoryStats(
        a=a, b=b, s=s, c=c, lam=lam, Delta=(1 - x) ** 2 - y**2,
        r1=r1, r2=r2, r1_hat=r1_hat,
        inv_sq_moment=poisson_inv_sq_moment((a + b) / 2.0),
        g1=g1, g2=g2, v1=v1, v2=v2, v1_bound=v1b, v2_bound=v2b,
        delta1=d1, delta2=d2, E=e, c_star=c_star, x0_star=x0s,
        mean_bounds_ok=mean_bounds(a, b, s, c)[2],
        conditions_met=ok, vacuous=bool(d1 + d2 > 1),
    )
