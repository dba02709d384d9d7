"""Closed-form AKSA power curve under zero inflation and Brown moment matching."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError
from .stats_kernel import normal_cdf, normal_quantile


@dataclass(frozen=True)
class TheoryParams:
    delta0: float      # average effect over the positive tail
    d_at_zero: float   # effect curve at the spike
    sigma: float       # first-order SD of the effect estimator
    n: int
    alpha: float = 0.05

    def __post_init__(self):
        if not (self.sigma > 0):
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if self.n < 1:
            raise DomainError(f"n must be >= 1, got {self.n}")
        if not (0 < self.alpha < 1):
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")


def average_effect(params: TheoryParams, pi0: float) -> float:
    """Population-average effect when a fraction pi0 of subjects sits at the spike."""
    if not (0.0 <= pi0 < 1.0):
        raise DomainError(f"pi0 must lie in [0, 1), got {pi0}")
    return params.delta0 - pi0 * (params.delta0 - params.d_at_zero)


def noncentrality(params: TheoryParams, pi0: float) -> float:
    return math.sqrt(params.n) * average_effect(params, pi0) / params.sigma


def power_from_noncentrality(lam: float, alpha: float) -> float:
    z = normal_quantile(1.0 - alpha / 2.0)
    return 1.0 - normal_cdf(z - lam) + normal_cdf(-z - lam)


def aksa_asymptotic_power(params: TheoryParams, pi0: float) -> float:
    """Two-sided asymptotic power of a normal test with drift sqrt(N) * Delta(pi0) / sigma."""
    return power_from_noncentrality(noncentrality(params, pi0), params.alpha)


@dataclass(frozen=True)
class BrownMoments:
    c: float
    nu: float
    mu_s: float
    var_s: float


def brown_moment_match(rho: float) -> BrownMoments:
    """Scale and degrees of freedom matching the first two moments of the Fisher sum.

    With exponential(mean 2) margins and covariance 4*rho the Fisher statistic has
    mean 4 and variance 8(1 + rho); solving c*nu = mean, 2*c^2*nu = variance gives
    c = 1 + rho and nu = 4 / c.
    """
    if not (0.0 <= rho <= 1.0):
        raise DomainError(f"rho must lie in [0, 1], got {rho}")
    mu_s = 4.0
    var_s = 8.0 + 2.0 * (4.0 * rho)
    c = var_s / (2.0 * mu_s)
    nu = mu_s / c
    return BrownMoments(c=c, nu=nu, mu_s=mu_s, var_s=var_s)
