"""Numerical primitives: KS distance, chi-square tail, normal CDF, ranks, Wilson CI."""

from __future__ import annotations

import math
from statistics import NormalDist

import numpy as np

from .errors import DomainError, InvalidInputError, UndefinedCorrelationError

_EPS = 1e-15
_TINY = 1e-300
_MAX_ITER = 10_000
_STD_NORMAL = NormalDist()


def _as_sample(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float).ravel()
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def ks_two_sample(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov distance sup_y |F_a(y) - F_b(y)|.

    Both ECDFs are right-continuous. Returns 0 when either sample is empty.
    """
    a = _as_sample(a, "a")
    b = _as_sample(b, "b")
    if a.size == 0 or b.size == 0:
        return 0.0
    a = np.sort(a)
    b = np.sort(b)
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def _lower_series(a: float, x: float) -> float:
    # P(a, x) by its power series; converges fast for x < a + 1
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _upper_continued_fraction(a: float, x: float) -> float:
    # Q(a, x) via modified Lentz evaluation of the Legendre continued fraction
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_upper_gamma(a: float, x: float) -> float:
    """Q(a, x) = Gamma(a, x) / Gamma(a) for a > 0, x >= 0."""
    if not (a > 0) or not math.isfinite(a):
        raise DomainError(f"shape must be positive and finite, got {a}")
    if not (x >= 0):
        raise DomainError(f"argument must be non-negative, got {x}")
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < a + 1.0:
        return max(0.0, 1.0 - _lower_series(a, x))
    return min(1.0, _upper_continued_fraction(a, x))


def chi_square_sf(s: float, nu: float) -> float:
    """Pr{chi2_nu >= s}; nu may be fractional."""
    s = float(s)
    nu = float(nu)
    if not (s >= 0):
        raise DomainError(f"chi-square statistic must be >= 0, got {s}")
    if not (nu > 0) or not math.isfinite(nu):
        raise DomainError(f"degrees of freedom must be > 0, got {nu}")
    return regularized_upper_gamma(0.5 * nu, 0.5 * s)


def chi_square_sf_array(s, nu: float) -> np.ndarray:
    """Elementwise :func:`chi_square_sf` over an array of statistics."""
    s = np.asarray(s, dtype=float)
    out = np.empty(s.shape)
    flat = out.reshape(-1)
    for i, v in enumerate(s.reshape(-1)):
        flat[i] = chi_square_sf(v, nu)
    return out


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF on the open interval (0, 1)."""
    if not (0.0 < p < 1.0):
        raise DomainError(f"quantile requires p in (0, 1), got {p}")
    return _STD_NORMAL.inv_cdf(p)


def midranks(values) -> np.ndarray:
    """Ranks 1..n with tied values sharing the average of their positions."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="mergesort")
    sorted_v = v[order]
    ranks = np.empty(v.size)
    start = 0
    n = v.size
    while start < n:
        stop = start + 1
        while stop < n and sorted_v[stop] == sorted_v[start]:
            stop += 1
        ranks[order[start:stop]] = 0.5 * (start + stop - 1) + 1.0
        start = stop
    return ranks


def spearman_rho(u, v) -> float:
    """Spearman correlation as the Pearson correlation of midranks."""
    u = _as_sample(u, "u")
    v = _as_sample(v, "v")
    if u.size != v.size:
        raise InvalidInputError(f"length mismatch: {u.size} vs {v.size}")
    if u.size < 2:
        raise InvalidInputError("spearman_rho needs at least two pairs")
    ru = midranks(u)
    rv = midranks(v)
    ru -= ru.mean()
    rv -= rv.mean()
    su = float(np.dot(ru, ru))
    sv = float(np.dot(rv, rv))
    if su == 0 or sv == 0:
        raise UndefinedCorrelationError("zero rank variance")
    rho = float(np.dot(ru, rv)) / math.sqrt(su * sv)
    return min(1.0, max(-1.0, rho))


def wilson_ci(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1 or not (0 <= successes <= trials):
        raise InvalidInputError(f"need 0 <= successes <= trials, trials >= 1; got {successes}/{trials}")
    if not (0.0 < level < 1.0):
        raise InvalidInputError(f"level must lie in (0, 1), got {level}")
    z = normal_quantile(0.5 + 0.5 * level)
    z2 = z * z
    phat = successes / trials
    denom = 1.0 + z2 / trials
    centre = (phat + z2 / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z2 / (4 * trials * trials)) / denom
    lo = max(0.0, centre - half)
    hi = min(1.0, centre + half)
    # guard against rounding at the boundaries
    return min(lo, phat), max(hi, phat)
