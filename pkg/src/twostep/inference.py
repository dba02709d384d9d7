"""Spike, tail and AKSA permutation tests and the Fisher/Brown two-step combination."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels
from .dataset import TrialDataset
from .errors import DomainError, InvalidInputError, UndefinedCorrelationError
from .perm_engine import (
    PermTrace,
    SeedSpec,
    derive_stream,
    enumerate_label_assignments,
    permutation_pvalue,
    shuffled_rows,
)
from .stats_kernel import chi_square_sf, chi_square_sf_array, spearman_rho

DEFAULT_PERMS = 1000
MIN_TAIL_SUBJECTS = 5
MIN_CORRELATION_PERMS = 10


@dataclass(frozen=True)
class TestOutcome:
    statistic: float
    p_value: float
    n_perms: int
    trace: PermTrace | None = None
    degenerate: str | None = None

    __test__ = False  # keep pytest from collecting this class


@dataclass(frozen=True)
class TwoStepResult:
    spike: TestOutcome
    tail: TestOutcome
    s_fisher: float
    p_fisher: float
    rho_hat: float
    c: float
    nu: float
    s_brown: float
    p_brown: float

    @property
    def p_a(self) -> float:
        return self.spike.p_value

    @property
    def p_b(self) -> float:
        return self.tail.p_value


@dataclass(frozen=True)
class BrownCombination:
    c: float
    nu: float
    s_brown: float
    p_brown: float


@dataclass
class _Problem:
    """Observed label arrangement plus the statistic evaluated on (B, n) label rows."""

    labels: np.ndarray
    statistic: Callable[[np.ndarray], np.ndarray]
    order: np.ndarray | None = None

    def observed(self) -> float:
        return float(self.statistic(self.labels[None, :])[0])


def _degenerate(reason: str) -> TestOutcome:
    return TestOutcome(statistic=0.0, p_value=1.0, n_perms=0, degenerate=reason)


def _check_perms(n_perms: int) -> int:
    n_perms = int(n_perms)
    if n_perms < 1:
        raise InvalidInputError(f"n_perms must be >= 1, got {n_perms}")
    return n_perms


def _biomarker_order(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # ascending x; ties (including the zero block) in one random order per call
    tiebreak = rng.permutation(x.size)
    return np.lexsort((tiebreak, x))


def _spike_problem(ds: TrialDataset) -> _Problem:
    groups = ds.t + 2 * (ds.x > 0).astype(np.int64)
    y = np.ascontiguousarray(ds.y)
    return _Problem(groups, lambda rows: _kernels.cell_mean_gap(y, rows, 1, 0))


def _prefix_problem(y, t, x, rng) -> _Problem:
    order = _biomarker_order(x, rng)
    _, yrank = np.unique(y[order], return_inverse=True)
    yrank = yrank.astype(np.int64)
    n_unique = int(yrank.max()) + 1
    n_prefix = order.size - 1
    return _Problem(
        np.ascontiguousarray(t[order], dtype=np.int64),
        lambda rows: _kernels.prefix_ks_mean(yrank, n_unique, rows, n_prefix),
        order=order,
    )


def _tail_problem(ds: TrialDataset, rng) -> _Problem:
    pos = ds.x > 0
    return _prefix_problem(ds.y[pos], ds.t[pos], ds.x[pos], rng)


def _main_problem(ds: TrialDataset) -> _Problem:
    y = np.ascontiguousarray(ds.y)
    return _Problem(ds.t.astype(np.int64), lambda rows: _kernels.cell_mean_gap(y, rows, 1, 0))


def _run(problem: _Problem, n_perms: int, rng, keep_trace: bool) -> TestOutcome:
    observed = problem.observed()
    rows = shuffled_rows(problem.labels, n_perms, rng)
    trace = PermTrace(observed, problem.statistic(rows))
    return TestOutcome(
        statistic=observed,
        p_value=permutation_pvalue(trace),
        n_perms=n_perms,
        trace=trace if keep_trace else None,
    )


def _spike_degenerate_reason(ds: TrialDataset) -> str | None:
    zero = ds.zero_mask
    if not zero.any():
        return "no zero-biomarker subjects"
    n_treated = int(np.count_nonzero(ds.t[zero] == 1))
    if n_treated == 0 or n_treated == int(zero.sum()):
        return "empty spike cell"
    return None


def spike_test(ds: TrialDataset, n_perms: int = DEFAULT_PERMS, seed: SeedSpec = SeedSpec(0),
               keep_trace: bool = False) -> TestOutcome:
    """Absolute treated-minus-control mean difference among zero-biomarker subjects.

    The null shuffles the four-level labels ``t + 2*(x > 0)`` over all subjects.
    """
    n_perms = _check_perms(n_perms)
    reason = _spike_degenerate_reason(ds)
    if reason:
        return _degenerate(reason)
    return _run(_spike_problem(ds), n_perms, derive_stream(seed), keep_trace)


def tail_test(ds: TrialDataset, n_perms: int = DEFAULT_PERMS, seed: SeedSpec = SeedSpec(0),
              keep_trace: bool = False) -> TestOutcome:
    """Prefix-KS average over the positive-biomarker subjects, permuting arms within them."""
    n_perms = _check_perms(n_perms)
    if ds.n_positive < MIN_TAIL_SUBJECTS:
        return _degenerate(f"fewer than {MIN_TAIL_SUBJECTS} positive-biomarker subjects")
    rng = derive_stream(seed)
    return _run(_tail_problem(ds, rng), n_perms, rng, keep_trace)


def aksa_test(ds: TrialDataset, n_perms: int = DEFAULT_PERMS, seed: SeedSpec = SeedSpec(0),
              keep_trace: bool = False) -> TestOutcome:
    """Prefix-KS average over all subjects ordered by biomarker (zeros first)."""
    n_perms = _check_perms(n_perms)
    if len(ds) < 5:
        raise InvalidInputError(f"AKSA needs at least 5 subjects, got {len(ds)}")
    rng = derive_stream(seed)
    problem = _prefix_problem(ds.y, ds.t, ds.x, rng)
    return _run(problem, n_perms, rng, keep_trace)


def main_effect_test(ds: TrialDataset, n_perms: int = DEFAULT_PERMS, seed: SeedSpec = SeedSpec(0),
                     keep_trace: bool = False) -> TestOutcome:
    n_perms = _check_perms(n_perms)
    n_treated = int(ds.t.sum())
    if n_treated == 0 or n_treated == len(ds):
        raise InvalidInputError("main-effect test needs both arms to be nonempty")
    return _run(_main_problem(ds), n_perms, derive_stream(seed), keep_trace)


_EXACT_TESTS = ("spike", "tail", "aksa", "main")


def exact_test(ds: TrialDataset, test: str, seed: SeedSpec = SeedSpec(0), limit: int = 100_000) -> TestOutcome:
    """Exact permutation p-value by enumerating every distinct label arrangement.

    ``seed`` fixes the biomarker tie order exactly as the Monte Carlo test would.
    The returned trace holds the statistic of every arrangement except the observed
    one, so ``permutation_pvalue(result.trace) == result.p_value``.
    """
    if test not in _EXACT_TESTS:
        raise InvalidInputError(f"unknown test {test!r}; choose from {_EXACT_TESTS}")
    if test == "spike":
        reason = _spike_degenerate_reason(ds)
        if reason:
            return _degenerate(reason)
        problem = _spike_problem(ds)
    elif test == "tail":
        if ds.n_positive < MIN_TAIL_SUBJECTS:
            return _degenerate(f"fewer than {MIN_TAIL_SUBJECTS} positive-biomarker subjects")
        problem = _tail_problem(ds, derive_stream(seed))
    elif test == "aksa":
        if len(ds) < 5:
            raise InvalidInputError(f"AKSA needs at least 5 subjects, got {len(ds)}")
        problem = _prefix_problem(ds.y, ds.t, ds.x, derive_stream(seed))
    else:
        n_treated = int(ds.t.sum())
        if n_treated == 0 or n_treated == len(ds):
            raise InvalidInputError("main-effect test needs both arms to be nonempty")
        problem = _main_problem(ds)

    rows = np.array(list(enumerate_label_assignments(problem.labels.tolist(), limit)), dtype=np.int64)
    stats = problem.statistic(rows)
    observed = problem.observed()
    is_observed = np.all(rows == problem.labels[None, :], axis=1)
    p_exact = int(np.count_nonzero(stats >= observed)) / rows.shape[0]
    others = stats[~is_observed]
    trace = PermTrace(observed, others) if others.size else None
    return TestOutcome(statistic=observed, p_value=p_exact, n_perms=int(others.size), trace=trace)


def _check_pvalue(p: float, name: str) -> float:
    p = float(p)
    if not (0.0 < p <= 1.0):
        raise DomainError(f"{name} must lie in (0, 1], got {p}")
    return p


def fisher_combine(p_a: float, p_b: float) -> tuple[float, float]:
    """Return (S_Fisher, p_Fisher) with S = -2(ln p_a + ln p_b) referred to chi2 on 4 df."""
    p_a = _check_pvalue(p_a, "p_a")
    p_b = _check_pvalue(p_b, "p_b")
    s = -2.0 * (math.log(p_a) + math.log(p_b)) + 0.0
    return s, chi_square_sf(s, 4.0)


def brown_combine(p_a: float, p_b: float, rho: float) -> BrownCombination:
    """Brown's scaled chi-square; rho is clamped to [0, 1] before use."""
    rho = float(rho)
    if not math.isfinite(rho):
        raise DomainError(f"rho must be finite, got {rho}")
    s_fisher, _ = fisher_combine(p_a, p_b)
    c = 1.0 + min(1.0, max(0.0, rho))
    nu = 4.0 / c
    s_brown = s_fisher / c
    return BrownCombination(c=c, nu=nu, s_brown=s_brown, p_brown=chi_square_sf(s_brown, nu))


def fisher_combine_many(p_a, p_b) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`fisher_combine` over arrays of p-value pairs."""
    p_a = np.asarray(p_a, dtype=float)
    p_b = np.asarray(p_b, dtype=float)
    if np.any(~((p_a > 0) & (p_a <= 1))) or np.any(~((p_b > 0) & (p_b <= 1))):
        raise DomainError("p-values must lie in (0, 1]")
    s = -2.0 * (np.log(p_a) + np.log(p_b)) + 0.0
    return s, chi_square_sf_array(s, 4.0)


def brown_combine_many(p_a, p_b, rho: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised Brown combination with a common rho; returns (S_Brown, p_Brown)."""
    if not math.isfinite(rho):
        raise DomainError(f"rho must be finite, got {rho}")
    s_fisher, _ = fisher_combine_many(p_a, p_b)
    c = 1.0 + min(1.0, max(0.0, float(rho)))
    s_brown = s_fisher / c
    return s_brown, chi_square_sf_array(s_brown, 4.0 / c)


def estimate_component_correlation(ds: TrialDataset, n_perms: int = DEFAULT_PERMS,
                                   seed: SeedSpec = SeedSpec(0)) -> float:
    """Spearman correlation of spike and tail statistics under joint arm permutations.

    Each replicate permutes ``t`` over all subjects (biomarker fixed) and evaluates
    the spike statistic on the zero block and the tail statistic on the positives.
    Returns 0 when a component cannot be formed or a statistic sequence is constant.
    """
    n_perms = int(n_perms)
    if n_perms < MIN_CORRELATION_PERMS:
        raise InvalidInputError(f"n_perms must be >= {MIN_CORRELATION_PERMS} to estimate a correlation")
    if ds.n_zero < 1 or ds.n_positive < MIN_TAIL_SUBJECTS:
        return 0.0
    rng = derive_stream(seed)
    zero = ds.zero_mask
    pos = ~zero
    tail = _tail_problem(ds, rng)
    rows = shuffled_rows(ds.t.astype(np.int64), n_perms, rng)
    spike_stats = _kernels.cell_mean_gap(np.ascontiguousarray(ds.y[zero]),
                                         np.ascontiguousarray(rows[:, zero]), 1, 0)
    tail_rows = np.ascontiguousarray(rows[:, pos][:, tail.order])
    tail_stats = tail.statistic(tail_rows)
    try:
        return spearman_rho(spike_stats, tail_stats)
    except UndefinedCorrelationError:
        return 0.0


def two_step(ds: TrialDataset, n_perms: int = DEFAULT_PERMS, seed: SeedSpec = SeedSpec(0),
             estimate_correlation: bool = True) -> TwoStepResult:
    """Spike and tail tests combined by Fisher's and Brown's rules.

    The spike, tail and correlation steps use child streams 0, 1 and 2 of ``seed``.
    With ``estimate_correlation=False`` (or fewer than 10 permutations) rho is 0 and
    Brown coincides with Fisher.

    When exactly one component is degenerate the combination runs over the remaining
    component alone: s = -2 log p on 2 degrees of freedom, so both combined p-values
    equal that component's p-value. When both are degenerate the result is 1.
    """
    n_perms = _check_perms(n_perms)
    spike = spike_test(ds, n_perms, seed.child(0))
    tail = tail_test(ds, n_perms, seed.child(1))
    live = [o for o in (spike, tail) if o.degenerate is None]
    if len(live) == 1:
        p = live[0].p_value
        s = -2.0 * math.log(p) + 0.0
        return TwoStepResult(spike=spike, tail=tail, s_fisher=s, p_fisher=p, rho_hat=0.0,
                             c=1.0, nu=2.0, s_brown=s, p_brown=p)
    rho = 0.0
    if live and estimate_correlation and n_perms >= MIN_CORRELATION_PERMS:
        rho = estimate_component_correlation(ds, n_perms, seed.child(2))
    s_fisher, p_fisher = fisher_combine(spike.p_value, tail.p_value)
    brown = brown_combine(spike.p_value, tail.p_value, rho)
    return TwoStepResult(
        spike=spike,
        tail=tail,
        s_fisher=s_fisher,
        p_fisher=p_fisher,
        rho_hat=rho,
        c=brown.c,
        nu=brown.nu,
        s_brown=brown.s_brown,
        p_brown=brown.p_brown,
    )
