"""Post-rejection diagnosis and biomarker cut-point selection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .dataset import TrialDataset
from .errors import InfeasibleError, InvalidInputError
from .inference import DEFAULT_PERMS, TwoStepResult, main_effect_test, two_step
from .perm_engine import PermTrace, SeedSpec, derive_stream, permutation_pvalue, shuffled_rows

DEFAULT_BOOT = 1000
MIN_CURVE_POSITIVES = 5


@dataclass(frozen=True)
class CurvePoint:
    x: float
    effect: float
    band_lo: float
    band_hi: float


@dataclass(frozen=True)
class EffectCurve:
    points: tuple[CurvePoint, ...]
    bandwidth: float
    spike_effect: float | None = None
    spike_band: tuple[float, float] | None = None
    degenerate: str | None = None


@dataclass(frozen=True)
class DiagnosticsReport:
    p_a: float
    p_b: float
    p_fisher: float
    p_brown: float
    p_main: float
    p_interaction_only_fisher: float
    p_interaction_only_brown: float
    delta_main_hat: float
    curve: EffectCurve
    primary: TwoStepResult = field(repr=False)
    interaction_only: TwoStepResult = field(repr=False)


def _arm_mean_gap(ds: TrialDataset) -> float:
    return float(ds.y[ds.t == 1].mean() - ds.y[ds.t == 0].mean())


def _check_arms(ds: TrialDataset) -> None:
    n_treated = int(ds.t.sum())
    if n_treated == 0 or n_treated == len(ds):
        raise InvalidInputError("both arms must be nonempty")


def silverman_bandwidth(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    sd = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    if spread <= 0:
        spread = sd if sd > 0 else 1.0
    return 0.9 * spread * x.size ** -0.2


def _local_linear(x: np.ndarray, y: np.ndarray, grid: np.ndarray, h: float) -> np.ndarray:
    """Gaussian-kernel local-linear regression of y on x evaluated on ``grid``."""
    if x.size == 0:
        return np.full(grid.size, np.nan)
    u = (x[None, :] - grid[:, None]) / h
    w = np.exp(-0.5 * u * u)
    dx = x[None, :] - grid[:, None]
    s0 = w.sum(axis=1)
    s1 = (w * dx).sum(axis=1)
    s2 = (w * dx * dx).sum(axis=1)
    t0 = (w * y[None, :]).sum(axis=1)
    t1 = (w * dx * y[None, :]).sum(axis=1)
    det = s0 * s2 - s1 * s1
    with np.errstate(invalid="ignore", divide="ignore"):
        fit = (s2 * t0 - s1 * t1) / det
        # fall back to the kernel-weighted mean where the local design is singular
        flat = ~(np.abs(det) > 1e-12 * s0 * s0 * h * h)
        fit[flat] = t0[flat] / s0[flat]
    return fit


def _curve_values(ds: TrialDataset, grid: np.ndarray, h: float) -> np.ndarray:
    pos = ds.x > 0
    treated = pos & (ds.t == 1)
    control = pos & (ds.t == 0)
    return (_local_linear(ds.x[treated], ds.y[treated], grid, h)
            - _local_linear(ds.x[control], ds.y[control], grid, h))


def _spike_gap(ds: TrialDataset) -> float:
    zero = ds.x == 0
    a = ds.y[zero & (ds.t == 1)]
    b = ds.y[zero & (ds.t == 0)]
    if a.size == 0 or b.size == 0:
        return np.nan
    return float(a.mean() - b.mean())


def effect_curve(ds: TrialDataset, grid_size: int = 50, n_boot: int = DEFAULT_BOOT,
                 seed: SeedSpec = SeedSpec(0)) -> EffectCurve:
    """Treatment-effect curve over the positive biomarker range with a bootstrap band.

    Each arm is smoothed by Gaussian local-linear regression (Silverman bandwidth on the
    positive biomarker values); the band is the pointwise 2.5/97.5 percentile over
    subject-level bootstrap resamples, widened if needed to contain the estimate.
    The spike is reported separately as a mean difference with its own band.
    """
    if grid_size < 2:
        raise InvalidInputError(f"grid_size must be >= 2, got {grid_size}")
    if n_boot < 1:
        raise InvalidInputError(f"n_boot must be >= 1, got {n_boot}")
    rng = derive_stream(seed)
    boot_index = rng.integers(0, len(ds), size=(n_boot, len(ds)))

    spike = _spike_gap(ds)
    spike_band = None
    if np.isfinite(spike):
        draws = np.array([_spike_gap(ds.take(idx)) for idx in boot_index])
        lo, hi = np.nanpercentile(draws, [2.5, 97.5]) if np.isfinite(draws).any() else (spike, spike)
        spike_band = (float(min(lo, spike)), float(max(hi, spike)))
    spike_value = float(spike) if np.isfinite(spike) else None

    xpos = ds.x[ds.x > 0]
    if xpos.size < MIN_CURVE_POSITIVES:
        return EffectCurve((), float("nan"), spike_value, spike_band,
                           degenerate=f"fewer than {MIN_CURVE_POSITIVES} positive-biomarker subjects")
    h = silverman_bandwidth(xpos)
    grid = np.linspace(xpos.min(), xpos.max(), grid_size)
    est = _curve_values(ds, grid, h)
    boot = np.vstack([_curve_values(ds.take(idx), grid, h) for idx in boot_index])
    with np.errstate(all="ignore"):
        ok = np.isfinite(boot).any(axis=0)
        lo = np.full(grid_size, np.nan)
        hi = np.full(grid_size, np.nan)
        if ok.any():
            lo[ok], hi[ok] = np.nanpercentile(boot[:, ok], [2.5, 97.5], axis=0)
    points = tuple(
        CurvePoint(float(g), float(e), float(np.fmin(l, e)), float(np.fmax(u, e)))
        for g, e, l, u in zip(grid, est, lo, hi)
    )
    return EffectCurve(points, h, spike_value, spike_band)


def diagnose(ds: TrialDataset, n_perms: int = DEFAULT_PERMS, n_boot: int = DEFAULT_BOOT,
             seed: SeedSpec = SeedSpec(0), grid_size: int = 50) -> DiagnosticsReport:
    """Component p-values, main-effect test, mean-centred re-test and effect curve."""
    _check_arms(ds)
    if n_perms < 1 or n_boot < 1:
        raise InvalidInputError("n_perms and n_boot must be >= 1")
    primary = two_step(ds, n_perms, seed.child(0))
    main = main_effect_test(ds, n_perms, seed.child(1))
    delta_main = _arm_mean_gap(ds)
    centred = ds.with_outcomes(ds.y - delta_main * ds.t)
    interaction = two_step(centred, n_perms, seed.child(2))
    curve = effect_curve(ds, grid_size, n_boot, seed.child(3))
    return DiagnosticsReport(
        p_a=primary.p_a,
        p_b=primary.p_b,
        p_fisher=primary.p_fisher,
        p_brown=primary.p_brown,
        p_main=main.p_value,
        p_interaction_only_fisher=interaction.p_fisher,
        p_interaction_only_brown=interaction.p_brown,
        delta_main_hat=delta_main,
        curve=curve,
        primary=primary,
        interaction_only=interaction,
    )


@dataclass(frozen=True)
class CutpointResult:
    tau_hat: float
    c_hat: float
    p_perm: float
    tau_ci: tuple[float, float]
    delta_le: float
    delta_le_ci: tuple[float, float]
    delta_gt: float
    delta_gt_ci: tuple[float, float]
    n_candidates: int
    n_perms: int
    n_boot: int


class _SortedSample:
    """Subjects sorted by biomarker with the end index of each tied-value block."""

    def __init__(self, ds: TrialDataset):
        order = np.argsort(ds.x, kind="mergesort")
        self.x = ds.x[order]
        self.y = np.ascontiguousarray(ds.y[order])
        self.t = np.ascontiguousarray(ds.t[order], dtype=np.int64)
        change = np.flatnonzero(np.diff(self.x) != 0) + 1
        self.block_end = np.append(change, self.x.size).astype(np.int64)
        self.values = self.x[self.block_end - 1]

    def scan(self, labels: np.ndarray, min_cell: int):
        return _kernels.cutpoint_scan(self.y, labels, self.block_end, min_cell)


def cutpoint_objective(ds: TrialDataset, min_per_cell: int = 5) -> dict[float, float]:
    """C(tau) = |Delta_{>tau} - Delta_{<=tau}| for every feasible candidate tau."""
    out = {}
    for tau in np.unique(ds.x):
        low = ds.x <= tau
        cells = [ds.t[low] == 1, ds.t[low] == 0, ds.t[~low] == 1, ds.t[~low] == 0]
        if min(int(c.sum()) for c in cells) < min_per_cell:
            continue
        d_low = ds.y[low][cells[0]].mean() - ds.y[low][cells[1]].mean()
        d_high = ds.y[~low][cells[2]].mean() - ds.y[~low][cells[3]].mean()
        out[float(tau)] = float(abs(d_high - d_low))
    return out


def select_cutpoint(ds: TrialDataset, min_per_cell: int = 5, n_perms: int = DEFAULT_PERMS,
                    n_boot: int = DEFAULT_BOOT, seed: SeedSpec = SeedSpec(0)) -> CutpointResult:
    """Threshold maximising the between-stratum difference in treatment contrasts.

    Candidates are the distinct biomarker values leaving ``min_per_cell`` treated and
    control subjects on each side. The permutation p-value re-maximises over candidates
    for every arm permutation, so it accounts for the selection. Bootstrap intervals
    re-optimise the threshold in each resample.
    """
    if n_perms < 1 or n_boot < 1:
        raise InvalidInputError("n_perms and n_boot must be >= 1")
    sample = _SortedSample(ds)
    best, arg, d_le, d_gt = sample.scan(sample.t[None, :], min_per_cell)
    if arg[0] < 0:
        raise InfeasibleError(
            f"no biomarker threshold leaves at least {min_per_cell} treated and "
            f"{min_per_cell} control subjects in both strata")
    n_candidates = len(cutpoint_objective(ds, min_per_cell))
    tau_hat = float(sample.values[arg[0]])
    c_hat = float(best[0])

    rng = derive_stream(seed.child(0))
    perm_best, _, _, _ = sample.scan(shuffled_rows(sample.t, n_perms, rng), min_per_cell)
    p_perm = permutation_pvalue(PermTrace(c_hat, perm_best))

    rng = derive_stream(seed.child(1))
    taus = np.full(n_boot, np.nan)
    lows = np.full(n_boot, np.nan)
    highs = np.full(n_boot, np.nan)
    for b in range(n_boot):
        idx = rng.integers(0, len(ds), size=len(ds))
        resample = _SortedSample(ds.take(idx))
        _, a, lo, hi = resample.scan(resample.t[None, :], min_per_cell)
        if a[0] >= 0:
            taus[b] = resample.values[a[0]]
            lows[b] = lo[0]
            highs[b] = hi[0]

    def interval(draws):
        if not np.isfinite(draws).any():
            return (float("nan"), float("nan"))
        lo, hi = np.nanpercentile(draws, [2.5, 97.5])
        return (float(lo), float(hi))

    return CutpointResult(
        tau_hat=tau_hat,
        c_hat=c_hat,
        p_perm=p_perm,
        tau_ci=interval(taus),
        delta_le=float(d_le[0]),
        delta_le_ci=interval(lows),
        delta_gt=float(d_gt[0]),
        delta_gt_ci=interval(highs),
        n_candidates=n_candidates,
        n_perms=int(n_perms),
        n_boot=int(n_boot),
    )
