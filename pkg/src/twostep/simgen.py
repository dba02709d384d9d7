"""Simulated trials under the global null and the spike/tail/mix/correlated alternatives."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .dataset import TrialDataset
from .errors import DomainError, InvalidInputError
from .perm_engine import SeedSpec, derive_stream

KINDS = ("null", "spike_only", "tail_only", "mix", "correlated")
CORRELATED_BASES = ("spike_only", "tail_only", "mix")

# base effects used by the correlated scenario before the shared shift
CORRELATED_SPIKE_EFFECT = 0.8
CORRELATED_TAIL_EFFECT = 2.0


@dataclass(frozen=True)
class TailDist:
    """Distribution of the positive biomarker values: U(0,1) or Beta(a, b)."""

    kind: str = "uniform"
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "beta"):
            raise InvalidInputError(f"unknown tail distribution {self.kind!r}")
        if self.kind == "beta" and not (self.a > 0 and self.b > 0):
            raise InvalidInputError(f"beta parameters must be positive, got ({self.a}, {self.b})")

    @classmethod
    def parse(cls, text: str) -> TailDist:
        """Accepts ``uniform``, ``beta 2 5``, ``beta(2,5)`` or ``beta:2:5``."""
        s = text.strip().lower()
        if s in ("uniform", "uniform01", "u01"):
            return cls()
        m = re.fullmatch(r"beta[\s(:,]*([0-9.eE+-]+)[\s,:]+([0-9.eE+-]+)\s*\)?", s)
        if not m:
            raise InvalidInputError(f"cannot parse tail distribution {text!r}")
        return cls("beta", float(m.group(1)), float(m.group(2)))

    def __str__(self) -> str:
        if self.kind == "uniform":
            return "uniform"
        return f"beta({self.a:g},{self.b:g})"

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "uniform":
            return 1.0 - rng.random(size)  # (0, 1]
        out = rng.beta(self.a, self.b, size)
        bad = out <= 0
        while bad.any():
            out[bad] = rng.beta(self.a, self.b, int(bad.sum()))
            bad = out <= 0
        return out


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    n: int
    pi0: float = 0.0
    tail: TailDist = field(default_factory=TailDist)
    delta: float = 0.0
    delta_a: float = 0.0
    delta_b: float = 0.0
    k_scale: float = 0.0
    base: str = "mix"
    seed: SeedSpec = SeedSpec(0)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown scenario kind {self.kind!r}; choose from {KINDS}")
        if int(self.n) < 2:
            raise InvalidInputError(f"n must be >= 2, got {self.n}")
        if not (0.0 <= self.pi0 < 1.0):
            raise InvalidInputError(f"pi0 must lie in [0, 1), got {self.pi0}")
        for name in ("delta", "delta_a", "delta_b", "k_scale"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidInputError(f"{name} must be finite")
        if self.k_scale < 0:
            raise InvalidInputError(f"k_scale must be >= 0, got {self.k_scale}")
        if self.kind == "correlated" and self.base not in CORRELATED_BASES:
            raise InvalidInputError(f"correlated base must be one of {CORRELATED_BASES}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def n_zero(self) -> int:
        return int(math.floor(self.pi0 * self.n + 0.5))

    def label(self) -> dict:
        """Flat description of the design point (seed excluded)."""
        return {
            "kind": self.kind,
            "n": self.n,
            "pi0": self.pi0,
            "tail": str(self.tail),
            "delta": self.delta,
            "delta_a": self.delta_a,
            "delta_b": self.delta_b,
            "k_scale": self.k_scale,
            "base": self.base if self.kind == "correlated" else "",
        }


def _effect_sizes(spec: ScenarioSpec) -> tuple[float, float]:
    """(spike shift, tail slope) implied by the scenario."""
    if spec.kind == "spike_only":
        return spec.delta, 0.0
    if spec.kind == "tail_only":
        return 0.0, spec.delta
    if spec.kind == "mix":
        return spec.delta_a, spec.delta_b
    if spec.kind == "correlated":
        spike = CORRELATED_SPIKE_EFFECT if spec.base in ("spike_only", "mix") else 0.0
        tail = CORRELATED_TAIL_EFFECT if spec.base in ("tail_only", "mix") else 0.0
        return spike, tail
    return 0.0, 0.0


def generate_trial(spec: ScenarioSpec) -> TrialDataset:
    """Draw one trial: zero-inflated biomarker, balanced arms, N(0,1) outcomes plus effects."""
    rng = derive_stream(spec.seed)
    n = spec.n
    n_zero = spec.n_zero

    x = np.zeros(n)
    positive = rng.permutation(n)[n_zero:]
    x[positive] = spec.tail.draw(rng, positive.size)

    t = np.zeros(n, dtype=np.int64)
    t[: (n + 1) // 2] = 1
    t = rng.permutation(t)

    y = rng.standard_normal(n)

    # ascending rank over all subjects, ties (the zero block) broken at random
    order = np.lexsort((rng.permutation(n), x))
    rank = np.empty(n)
    rank[order] = np.arange(1, n + 1)

    spike_shift, tail_slope = _effect_sizes(spec)
    treated = t == 1
    at_zero = x == 0
    y = y + spike_shift * (treated & at_zero) + tail_slope * (treated & ~at_zero) * rank / n
    if spec.kind == "correlated":
        z = rng.standard_normal()
        y = y + spec.k_scale * abs(z) * treated
    return TrialDataset(y=y, t=t, x=x)


@dataclass(frozen=True)
class PValuePair:
    p_a: float
    p_b: float


def pvalue_pair_arrays(rho: float, count: int, seed: SeedSpec) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian-copula p-value pairs as two arrays (fast path for experiments)."""
    if not (-1.0 <= rho <= 1.0):
        raise DomainError(f"rho must lie in [-1, 1], got {rho}")
    if count < 0:
        raise InvalidInputError(f"count must be >= 0, got {count}")
    rng = derive_stream(seed)
    z = rng.standard_normal((count, 2))
    z1 = z[:, 0]
    z2 = rho * z1 + math.sqrt(max(0.0, 1.0 - rho * rho)) * z[:, 1]
    return ndtr(z1), ndtr(z2)


def generate_pvalue_pairs(rho: float, count: int, seed: SeedSpec) -> list[PValuePair]:
    """Marginally uniform p-value pairs whose normal scores have correlation ``rho``."""
    p_a, p_b = pvalue_pair_arrays(rho, count, seed)
    return [PValuePair(float(a), float(b)) for a, b in zip(p_a, p_b)]
