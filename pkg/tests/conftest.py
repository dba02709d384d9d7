import numpy as np
import pytest

from twostep import TrialDataset


def brute_force_ks(a, b):
    """Max |F_a - F_b| evaluated at every pooled point, straight from the ECDF definition."""
    a = list(a)
    b = list(b)
    if not a or not b:
        return 0.0
    best = 0.0
    for y in a + b:
        fa = sum(v <= y for v in a) / len(a)
        fb = sum(v <= y for v in b) / len(b)
        best = max(best, abs(fa - fb))
    return best


def brute_force_prefix_ks(y, t, x_order):
    """Prefix-KS average for subjects already listed in biomarker order."""
    y = [y[i] for i in x_order]
    t = [t[i] for i in x_order]
    n = len(y)
    ds = []
    for k in range(1, n):
        a = [y[j] for j in range(k) if t[j] == 1]
        b = [y[j] for j in range(k) if t[j] == 0]
        ds.append(brute_force_ks(a, b))
    return sum(ds) / (n - 1)


@pytest.fixture
def null_dataset():
    rng = np.random.default_rng(20240601)
    n = 90
    x = np.where(rng.random(n) < 0.4, 0.0, rng.random(n) + 1e-9)
    t = rng.permutation(np.repeat([1, 0], n // 2))
    return TrialDataset(y=rng.standard_normal(n), t=t, x=x)
