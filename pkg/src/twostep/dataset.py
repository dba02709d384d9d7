from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True, eq=False)
class TrialDataset:
    """Per-subject outcome ``y``, arm ``t`` (1 = treatment) and biomarker ``x >= 0``."""

    y: np.ndarray
    t: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        x = np.asarray(self.x, dtype=float).ravel()
        t_raw = np.asarray(self.t).ravel()
        if not (y.size == x.size == t_raw.size):
            raise InvalidInputError(f"length mismatch: y={y.size}, t={t_raw.size}, x={x.size}")
        if y.size < 1:
            raise InvalidInputError("dataset is empty")
        if not np.all(np.isfinite(y)):
            raise InvalidInputError("outcomes must be finite")
        if not np.all(np.isfinite(x)) or np.any(x < 0):
            raise InvalidInputError("biomarker values must be finite and >= 0")
        if not np.all((t_raw == 0) | (t_raw == 1)):
            raise InvalidInputError("arm indicators must be 0 or 1")
        for name, arr in (("y", y), ("t", t_raw.astype(np.int64)), ("x", x)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return int(self.y.size)

    @property
    def zero_mask(self) -> np.ndarray:
        return self.x == 0

    @property
    def n_zero(self) -> int:
        return int(np.count_nonzero(self.x == 0))

    @property
    def n_positive(self) -> int:
        return int(np.count_nonzero(self.x > 0))

    def with_outcomes(self, y) -> TrialDataset:
        return TrialDataset(y=np.asarray(y, dtype=float), t=self.t, x=self.x)

    def take(self, index) -> TrialDataset:
        return TrialDataset(y=self.y[index], t=self.t[index], x=self.x[index])
