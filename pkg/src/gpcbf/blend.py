"""C^1 time-blending between successive model snapshots.

Each model update replaces the prediction functions discontinuously; the
control law, however, needs estimates that vary continuously in time.  The
ramp ``xi`` rises from 0 to 1 inside the first ``1/blend_rate`` fraction of a
sample period with zero slope at both seams, and the blended mean/bound are
the corresponding convex combinations of the previous and current snapshots'
outputs.  A convex combination of two valid error bounds is again a valid
bound, so safety reasoning survives the blend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import gp_stream
from .errors import UsageError
from .gp_stream import ModelSnapshot

_TIME_SLACK = 1e-9


def xi(t: float, eta: float) -> float:
    """Ramp: 0 for t < 0, eta*t - sin(2 pi eta t)/(2 pi) on [0, 1/eta], 1 after.

    Nondecreasing and continuously differentiable, including at the seams;
    round-off near the seams is clamped so the value stays inside [0, 1].
    """
    if t <= 0.0:
        return 0.0
    if t >= 1.0 / eta:
        return 1.0
    val = eta * t - math.sin(2.0 * math.pi * eta * t) / (2.0 * math.pi)
    return min(1.0, max(0.0, val))


@dataclass(frozen=True)
class BlendSchedule:
    eta: float
    sample_period: float

    def __post_init__(self):
        if self.eta < 1.0:
            raise UsageError(f"blend rate must be >= 1 so blending completes "
                             f"within one sample period, got {self.eta}")
        if self.sample_period <= 0.0:
            raise UsageError("sample period must be positive")


@dataclass(frozen=True)
class BlendedModel:
    """Two frozen snapshots and the activation time of the current one."""

    previous: ModelSnapshot
    current: ModelSnapshot
    t_k: float
    schedule: BlendSchedule

    @classmethod
    def initial(cls, snap: ModelSnapshot, t0: float, schedule: BlendSchedule):
        # step-0 convention: previous and current coincide
        return cls(previous=snap, current=snap, t_k=t0, schedule=schedule)

    def swap(self, snap: ModelSnapshot, t_new: float) -> "BlendedModel":
        return BlendedModel(previous=self.current, current=snap,
                            t_k=t_new, schedule=self.schedule)

    def _weight(self, t: float) -> float:
        rel = (t - self.t_k) / self.schedule.sample_period
        if rel < -_TIME_SLACK or rel >= 1.0 + _TIME_SLACK:
            raise UsageError(
                f"time {t} outside blend window [{self.t_k}, "
                f"{self.t_k + self.schedule.sample_period})")
        return xi(rel, self.schedule.eta)

    def estimate(self, t: float, x):
        """Blended (mean, phi) at time t and state x; skips whichever
        snapshot has zero weight."""
        lam = self._weight(t)
        if lam >= 1.0 or self.previous is self.current:
            est = gp_stream.predict(self.current, x)
            return est.mean, est.phi
        if lam <= 0.0:
            est = gp_stream.predict(self.previous, x)
            return est.mean, est.phi
        cur = gp_stream.predict(self.current, x)
        prev = gp_stream.predict(self.previous, x)
        mean = lam * cur.mean + (1.0 - lam) * prev.mean
        phi = lam * cur.phi + (1.0 - lam) * prev.phi
        return mean, phi

    def mean(self, t: float, x) -> np.ndarray:
        return self.estimate(t, x)[0]

    def phi(self, t: float, x) -> np.ndarray:
        return self.estimate(t, x)[1]
