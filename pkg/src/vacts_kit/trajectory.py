"""Rest-to-rest quintic segments."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuinticSegment:
    start: float
    end: float
    duration: float
    coefficients: tuple  # ascending powers of t

    def evaluate(self, t: float) -> tuple[float, float, float]:
        return evaluate(self, t)

    @property
    def peak_rate(self) -> float:
        return 15.0 * abs(self.end - self.start) / (8.0 * self.duration)


def quintic(s0: float, s1: float, T: float) -> QuinticSegment:
    """s(t) = s0 + (s1 - s0)(10 tau^3 - 15 tau^4 + 6 tau^5), tau = t/T."""
    if not T > 0:
        raise ValueError(f"duration must be positive, got {T}")
    d = s1 - s0
    coeffs = (s0, 0.0, 0.0, 10.0 * d / T ** 3, -15.0 * d / T ** 4, 6.0 * d / T ** 5)
    return QuinticSegment(float(s0), float(s1), float(T), coeffs)


def evaluate(seg: QuinticSegment, t: float) -> tuple[float, float, float]:
    """(s, s_dot, s_ddot) at time t, clamped to [0, T]."""
    t = min(max(t, 0.0), seg.duration)
    c = seg.coefficients
    s = c[0] + t * t * t * (c[3] + t * (c[4] + t * c[5]))
    sd = t * t * (3 * c[3] + t * (4 * c[4] + 5 * t * c[5]))
    sdd = t * (6 * c[3] + t * (12 * c[4] + 20 * t * c[5]))
    if t == seg.duration:
        # boundary conditions hold exactly at the end point
        return seg.end, 0.0, 0.0
    return float(s), float(sd), float(sdd)


def evaluate_vector(segs, t: float) -> np.ndarray:
    """Stack (s, s_dot, s_ddot) rows for several segments."""
    return np.array([evaluate(s, t) for s in segs])
