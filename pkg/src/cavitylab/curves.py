"""Container for uncertainty-versus-time curves."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


def check_time_grid(t_grid):
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise DomainError("t_grid must be a non-empty 1-D array")
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise DomainError("t_grid must be finite and non-negative")
    if np.any(np.diff(t) <= 0):
        raise DomainError("t_grid must be strictly increasing")
    return t


@dataclass
class SensitivityCurve:
    """Variance of the absorption estimate, d(alpha_S)^2 in 1/m^2, versus time.

    The curve always has the two-term form
    ``(1/R^2) * (v0 / (1 + gamma*t) + floor)`` and ``components`` keeps the
    fluctuation and technical parts separately.
    """

    t_grid: np.ndarray
    dalpha2: np.ndarray
    components: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def floor(self) -> float:
        """Long-time limit set by the technical term."""
        return float(self.components["technical"][0])

    def at(self, t):
        return np.interp(t, self.t_grid, self.dalpha2)
