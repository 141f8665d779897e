"""Uniform lattice {m*theta : m integer} with snap-tolerant index arithmetic.

All solver state lives on integer indices; real coordinates are recomputed
from the index on demand (never accumulated), so repeated +theta steps cannot
drift.  A point within ``snap`` of a lattice coordinate is treated as lying on
it, which keeps floor/ceil stable when a coordinate arrives through a lossy
round trip (file I/O, root finding, subtraction of near-equal reals).
"""

from dataclasses import dataclass
import math

import numpy as np

# relative half-width of the on-lattice tolerance band
SNAP_REL = 1e-9


@dataclass(frozen=True)
class Grid:
    """Spacing theta > 0; index m refers to the coordinate m*theta."""

    theta: float

    def __post_init__(self):
        if not (isinstance(self.theta, (int, float)) and math.isfinite(self.theta)):
            raise ValueError("grid spacing must be a finite number")
        if self.theta <= 0:
            raise ValueError(f"grid spacing must be positive, got {self.theta}")

    @property
    def snap(self):
        return self.theta * SNAP_REL

    def coord(self, m):
        """Real coordinate of index m (scalar or array)."""
        return m * self.theta if np.isscalar(m) else np.asarray(m) * self.theta

    def coords(self, lo, hi):
        """Coordinates of the inclusive index range [lo, hi]."""
        return np.arange(lo, hi + 1) * self.theta

    def floor_index(self, x):
        """Largest m with m*theta <= x, snapping x onto a nearby lattice point."""
        return math.floor((x + self.snap) / self.theta)

    def ceil_index(self, x):
        """Smallest m with m*theta >= x, snapping x onto a nearby lattice point."""
        return -math.floor((-x + self.snap) / self.theta)

    def floor_indices(self, x):
        """Vectorized floor_index."""
        return np.floor((np.asarray(x) + self.snap) / self.theta).astype(np.int64)

    def is_on_grid(self, x):
        m = round(x / self.theta)
        return abs(x - m * self.theta) <= self.snap

    def refine(self, factor=2):
        """A grid with spacing theta/factor (every old point stays on it)."""
        return Grid(self.theta / factor)
