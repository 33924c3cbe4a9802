"""Line-of-sight tests over the linearly interpolated terrain.

The LOS from a transmitter eye to a receiver point is checked at every
place its 2-D projection crosses a grid line.  There the terrain height is
the linear interpolation between the two posts on that line.  The receiver
is visible unless the terrain rises strictly above the LOS at some crossing
strictly between the endpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from . import _backend
from .terrain import GridPoint, TerrainError, TerrainGrid


@dataclass(frozen=True)
class ObserverSpec:
    """An eye ``height`` units above the post ``base``."""

    base: GridPoint
    height: float = 0.0

    def __post_init__(self):
        if self.height < 0:
            raise ValueError("observer height must be >= 0")
        object.__setattr__(self, "base", GridPoint(*self.base))


class ProfileEntry(NamedTuple):
    distance: float
    terrain_z: float
    los_z: float


def _check(grid: TerrainGrid, *obs: ObserverSpec) -> None:
    for o in obs:
        if not grid.contains(o.base):
            raise TerrainError(f"observer base {tuple(o.base)} lies off the grid")


def is_visible(grid: TerrainGrid, tx: ObserverSpec, rx: ObserverSpec) -> bool:
    _check(grid, tx, rx)
    return _backend.get().los_visible(grid.elevations, tx.base.row, tx.base.col, float(tx.height),
                                      rx.base.row, rx.base.col, float(rx.height))


def los_profile(grid: TerrainGrid, tx: ObserverSpec, rx: ObserverSpec) -> list[ProfileEntry]:
    """Terrain and LOS heights at each interior grid-line crossing, nearest first."""
    _check(grid, tx, rx)
    z = grid.elevations
    (r0, c0), (r1, c1) = tx.base, rx.base
    zt = float(z[r0, c0]) + tx.height
    zr = float(z[r1, c1]) + rx.height
    dy, dx = r1 - r0, c1 - c0
    ay, ax = abs(dy), abs(dx)
    sy = 1 if dy >= 0 else -1
    sx = 1 if dx >= 0 else -1
    length = math.hypot(dy, dx)

    # (t numerator, t denominator, scaled terrain, scaled los)
    hits = []
    for i in range(1, ax):
        q, m = divmod(i * ay, ax)
        ra, ca = r0 + sy * q, c0 + sx * i
        t = float(z[ra, ca]) * (ax - m) + (float(z[ra + sy, ca]) * m if m else 0.0)
        hits.append((i, ax, t, zt * (ax - i) + zr * i))
    for j in range(1, ay):
        q, m = divmod(j * ax, ay)
        if m == 0 and ax:
            continue
        ra, ca = r0 + sy * j, c0 + sx * q
        t = float(z[ra, ca]) * (ay - m) + (float(z[ra, ca + sx]) * m if m else 0.0)
        hits.append((j, ay, t, zt * (ay - j) + zr * j))
    hits.sort(key=lambda h: h[0] / h[1])
    return [ProfileEntry(n / d * length, t / d, l / d) for n, d, t, l in hits]
