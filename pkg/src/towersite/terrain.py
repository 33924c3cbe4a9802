"""Raster terrain grids: loading, writing, synthesis and interpolation.

Elevations live on disk as little-endian int16 posts, row-major, and are
widened to int32 in memory.  Posts are one horizontal unit apart in both
axes and elevations share that unit.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

NODATA = -32768


class TerrainError(ValueError):
    """Raised for malformed terrain files or invalid terrain requests."""


class GridPoint(NamedTuple):
    row: int
    col: int


@dataclass(frozen=True, eq=False)
class TerrainGrid:
    """Immutable row-major array of elevation posts."""

    nrows: int
    ncols: int
    elevations: np.ndarray = field(repr=False)

    def __post_init__(self):
        z = np.ascontiguousarray(self.elevations, dtype=np.int32)
        if self.nrows < 2 or self.ncols < 2:
            raise TerrainError(f"grid must be at least 2x2, got {self.nrows}x{self.ncols}")
        if z.size != self.nrows * self.ncols:
            raise TerrainError(
                f"{z.size} elevations do not fill a {self.nrows}x{self.ncols} grid")
        z = z.reshape(self.nrows, self.ncols)
        z.setflags(write=False)
        object.__setattr__(self, "elevations", z)

    @classmethod
    def from_array(cls, z) -> "TerrainGrid":
        z = np.asarray(z)
        if z.ndim != 2:
            raise TerrainError("elevation array must be 2-D")
        return cls(z.shape[0], z.shape[1], z)

    @property
    def shape(self) -> tuple[int, int]:
        return self.nrows, self.ncols

    def __getitem__(self, p) -> int:
        return int(self.elevations[p[0], p[1]])

    def __eq__(self, other):
        if not isinstance(other, TerrainGrid):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.elevations, other.elevations)

    def contains(self, p) -> bool:
        return 0 <= p[0] < self.nrows and 0 <= p[1] < self.ncols

    def min_elevation(self) -> int:
        return int(self.elevations.min())

    def max_elevation(self) -> int:
        return int(self.elevations.max())


def _check_nodata(z: np.ndarray, source) -> None:
    if np.any(z == NODATA):
        raise TerrainError(f"{source}: NODATA posts ({NODATA}) are not supported")


def load_binary(path, nrows: int, ncols: int) -> TerrainGrid:
    """Read a headerless little-endian int16 row-major terrain file."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    expected = nrows * ncols * 2
    actual = os.path.getsize(path)
    if actual != expected:
        raise TerrainError(
            f"{path}: size mismatch, {actual} bytes on disk but {nrows}x{ncols} "
            f"int16 posts need {expected}")
    z = np.fromfile(path, dtype="<i2").reshape(nrows, ncols)
    _check_nodata(z, path)
    return TerrainGrid(nrows, ncols, z)


def write_binary(grid: TerrainGrid, path) -> None:
    z = grid.elevations
    if z.min() < -32767 or z.max() > 32767:
        raise TerrainError("elevations do not fit in int16")
    z.astype("<i2").tofile(path)


_HEADER = re.compile(r"^\s*nrows\s+(\d+)\s+ncols\s+(\d+)\s*$")


def load_ascii_grid(path) -> TerrainGrid:
    """Read a text grid: ``nrows N ncols M`` followed by N*M integers."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    tokens: list[tuple[int, str]] = []
    for lineno, line in enumerate(lines, 1):
        tokens.extend((lineno, tok) for tok in line.split())
    if len(tokens) < 4 or [t for _, t in tokens[:4:2]] != ["nrows", "ncols"]:
        raise TerrainError(f"{path}:1: expected header 'nrows N ncols M'")
    try:
        nrows, ncols = int(tokens[1][1]), int(tokens[3][1])
    except ValueError:
        raise TerrainError(f"{path}:{tokens[1][0]}: non-integer grid dimension") from None
    body = tokens[4:]
    if len(body) != nrows * ncols:
        where = body[-1][0] if body else tokens[3][0]
        raise TerrainError(
            f"{path}:{where}: expected {nrows * ncols} elevations, found {len(body)}")
    values = np.empty(len(body), dtype=np.int32)
    for k, (lineno, tok) in enumerate(body):
        try:
            values[k] = int(tok)
        except ValueError:
            raise TerrainError(f"{path}:{lineno}: bad elevation {tok!r}") from None
    _check_nodata(values, path)
    return TerrainGrid(nrows, ncols, values)


def write_ascii_grid(grid: TerrainGrid, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"nrows {grid.nrows} ncols {grid.ncols}\n")
        for row in grid.elevations:
            fh.write(" ".join(map(str, row.tolist())))
            fh.write("\n")


def generate_fractal(nrows: int, ncols: int, roughness: float = 0.5, seed: int = 0,
                     zmin: int = 0, zmax: int = 1000) -> TerrainGrid:
    """Diamond-square terrain cropped to ``nrows x ncols``.

    ``roughness`` scales both the overall relief and how slowly the
    displacement decays between levels; values near 0 give an almost flat
    grid centred in ``[zmin, zmax]``, 1 gives the most rugged surface.
    """
    if zmin > zmax:
        raise TerrainError(f"invalid elevation range [{zmin}, {zmax}]")
    if not 0 < roughness <= 1:
        raise TerrainError("roughness must lie in (0, 1]")
    if nrows < 2 or ncols < 2:
        raise TerrainError("grid must be at least 2x2")

    rng = np.random.default_rng(seed)
    n = 1
    while n + 1 < max(nrows, ncols):
        n *= 2
    h = np.zeros((n + 1, n + 1))
    h[::n, ::n] = rng.uniform(-roughness, roughness, size=(2, 2))
    decay = 2.0 ** -(1.0 - roughness)
    amp = roughness
    step = n
    while step > 1:
        half = step // 2
        amp *= decay
        # diamond: centres of squares
        c = (h[:-step:step, :-step:step] + h[step::step, :-step:step]
             + h[:-step:step, step::step] + h[step::step, step::step]) / 4
        h[half::step, half::step] = c + rng.uniform(-amp, amp, size=c.shape)
        # square: edge midpoints, averaging the in-bounds neighbours
        pad = np.pad(h, half, mode="constant", constant_values=np.nan)
        end = n + 1
        for r0, c0 in ((0, half), (half, 0)):
            rows = slice(r0 + half, end + half, step)
            cols = slice(c0 + half, end + half, step)
            nb = np.stack([
                pad[r0:end:step, cols],
                pad[r0 + step:end + step:step, cols],
                pad[rows, c0:end:step],
                pad[rows, c0 + step:end + step:step],
            ])
            avg = np.nanmean(nb, axis=0)
            h[r0::step, c0::step] = avg + rng.uniform(-amp, amp, size=avg.shape)
        step = half

    h = h[:nrows, :ncols]
    h = h / max(1.0, float(np.abs(h).max()))
    mid = (zmin + zmax) / 2
    z = np.rint(mid + h * (zmax - zmin) / 2)
    z = np.clip(z, zmin, zmax).astype(np.int32)
    return TerrainGrid(nrows, ncols, z)


def elevation_between(grid: TerrainGrid, p, q, frac: float) -> float:
    """Linear interpolation between two adjacent posts, ``frac`` of the way from p."""
    dr, dc = abs(p[0] - q[0]), abs(p[1] - q[1])
    if dr + dc > 1:
        raise TerrainError(f"posts {tuple(p)} and {tuple(q)} are not adjacent")
    if not (grid.contains(p) and grid.contains(q)):
        raise TerrainError("post lies off the grid")
    return grid[p] * (1.0 - frac) + grid[q] * frac
