"""Sampled visibility index of every post."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend, _pure
from .terrain import TerrainGrid


@dataclass(eq=False)
class VixMap:
    """Visible-sample counts per post; the index is ``score / samples_per_point``."""

    nrows: int
    ncols: int
    scores: np.ndarray
    samples_per_point: int

    def index(self) -> np.ndarray:
        return self.scores / self.samples_per_point

    def __eq__(self, other):
        if not isinstance(other, VixMap):
            return NotImplemented
        return (self.samples_per_point == other.samples_per_point
                and np.array_equal(self.scores, other.scores))

    def write(self, path) -> None:
        """Raw dump: one byte per post, row-major."""
        np.ascontiguousarray(self.scores, dtype=np.uint8).tofile(path)


def sample_receivers(grid: TerrainGrid, row: int, col: int, roi: int, samples: int, seed: int):
    """Receiver bases drawn for the post ``(row, col)``, exactly as :func:`estimate_vix` draws them."""
    offs = _pure.sample_offsets(seed, row, col, roi, grid.nrows, grid.ncols, samples)
    return [(row + dr, col + dc) for dr, dc in offs]


def estimate_vix(grid: TerrainGrid, params, seed: int = 0, threads: int = 0) -> VixMap:
    """Count how many of ``samples_per_point`` random receivers each post sees.

    Receivers are grid posts drawn uniformly from the in-grid part of the
    disk of radius ``roi`` around the post (the post itself included), each
    post with its own random stream keyed on ``(seed, row, col)``.
    """
    if params.roi < 1:
        raise ValueError("roi must be >= 1")
    samples = params.samples_per_point
    if not 1 <= samples <= 255:
        raise ValueError("samples_per_point must lie in [1, 255]")
    scores = _backend.get().vix_scores(
        grid.elevations, int(params.roi), float(params.tx_height), float(params.rx_height),
        int(samples), int(seed), _backend.resolve_threads(threads))
    return VixMap(grid.nrows, grid.ncols, scores, samples)
