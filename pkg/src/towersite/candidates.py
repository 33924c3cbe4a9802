"""Per-block selection of candidate transmitters."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _backend
from .terrain import GridPoint


class Candidate(NamedTuple):
    base: GridPoint
    score: int


@dataclass(frozen=True)
class BlockPartition:
    nrows: int
    ncols: int
    block_width: int
    blocks_x: int
    blocks_y: int

    @property
    def nblocks(self) -> int:
        return self.blocks_x * self.blocks_y

    def block_sizes(self) -> np.ndarray:
        """Post count of every block, row-major over blocks."""
        bw = self.block_width
        hs = np.minimum(bw, self.nrows - bw * np.arange(self.blocks_y))
        ws = np.minimum(bw, self.ncols - bw * np.arange(self.blocks_x))
        return np.outer(hs, ws).ravel()


def partition(nrows: int, ncols: int, roi: int) -> BlockPartition:
    """Square blocks ``ceil(roi/3)`` posts wide; edge blocks may be smaller."""
    if roi < 3:
        raise ValueError("roi must be >= 3 to partition into blocks")
    bw = math.ceil(roi / 3)
    return BlockPartition(nrows, ncols, bw, -(-ncols // bw), -(-nrows // bw))


def candidate_count(part: BlockPartition, per_block: int) -> int:
    """How many candidates :func:`find_candidates` yields for this partition."""
    return int(np.minimum(part.block_sizes(), per_block).sum())


@dataclass(eq=False)
class CandidateSet:
    """Candidates as parallel arrays, in block order then descending score."""

    rows: np.ndarray
    cols: np.ndarray
    scores: np.ndarray

    def __len__(self):
        return len(self.rows)

    def __getitem__(self, i) -> Candidate:
        return Candidate(GridPoint(int(self.rows[i]), int(self.cols[i])), int(self.scores[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("row,col,score\n")
            for r, c, s in zip(self.rows.tolist(), self.cols.tolist(), self.scores.tolist()):
                fh.write(f"{r},{c},{s}\n")


def find_candidates(vix, part: BlockPartition, per_block: int, threads: int = 0) -> CandidateSet:
    """The ``per_block`` best posts of every block.

    Within a block ties on score go to the lower ``(row, col)``.
    """
    if per_block < 1:
        raise ValueError("per_block must be >= 1")
    if (vix.nrows, vix.ncols) != (part.nrows, part.ncols):
        raise ValueError("partition does not match the visibility map")
    rows, cols, scores = _backend.get().top_per_block(
        np.ascontiguousarray(vix.scores, dtype=np.uint8), part.block_width, per_block,
        _backend.resolve_threads(threads))
    return CandidateSet(rows, cols, scores)
