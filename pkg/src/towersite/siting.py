"""Greedy max-coverage siting over packed viewshed bitmaps.

Each round commits the viewshed that adds the most uncovered posts to the
cumulative bitmap.  Gains only shrink as coverage grows, so a gain computed
in an earlier round is an upper bound on the current one; the heap therefore
holds stale gains and only the head is re-evaluated until a fresh gain sits
on top (lazy greedy).  Equal gains go to the lowest candidate index, which
makes the result identical to re-evaluating every candidate each round.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import _backend
from .viewshed import Viewshed, ViewshedSet

log = logging.getLogger(__name__)

TARGET_REACHED = "target-reached"
CANDIDATES_EXHAUSTED = "candidates-exhausted"
ZERO_GAIN = "zero-gain"
MAX_SELECTED = "max-selected"


@dataclass(frozen=True)
class SiteParams:
    roi: int
    tx_height: float = 10.0
    rx_height: float = 10.0
    target_coverage: float = 0.95
    samples_per_point: int = 10
    per_block: int = 20
    max_selected: Optional[int] = None

    def __post_init__(self):
        if self.roi < 1:
            raise ValueError("roi must be >= 1")
        if not 0 < self.target_coverage <= 1:
            raise ValueError("target_coverage must lie in (0, 1]")
        if self.tx_height < 0 or self.rx_height < 0:
            raise ValueError("heights must be >= 0")
        if self.samples_per_point < 1 or self.per_block < 1:
            raise ValueError("samples_per_point and per_block must be >= 1")
        if self.max_selected is not None and self.max_selected < 1:
            raise ValueError("max_selected must be >= 1")


class CumulativeShed:
    """Coverage bitmap of the whole terrain, row-major, 64 posts per word."""

    def __init__(self, nrows: int, ncols: int, words: Optional[np.ndarray] = None):
        self.nrows = nrows
        self.ncols = ncols
        nw = (nrows * ncols + 63) // 64
        if words is None:
            words = np.zeros(nw, dtype=np.uint64)
        elif len(words) != nw:
            raise ValueError(f"expected {nw} words, got {len(words)}")
        self.words = words
        self.covered = int(_backend.get().popcount(words)) if words.any() else 0

    def _check_window(self, row0, col0, height, width):
        if row0 < 0 or col0 < 0 or row0 + height > self.nrows or col0 + width > self.ncols:
            raise ValueError(
                f"viewshed window ({row0}, {col0}, {height}x{width}) exceeds "
                f"the {self.nrows}x{self.ncols} terrain")

    def gain(self, shed_words, row0, col0, height, width) -> int:
        return int(_backend.get().marginal_gain(
            shed_words, height, width, self.words, row0, col0, self.ncols))

    def add(self, shed_words, row0, col0, height, width) -> int:
        self._check_window(row0, col0, height, width)
        g = int(_backend.get().union_into(
            shed_words, height, width, self.words, row0, col0, self.ncols))
        self.covered += g
        return g

    def add_viewshed(self, v: Viewshed) -> int:
        return self.add(v.words, *v.window)

    def coverage(self) -> float:
        return self.covered / (self.nrows * self.ncols)

    def to_mask(self) -> np.ndarray:
        n = self.nrows * self.ncols
        bits = np.unpackbits(self.words.astype("<u8").view(np.uint8), bitorder="little")
        return bits[:n].reshape(self.nrows, self.ncols).astype(bool)

    @classmethod
    def from_mask(cls, mask) -> "CumulativeShed":
        from .viewshed import pack_bits

        mask = np.asarray(mask, dtype=bool)
        return cls(mask.shape[0], mask.shape[1], pack_bits(mask.ravel()))


def marginal_gain(shed: Viewshed, cum: CumulativeShed) -> int:
    """Posts lit in ``shed`` but not yet covered by ``cum``."""
    cum._check_window(*shed.window)
    return cum.gain(shed.words, *shed.window)


def coverage(cum: CumulativeShed) -> float:
    return cum.coverage()


class Selection(NamedTuple):
    index: int
    row: int
    col: int
    marginal_gain: int
    cumulative_coverage: float


@dataclass
class SitingResult:
    selected: list[Selection] = field(default_factory=list)
    final_coverage: float = 0.0
    covered: int = 0
    stop_reason: str = CANDIDATES_EXHAUSTED
    evaluations: int = 0

    @property
    def gains(self) -> list[int]:
        return [s.marginal_gain for s in self.selected]

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("rank,row,col,marginal_gain,cumulative_coverage\n")
            for rank, s in enumerate(self.selected, 1):
                fh.write(f"{rank},{s.row},{s.col},{s.marginal_gain},{s.cumulative_coverage:.6f}\n")


def _as_set(viewsheds) -> ViewshedSet:
    if isinstance(viewsheds, ViewshedSet):
        return viewsheds
    return ViewshedSet.from_list(list(viewsheds))


def site(viewsheds, nrows: int, ncols: int, params: SiteParams,
         cum: Optional[CumulativeShed] = None) -> SitingResult:
    """Lazy greedy selection until the target coverage is met or gains run out."""
    vs = _as_set(viewsheds)
    n = len(vs)
    cum = cum if cum is not None else CumulativeShed(nrows, ncols)
    if n:
        bad = np.flatnonzero((vs.row0 < 0) | (vs.col0 < 0)
                             | (vs.row0 + vs.height > nrows) | (vs.col0 + vs.width > ncols))
        if len(bad):
            i = int(bad[0])
            cum._check_window(int(vs.row0[i]), int(vs.col0[i]), int(vs.height[i]), int(vs.width[i]))

    be = _backend.get()
    words, offsets = vs.words, vs.offsets
    row0, col0 = vs.row0.tolist(), vs.col0.tolist()
    hh, ww = vs.height.tolist(), vs.width.tolist()
    total = nrows * ncols
    result = SitingResult()

    def gain(i):
        return int(be.marginal_gain(words[offsets[i]:offsets[i + 1]], hh[i], ww[i],
                                    cum.words, row0[i], col0[i], ncols))

    # (-gain, index, round the gain was computed in)
    heap = [(-gain(i), i, 0) for i in range(n)]
    result.evaluations = n
    heapq.heapify(heap)
    rnd = 0
    while True:
        if not heap:
            result.stop_reason = CANDIDATES_EXHAUSTED
            break
        neg, i, stamp = heap[0]
        if stamp != rnd:
            g = gain(i)
            result.evaluations += 1
            heapq.heapreplace(heap, (-g, i, rnd))
            continue
        if neg == 0:
            result.stop_reason = ZERO_GAIN
            break
        heapq.heappop(heap)
        g = cum.add(words[offsets[i]:offsets[i + 1]], row0[i], col0[i], hh[i], ww[i])
        assert g == -neg
        rnd += 1
        result.selected.append(Selection(i, int(vs.origin_row[i]), int(vs.origin_col[i]), g,
                                         cum.covered / total))
        if cum.covered / total >= params.target_coverage:
            result.stop_reason = TARGET_REACHED
            break
        if params.max_selected is not None and len(result.selected) >= params.max_selected:
            result.stop_reason = MAX_SELECTED
            break
    result.final_coverage = cum.covered / total
    result.covered = cum.covered
    log.debug("sited %d of %d candidates, %d gain evaluations, stop: %s",
              len(result.selected), n, result.evaluations, result.stop_reason)
    return result
