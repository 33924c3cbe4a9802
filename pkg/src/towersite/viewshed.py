"""Radial-sweep viewsheds packed into 64-bit words.

Rays fan out from the transmitter, one toward each of the ``8*roi``
boundary cells of the ROI bounding square, and are walked outward until
they leave the ROI disk.  Along a ray the terrain is sampled at every
grid-line crossing (linear interpolation between the two posts on that
line) and a running horizon slope is kept.  The post nearest a crossing is
lit when its receiver point rises to or above the horizon.  A disk post is
judged only by the ray passing closest to it, so the axis and diagonal rays
give exact verdicts for the posts they pass through.

The ray geometry does not depend on the terrain, so it is built once per
ROI as a :class:`RayTemplate` and shared by every transmitter.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _backend
from .terrain import TerrainError, TerrainGrid


@dataclass(frozen=True)
class RayTemplate:
    """Structure-of-arrays walk plan for every ray of a given ROI.

    Steps of ray ``k`` are ``ray_ptr[k]:ray_ptr[k+1]``.  A step samples the
    terrain between posts ``a`` and ``b`` (offsets from the transmitter) at
    ``weight`` of the way to ``b``, tests its receivers
    ``recv_ptr[s]:recv_ptr[s+1]`` against the horizon, then folds the sample
    into the horizon when ``update`` is set.  ``b == a`` when the weight is 0.
    """

    roi: int
    ray_ptr: np.ndarray
    a_dr: np.ndarray
    a_dc: np.ndarray
    b_dr: np.ndarray
    b_dc: np.ndarray
    weight: np.ndarray
    inv_d: np.ndarray
    update: np.ndarray
    recv_ptr: np.ndarray
    recv_dr: np.ndarray
    recv_dc: np.ndarray
    recv_inv: np.ndarray

    @property
    def nrays(self) -> int:
        return len(self.ray_ptr) - 1

    @property
    def nsteps(self) -> int:
        return len(self.weight)

    @property
    def reach(self) -> int:
        """Largest row or column offset any step touches."""
        return int(max(np.abs(self.a_dr).max(), np.abs(self.a_dc).max(),
                       np.abs(self.b_dr).max(), np.abs(self.b_dc).max(), 0))


def ray_targets(roi: int) -> list[tuple[int, int]]:
    """Boundary cells of the square ``[-roi, roi]^2``, counter-clockwise from east."""
    out = []
    for dc in range(-roi + 1, roi + 1):
        out.append((roi, dc))
    for dr in range(roi - 1, -roi - 1, -1):
        out.append((dr, roi))
    for dc in range(roi - 1, -roi - 1, -1):
        out.append((-roi, dc))
    for dr in range(-roi + 1, roi + 1):
        out.append((dr, -roi))
    return list(dict.fromkeys(out))


def _ray_crossings(ty: int, tx: int):
    """Grid-line crossings of the segment (0,0)->(ty,tx), ordered outward.

    Yields ``(a, b, weight, cy, cx)``: bracketing posts, fraction toward b,
    and the crossing point itself.
    """
    ay, ax = abs(ty), abs(tx)
    sy = 1 if ty >= 0 else -1
    sx = 1 if tx >= 0 else -1
    out = []
    for i in range(1, ax):
        q, m = divmod(i * ay, ax)
        out.append((i * ay, ax, (sy * q, sx * i), (sy * (q + 1), sx * i), m / ax,
                    sy * i * ay / ax, float(sx * i)))
    for j in range(1, ay):
        q, m = divmod(j * ax, ay)
        if m == 0 and ax:
            continue
        out.append((j * ay, ay, (sy * j, sx * q), (sy * j, sx * (q + 1)), m / ay,
                    float(sy * j), sx * j * ax / ay))
    # parameter t = i/ax or j/ay; compare exactly by cross-multiplying
    out.sort(key=functools.cmp_to_key(
        lambda u, v: (u[0] * v[1] > v[0] * u[1]) - (u[0] * v[1] < v[0] * u[1])))
    return [e[2:] for e in out]


@functools.lru_cache(maxsize=8)
def ray_template(roi: int) -> RayTemplate:
    if roi < 1:
        raise ValueError("roi must be >= 1")
    r2 = roi * roi
    targets = ray_targets(roi)
    owner: dict[tuple[int, int], tuple[float, int]] = {}
    raw = []
    for k, (ty, tx) in enumerate(targets):
        length = math.hypot(ty, tx)
        steps = []
        for a, b, w, cy, cx in _ray_crossings(ty, tx):
            if math.hypot(cy, cx) > roi + 1:
                break
            recv = []
            if w <= 0.5:
                recv.append(a)
            if w >= 0.5:
                recv.append(b)
            recv = [p for p in recv if p[0] * p[0] + p[1] * p[1] <= r2]
            for p in recv:
                off = abs(p[0] * tx - p[1] * ty) / length
                if p not in owner or (off, k) < owner[p]:
                    owner[p] = (off, k)
            steps.append([a, b if w > 0.0 else a, w, 1.0 / math.hypot(cy, cx), True, recv])
        if ty * ty + tx * tx <= r2:
            p = (ty, tx)
            owner[p] = min(owner.get(p, (0.0, k)), (0.0, k))
            steps.append([p, p, 0.0, 0.0, False, [p]])
        raw.append(steps)

    ray_ptr, recv_ptr = [0], [0]
    cols: dict[str, list] = {n: [] for n in (
        "a_dr", "a_dc", "b_dr", "b_dc", "weight", "inv_d", "update",
        "recv_dr", "recv_dc", "recv_inv")}
    for k, steps in enumerate(raw):
        seen = set()
        for st in steps:
            # a post near two successive crossings is judged at the first one
            st[5] = [p for p in st[5] if owner[p][1] == k and p not in seen]
            seen.update(st[5])
        last = max((i for i, st in enumerate(steps) if st[5]), default=-1)
        for a, b, w, inv, upd, recv in steps[:last + 1]:
            cols["a_dr"].append(a[0])
            cols["a_dc"].append(a[1])
            cols["b_dr"].append(b[0])
            cols["b_dc"].append(b[1])
            cols["weight"].append(w)
            cols["inv_d"].append(inv)
            cols["update"].append(upd)
            for p in recv:
                cols["recv_dr"].append(p[0])
                cols["recv_dc"].append(p[1])
                cols["recv_inv"].append(1.0 / math.hypot(*p))
            recv_ptr.append(len(cols["recv_dr"]))
        if last >= 0:
            ray_ptr.append(len(cols["weight"]))

    def arr(name, dtype):
        a = np.ascontiguousarray(cols[name], dtype=dtype)
        a.setflags(write=False)
        return a

    def ptr(v):
        a = np.asarray(v, dtype=np.int64)
        a.setflags(write=False)
        return a

    return RayTemplate(
        roi=roi, ray_ptr=ptr(ray_ptr),
        a_dr=arr("a_dr", np.int32), a_dc=arr("a_dc", np.int32),
        b_dr=arr("b_dr", np.int32), b_dc=arr("b_dc", np.int32),
        weight=arr("weight", np.float64), inv_d=arr("inv_d", np.float64),
        update=arr("update", np.uint8), recv_ptr=ptr(recv_ptr),
        recv_dr=arr("recv_dr", np.int32), recv_dc=arr("recv_dc", np.int32),
        recv_inv=arr("recv_inv", np.float64),
    )


def window(nrows: int, ncols: int, row: int, col: int, roi: int) -> tuple[int, int, int, int]:
    """Clipped bounding square of the ROI disk: ``(row0, col0, height, width)``."""
    r0, c0 = max(0, row - roi), max(0, col - roi)
    r1, c1 = min(nrows - 1, row + roi), min(ncols - 1, col + roi)
    return r0, c0, r1 - r0 + 1, c1 - c0 + 1


@dataclass(eq=False)
class Viewshed:
    """Visibility bitmap of one transmitter over its clipped ROI window.

    Bit ``k`` of the packed words is window cell ``(k // width, k % width)``.
    """

    origin: tuple[int, int]
    roi: int
    row0: int
    col0: int
    height: int
    width: int
    words: np.ndarray

    @property
    def side(self) -> int:
        return 2 * self.roi + 1

    def __eq__(self, other):
        if not isinstance(other, Viewshed):
            return NotImplemented
        return (self.origin == other.origin and self.window == other.window
                and np.array_equal(self.words, other.words))

    @property
    def window(self) -> tuple[int, int, int, int]:
        return self.row0, self.col0, self.height, self.width

    def to_mask(self) -> np.ndarray:
        """Window-shaped boolean array."""
        n = self.height * self.width
        bits = np.unpackbits(self.words.astype("<u8").view(np.uint8), bitorder="little")
        return bits[:n].reshape(self.height, self.width).astype(bool)

    def to_grid(self, nrows: int, ncols: int) -> np.ndarray:
        out = np.zeros((nrows, ncols), dtype=bool)
        out[self.row0:self.row0 + self.height, self.col0:self.col0 + self.width] = self.to_mask()
        return out

    @classmethod
    def from_mask(cls, origin, roi, row0, col0, mask) -> "Viewshed":
        mask = np.asarray(mask, dtype=bool)
        h, w = mask.shape
        return cls(tuple(origin), roi, row0, col0, h, w, pack_bits(mask.ravel()))


def pack_bits(flat_bits: np.ndarray) -> np.ndarray:
    """Pack a boolean vector into little-endian-bit uint64 words (zero padded)."""
    n = len(flat_bits)
    nw = (n + 63) // 64
    buf = np.zeros(nw * 64, dtype=np.uint8)
    buf[:n] = flat_bits
    return np.packbits(buf, bitorder="little").view("<u8").astype(np.uint64)


def popcount(v) -> int:
    """Number of lit cells; accepts a :class:`Viewshed` or a word array."""
    words = v.words if isinstance(v, Viewshed) else v
    return int(_backend.get().popcount(np.ascontiguousarray(words, dtype=np.uint64)))


class ViewshedSet(Sequence):
    """Many viewsheds stored as parallel arrays plus one flat word buffer."""

    def __init__(self, roi, origin_row, origin_col, row0, col0, height, width, offsets, words):
        self.roi = roi
        self.origin_row = origin_row
        self.origin_col = origin_col
        self.row0 = row0
        self.col0 = col0
        self.height = height
        self.width = width
        self.offsets = offsets
        self.words = words

    @classmethod
    def allocate(cls, nrows, ncols, rows, cols, roi) -> "ViewshedSet":
        rows = np.asarray(rows, dtype=np.int32)
        cols = np.asarray(cols, dtype=np.int32)
        r0 = np.maximum(rows - roi, 0).astype(np.int32)
        c0 = np.maximum(cols - roi, 0).astype(np.int32)
        h = (np.minimum(rows + roi, nrows - 1) - r0 + 1).astype(np.int32)
        w = (np.minimum(cols + roi, ncols - 1) - c0 + 1).astype(np.int32)
        nw = (h.astype(np.int64) * w + 63) // 64
        offsets = np.zeros(len(rows) + 1, dtype=np.int64)
        np.cumsum(nw, out=offsets[1:])
        words = np.zeros(int(offsets[-1]), dtype=np.uint64)
        return cls(roi, rows, cols, r0, c0, h, w, offsets, words)

    @classmethod
    def from_list(cls, sheds: Sequence[Viewshed]) -> "ViewshedSet":
        n = len(sheds)
        offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum([len(v.words) for v in sheds], out=offsets[1:])
        words = (np.concatenate([v.words for v in sheds]).astype(np.uint64)
                 if n else np.zeros(0, np.uint64))

        def col(f, dtype=np.int32):
            return np.array([f(v) for v in sheds], dtype=dtype)

        return cls(sheds[0].roi if n else 0,
                   col(lambda v: v.origin[0]), col(lambda v: v.origin[1]),
                   col(lambda v: v.row0), col(lambda v: v.col0),
                   col(lambda v: v.height), col(lambda v: v.width), offsets, words)

    def __len__(self):
        return len(self.origin_row)

    def shed_words(self, i) -> np.ndarray:
        return self.words[self.offsets[i]:self.offsets[i + 1]]

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[k] for k in range(*i.indices(len(self)))]
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        return Viewshed((int(self.origin_row[i]), int(self.origin_col[i])), self.roi,
                        int(self.row0[i]), int(self.col0[i]),
                        int(self.height[i]), int(self.width[i]), self.shed_words(i).copy())

    def popcounts(self) -> np.ndarray:
        be = _backend.get()
        return np.array([be.popcount(self.shed_words(i)) for i in range(len(self))],
                        dtype=np.int64)


def _roi_of(params) -> int:
    roi = params.roi if hasattr(params, "roi") else params
    if roi < 1 or int(roi) != roi:
        raise ValueError("roi must be a positive integer number of posts")
    return int(roi)


def compute_all_viewsheds(grid: TerrainGrid, candidates, params, threads: int = 0) -> ViewshedSet:
    """Viewshed of every candidate, in input order.

    ``candidates`` may hold :class:`~towersite.candidates.Candidate` objects,
    ``(row, col)`` pairs, or be a ``(rows, cols)`` pair of arrays.
    """
    roi = _roi_of(params)
    if isinstance(candidates, tuple) and len(candidates) == 2 and hasattr(candidates[0], "__len__"):
        rows, cols = (np.asarray(a, dtype=np.int32) for a in candidates)
    else:
        bases = [getattr(c, "base", c) for c in candidates]
        rows = np.array([b[0] for b in bases], dtype=np.int32)
        cols = np.array([b[1] for b in bases], dtype=np.int32)
    if len(rows) and (rows.min() < 0 or cols.min() < 0
                      or rows.max() >= grid.nrows or cols.max() >= grid.ncols):
        raise TerrainError("candidate base lies off the grid")
    vs = ViewshedSet.allocate(grid.nrows, grid.ncols, rows, cols, roi)
    if len(rows):
        _backend.get().viewsheds(
            grid.elevations, vs.origin_row, vs.origin_col,
            float(params.tx_height), float(params.rx_height), ray_template(roi),
            vs.row0, vs.col0, vs.height, vs.width, vs.offsets, vs.words,
            _backend.resolve_threads(threads))
    return vs


def compute_viewshed(grid: TerrainGrid, tx_base, params) -> Viewshed:
    if not grid.contains(tx_base):
        raise TerrainError(f"transmitter base {tuple(tx_base)} lies off the grid")
    return compute_all_viewsheds(grid, [tuple(tx_base)], params, threads=1)[0]


def write_viewshed(v: Viewshed, fh) -> None:
    """Dump one viewshed.

    Header of six little-endian int32: transmitter row, col, then the window
    rectangle row0, col0, width, height; followed by the packed LE words.
    """
    fh.write(np.array([*v.origin, v.row0, v.col0, v.width, v.height], dtype="<i4").tobytes())
    fh.write(np.asarray(v.words, dtype="<u8").tobytes())
