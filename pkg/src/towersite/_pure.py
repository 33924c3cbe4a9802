"""Pure-Python kernels.

Same signatures and bit-identical results as the compiled ``_core``
extension; used when the extension is not built or when
``TOWERSITE_BACKEND=pure``.  ``nthreads`` arguments are accepted and ignored.
"""

import math

import numpy as np

NAME = "pure"

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


# -- random streams ---------------------------------------------------------

def mix64(z):
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_state(seed, row, col):
    return mix64((seed & MASK64) ^ mix64(((row & 0xFFFFFFFF) << 32) | (col & 0xFFFFFFFF)))


class PostStream:
    """splitmix64 stream keyed by (seed, row, col)."""

    def __init__(self, seed, row, col):
        self.state = stream_state(seed, row, col)

    def next(self):
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def below(self, span):
        # rejection keeps the draw exactly uniform on [0, span)
        rem = (1 << 64) % span
        while True:
            x = self.next()
            if rem == 0 or x < (1 << 64) - rem:
                return x % span


def sample_offsets(seed, row, col, roi, nrows, ncols, samples):
    """Receiver offsets drawn for one post, in draw order."""
    rs = PostStream(seed, row, col)
    span = 2 * roi + 1
    r2 = roi * roi
    out = []
    for _ in range(samples):
        while True:
            dr = rs.below(span) - roi
            dc = rs.below(span) - roi
            if dr * dr + dc * dc <= r2 and 0 <= row + dr < nrows and 0 <= col + dc < ncols:
                break
        out.append((dr, dc))
    return out


# -- line of sight ----------------------------------------------------------

def los_visible(z, r0, c0, ht, r1, c1, hr):
    zt = float(z[r0, c0]) + ht
    zr = float(z[r1, c1]) + hr
    dy, dx = r1 - r0, c1 - c0
    ay, ax = abs(dy), abs(dx)
    sy = 1 if dy >= 0 else -1
    sx = 1 if dx >= 0 else -1
    # comparisons are scaled by the crossing denominator so integer data is exact
    for i in range(1, ax):
        q, m = divmod(i * ay, ax)
        ra, ca = r0 + sy * q, c0 + sx * i
        t = float(z[ra, ca]) * (ax - m)
        if m:
            t += float(z[ra + sy, ca]) * m
        if t > zt * (ax - i) + zr * i:
            return False
    for j in range(1, ay):
        q, m = divmod(j * ax, ay)
        if m == 0 and ax:
            continue  # post already tested as a vertical-line crossing
        ra, ca = r0 + sy * j, c0 + sx * q
        t = float(z[ra, ca]) * (ay - m)
        if m:
            t += float(z[ra, ca + sx]) * m
        if t > zt * (ay - j) + zr * j:
            return False
    return True


def vix_scores(z, roi, ht, hr, samples, seed, nthreads=1):
    nrows, ncols = z.shape
    scores = np.zeros((nrows, ncols), dtype=np.uint8)
    for r in range(nrows):
        for c in range(ncols):
            n = 0
            for dr, dc in sample_offsets(seed, r, c, roi, nrows, ncols, samples):
                if los_visible(z, r, c, ht, r + dr, c + dc, hr):
                    n += 1
            scores[r, c] = n
    return scores


# -- per-block selection ----------------------------------------------------

def top_per_block(scores, bw, per_block, nthreads=1):
    nrows, ncols = scores.shape
    rows_out, cols_out, sc_out = [], [], []
    for br in range(0, nrows, bw):
        for bc in range(0, ncols, bw):
            block = scores[br:br + bw, bc:bc + bw]
            h, w = block.shape
            flat = block.ravel().astype(np.int64)
            # stable sort on -score keeps row-major (row, col) order within ties
            order = np.argsort(-flat, kind="stable")[:per_block]
            rows_out.extend((br + order // w).tolist())
            cols_out.extend((bc + order % w).tolist())
            sc_out.extend(flat[order].tolist())
    return (np.array(rows_out, dtype=np.int32), np.array(cols_out, dtype=np.int32),
            np.array(sc_out, dtype=np.uint8))


# -- viewsheds --------------------------------------------------------------

def viewsheds(z, rows, cols, ht, hr, tmpl, win_r0, win_c0, win_h, win_w,
              offsets, words, nthreads=1):
    nrows, ncols = z.shape
    ray_ptr = tmpl.ray_ptr.tolist()
    a_dr, a_dc = tmpl.a_dr.tolist(), tmpl.a_dc.tolist()
    b_dr, b_dc = tmpl.b_dr.tolist(), tmpl.b_dc.tolist()
    wt, inv_d, upd = tmpl.weight.tolist(), tmpl.inv_d.tolist(), tmpl.update.tolist()
    rp = tmpl.recv_ptr.tolist()
    rv_dr, rv_dc, rv_inv = tmpl.recv_dr.tolist(), tmpl.recv_dc.tolist(), tmpl.recv_inv.tolist()
    zl = z.tolist()
    nrays = len(ray_ptr) - 1
    for k in range(len(rows)):
        r, c = int(rows[k]), int(cols[k])
        wr0, wc0, ww = int(win_r0[k]), int(win_c0[k]), int(win_w[k])
        bits = 0
        eye = zl[r][c] + ht
        bits |= 1 << ((r - wr0) * ww + (c - wc0))
        for ray in range(nrays):
            horizon = -math.inf
            for s in range(ray_ptr[ray], ray_ptr[ray + 1]):
                ra, ca = r + a_dr[s], c + a_dc[s]
                rb, cb = r + b_dr[s], c + b_dc[s]
                if not (0 <= ra < nrows and 0 <= ca < ncols and 0 <= rb < nrows and 0 <= cb < ncols):
                    break
                for q in range(rp[s], rp[s + 1]):
                    rr, cc = r + rv_dr[q], c + rv_dc[q]
                    tan = (zl[rr][cc] + hr - eye) * rv_inv[q]
                    # relative slack so exact ties survive rounding of the distances
                    if tan >= horizon - 1e-12 * (abs(horizon) + 1.0):
                        bits |= 1 << ((rr - wr0) * ww + (cc - wc0))
                if upd[s]:
                    w = wt[s]
                    tan = (zl[ra][ca] * (1.0 - w) + zl[rb][cb] * w - eye) * inv_d[s]
                    if tan > horizon:
                        horizon = tan
        start = int(offsets[k])
        nw = int(offsets[k + 1]) - start
        for i in range(nw):
            words[start + i] = (bits >> (64 * i)) & MASK64


# -- bitmaps ----------------------------------------------------------------

def _get_bits(words, off, n):
    wi, sh = off >> 6, off & 63
    v = int(words[wi]) >> sh
    if sh + n > 64:
        v |= int(words[wi + 1]) << (64 - sh)
    return v & ((1 << n) - 1)


def _or_bits(words, off, v, n):
    wi, sh = off >> 6, off & 63
    words[wi] = int(words[wi]) | ((v << sh) & MASK64)
    if sh + n > 64:
        words[wi + 1] = int(words[wi + 1]) | (v >> (64 - sh))


def popcount(words):
    return sum(int(w).bit_count() for w in words)


def marginal_gain(shed, h, w, cum, r0, c0, ncols):
    gain = 0
    for r in range(h):
        so = r * w
        co = (r0 + r) * ncols + c0
        for x in range(0, w, 64):
            n = min(64, w - x)
            a = _get_bits(shed, so + x, n)
            b = _get_bits(cum, co + x, n)
            gain += (a & ~b).bit_count()
    return gain


def union_into(shed, h, w, cum, r0, c0, ncols):
    gain = 0
    for r in range(h):
        so = r * w
        co = (r0 + r) * ncols + c0
        for x in range(0, w, 64):
            n = min(64, w - x)
            a = _get_bits(shed, so + x, n)
            gain += (a & ~_get_bits(cum, co + x, n)).bit_count()
            _or_bits(cum, co + x, a, n)
    return gain
