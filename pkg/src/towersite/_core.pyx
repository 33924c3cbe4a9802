# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; mirrors ``_pure`` bit for bit."""

from cython.parallel cimport parallel, prange
from libc.math cimport INFINITY, fabs, fmax
from libc.stdlib cimport free, malloc
from libc.stdint cimport int32_t, int64_t, uint8_t, uint32_t, uint64_t

import numpy as np

NAME = "core"

cdef extern from *:
    int popcount64 "__builtin_popcountll"(unsigned long long) nogil

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL


cdef inline uint64_t _mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t _next(uint64_t* state) noexcept nogil:
    state[0] += GOLDEN
    return _mix64(state[0])


cdef inline uint64_t _below(uint64_t* state, uint64_t span) noexcept nogil:
    cdef uint64_t rem = ((<uint64_t>0xFFFFFFFFFFFFFFFFULL) % span + 1) % span
    cdef uint64_t x
    while True:
        x = _next(state)
        if rem == 0 or x < <uint64_t>(0 - rem):
            return x % span


cdef inline uint64_t _stream(uint64_t seed, int64_t row, int64_t col) noexcept nogil:
    return _mix64(seed ^ _mix64(((<uint64_t>(<uint32_t>row)) << 32) | (<uint64_t>(<uint32_t>col))))


def stream_state(seed, int64_t row, int64_t col):
    return _stream(<uint64_t>(seed & 0xFFFFFFFFFFFFFFFF), row, col)


cdef bint _los(const int32_t[:, ::1] z, int64_t r0, int64_t c0, double ht,
               int64_t r1, int64_t c1, double hr) noexcept nogil:
    cdef double zt = z[r0, c0] + ht
    cdef double zr = z[r1, c1] + hr
    cdef int64_t dy = r1 - r0, dx = c1 - c0
    cdef int64_t ay = dy if dy >= 0 else -dy
    cdef int64_t ax = dx if dx >= 0 else -dx
    cdef int64_t sy = 1 if dy >= 0 else -1
    cdef int64_t sx = 1 if dx >= 0 else -1
    cdef int64_t i, j, q, m, ra, ca
    cdef double t
    for i in range(1, ax):
        q = (i * ay) // ax
        m = i * ay - q * ax
        ra = r0 + sy * q
        ca = c0 + sx * i
        t = <double>z[ra, ca] * <double>(ax - m)
        if m:
            t = t + <double>z[ra + sy, ca] * <double>m
        if t > zt * <double>(ax - i) + zr * <double>i:
            return False
    for j in range(1, ay):
        q = (j * ax) // ay
        m = j * ax - q * ay
        if m == 0 and ax:
            continue
        ra = r0 + sy * j
        ca = c0 + sx * q
        t = <double>z[ra, ca] * <double>(ay - m)
        if m:
            t = t + <double>z[ra, ca + sx] * <double>m
        if t > zt * <double>(ay - j) + zr * <double>j:
            return False
    return True


def los_visible(const int32_t[:, ::1] z, int64_t r0, int64_t c0, double ht,
                int64_t r1, int64_t c1, double hr):
    return bool(_los(z, r0, c0, ht, r1, c1, hr))


cdef uint8_t _vix_post(const int32_t[:, ::1] z, int64_t r, int64_t c, int64_t roi,
                       double ht, double hr, int samples, uint64_t seed) noexcept nogil:
    cdef int64_t nrows = z.shape[0], ncols = z.shape[1]
    cdef uint64_t state = _stream(seed, r, c)
    cdef uint64_t span = 2 * roi + 1
    cdef int64_t r2 = roi * roi, dr, dc, rr, cc
    cdef int s, n = 0
    for s in range(samples):
        while True:
            dr = <int64_t>_below(&state, span) - roi
            dc = <int64_t>_below(&state, span) - roi
            rr = r + dr
            cc = c + dc
            if dr * dr + dc * dc <= r2 and 0 <= rr < nrows and 0 <= cc < ncols:
                break
        if _los(z, r, c, ht, rr, cc, hr):
            n += 1
    return <uint8_t>n


def vix_scores(const int32_t[:, ::1] z, int64_t roi, double ht, double hr,
               int samples, seed, int nthreads=1):
    cdef int64_t nrows = z.shape[0], ncols = z.shape[1]
    out = np.zeros((nrows, ncols), dtype=np.uint8)
    cdef uint8_t[:, ::1] sc = out
    cdef uint64_t useed = <uint64_t>(seed & 0xFFFFFFFFFFFFFFFF)
    cdef int64_t r, c
    for r in prange(nrows, nogil=True, num_threads=nthreads, schedule="dynamic"):
        for c in range(ncols):
            sc[r, c] = _vix_post(z, r, c, roi, ht, hr, samples, useed)
    return out


def top_per_block(const uint8_t[:, ::1] scores, int64_t bw, int64_t per_block, int nthreads=1):
    cdef int64_t nrows = scores.shape[0], ncols = scores.shape[1]
    cdef int64_t nby = (nrows + bw - 1) // bw, nbx = (ncols + bw - 1) // bw
    cdef int64_t nb = nby * nbx
    quota_np = np.empty(nb + 1, dtype=np.int64)
    cdef int64_t[::1] start = quota_np
    cdef int64_t b, h, w, total = 0
    for b in range(nb):
        h = min(bw, nrows - (b // nbx) * bw)
        w = min(bw, ncols - (b % nbx) * bw)
        start[b] = total
        total += min(per_block, h * w)
    start[nb] = total
    rows_np = np.empty(total, dtype=np.int32)
    cols_np = np.empty(total, dtype=np.int32)
    sc_np = np.empty(total, dtype=np.uint8)
    cdef int32_t[::1] ro = rows_np
    cdef int32_t[::1] co = cols_np
    cdef uint8_t[::1] so = sc_np
    for b in prange(nb, nogil=True, num_threads=nthreads, schedule="static"):
        _select_block(scores, b // nbx * bw, b % nbx * bw, bw, start[b], start[b + 1] - start[b],
                      ro, co, so)
    return rows_np, cols_np, sc_np


cdef void _select_block(const uint8_t[:, ::1] scores, int64_t br, int64_t bc, int64_t bw,
                        int64_t out0, int64_t quota, int32_t[::1] ro, int32_t[::1] co,
                        uint8_t[::1] so) noexcept nogil:
    # counting sort on score, descending; row-major scan keeps (row, col) order in ties
    cdef int64_t counts[256]
    cdef int64_t take[256]
    cdef int64_t pos[256]
    cdef int64_t r, c, s, left = quota, acc = 0
    cdef int64_t r1 = min(br + bw, <int64_t>scores.shape[0])
    cdef int64_t c1 = min(bc + bw, <int64_t>scores.shape[1])
    for s in range(256):
        counts[s] = 0
    for r in range(br, r1):
        for c in range(bc, c1):
            counts[scores[r, c]] += 1
    for s in range(255, -1, -1):
        take[s] = min(counts[s], left)
        left -= take[s]
        pos[s] = out0 + acc
        acc += take[s]
    for r in range(br, r1):
        for c in range(bc, c1):
            s = scores[r, c]
            if take[s] > 0:
                ro[pos[s]] = <int32_t>r
                co[pos[s]] = <int32_t>c
                so[pos[s]] = <uint8_t>s
                pos[s] += 1
                take[s] -= 1


cdef struct Tmpl:
    const int64_t* ray_ptr
    int64_t nrays
    int64_t reach
    int64_t side
    const int32_t* a_dr
    const int32_t* a_dc
    const int32_t* b_dr
    const int32_t* b_dc
    const int32_t* a_off        # a_dr * ncols + a_dc
    const int32_t* b_off
    const double* wt
    const double* inv_d
    const uint8_t* upd
    const int64_t* rv_ptr
    const int32_t* rv_dr
    const int32_t* rv_dc
    const int32_t* rv_zoff      # receiver offset into the terrain
    const int32_t* rv_boff      # receiver offset into an unclipped window
    const int32_t* rv_step      # step a receiver is tested at, counted from its ray's start
    const double* rv_inv


cdef inline double _slack(double horizon) noexcept nogil:
    # relative slack so exact ties survive rounding of the distances
    return horizon - 1e-12 * (fabs(horizon) + 1.0)


cdef void _shed(const int32_t* z, int64_t nrows, int64_t ncols, int64_t r, int64_t c,
                double ht, double hr, Tmpl* tp, int64_t wr0, int64_t wc0, int64_t ww,
                uint64_t* out, double* thr_buf) noexcept nogil:
    cdef Tmpl T = tp[0]
    cdef double eye = z[r * ncols + c] + ht
    cdef double horizon, thr, tan, w
    cdef int64_t k, s, s0, q, ra, ca, rb, cb, idx
    cdef const int32_t* zc = z + r * ncols + c
    cdef bint interior = (r - T.reach >= 0 and r + T.reach < nrows
                          and c - T.reach >= 0 and c + T.reach < ncols)
    cdef int64_t cidx = (r - wr0) * ww + (c - wc0)
    out[cidx >> 6] |= (<uint64_t>1) << (cidx & 63)
    if interior:
        # The window is the full square, so precomputed offsets apply.  Each
        # ray runs as two branch-free passes: the threshold in force at every
        # step, then every receiver against its step's threshold.  Skipping
        # the update flag is safe because only a ray's last step clears it.
        for k in range(T.nrays):
            s0 = T.ray_ptr[k]
            thr = -INFINITY
            horizon = -INFINITY
            for s in range(s0, T.ray_ptr[k + 1]):
                thr_buf[s - s0] = thr
                w = T.wt[s]
                horizon = fmax(horizon, (zc[T.a_off[s]] * (1.0 - w) + zc[T.b_off[s]] * w - eye)
                               * T.inv_d[s])
                thr = _slack(horizon)
            for q in range(T.rv_ptr[s0], T.rv_ptr[T.ray_ptr[k + 1]]):
                tan = (zc[T.rv_zoff[q]] + hr - eye) * T.rv_inv[q]
                idx = cidx + T.rv_boff[q]
                out[idx >> 6] |= (<uint64_t>(tan >= thr_buf[T.rv_step[q]])) << (idx & 63)
        return
    for k in range(T.nrays):
        horizon = -INFINITY
        thr = -INFINITY
        for s in range(T.ray_ptr[k], T.ray_ptr[k + 1]):
            ra = r + T.a_dr[s]
            ca = c + T.a_dc[s]
            rb = r + T.b_dr[s]
            cb = c + T.b_dc[s]
            if (ra < 0 or ra >= nrows or ca < 0 or ca >= ncols
                    or rb < 0 or rb >= nrows or cb < 0 or cb >= ncols):
                break
            for q in range(T.rv_ptr[s], T.rv_ptr[s + 1]):
                tan = (zc[T.rv_zoff[q]] + hr - eye) * T.rv_inv[q]
                idx = (r + T.rv_dr[q] - wr0) * ww + (c + T.rv_dc[q] - wc0)
                out[idx >> 6] |= (<uint64_t>(tan >= thr)) << (idx & 63)
            if T.upd[s]:
                w = T.wt[s]
                horizon = fmax(horizon, (zc[T.a_off[s]] * (1.0 - w) + zc[T.b_off[s]] * w - eye)
                               * T.inv_d[s])
                thr = _slack(horizon)


def viewsheds(const int32_t[:, ::1] z, const int32_t[::1] rows, const int32_t[::1] cols,
              double ht, double hr, tmpl, const int32_t[::1] win_r0,
              const int32_t[::1] win_c0, const int32_t[::1] win_h, const int32_t[::1] win_w,
              const int64_t[::1] offsets, uint64_t[::1] words, int nthreads=1):
    cdef int64_t nrows = z.shape[0], ncols = z.shape[1]
    cdef int64_t n = rows.shape[0], k
    if n == 0 or tmpl.nsteps == 0:
        return
    reach = tmpl.reach
    side = 2 * tmpl.roi + 1
    if (reach + 1) * max(ncols, side) >= 2 ** 31:
        raise OverflowError("terrain too wide for 32-bit step offsets")
    # offsets depend on the row stride, so they are built per call
    a_off_a = (tmpl.a_dr.astype(np.int64) * ncols + tmpl.a_dc).astype(np.int32)
    b_off_a = (tmpl.b_dr.astype(np.int64) * ncols + tmpl.b_dc).astype(np.int32)
    zoff_a = (tmpl.recv_dr.astype(np.int64) * ncols + tmpl.recv_dc).astype(np.int32)
    boff_a = (tmpl.recv_dr.astype(np.int64) * side + tmpl.recv_dc).astype(np.int32)
    cdef const int64_t[::1] ray_ptr = tmpl.ray_ptr
    cdef const int32_t[::1] a_dr = tmpl.a_dr
    cdef const int32_t[::1] a_dc = tmpl.a_dc
    cdef const int32_t[::1] b_dr = tmpl.b_dr
    cdef const int32_t[::1] b_dc = tmpl.b_dc
    cdef const int32_t[::1] a_off = a_off_a
    cdef const int32_t[::1] b_off = b_off_a
    cdef const double[::1] wt = tmpl.weight
    cdef const double[::1] inv_d = tmpl.inv_d
    cdef const uint8_t[::1] upd = tmpl.update
    steps = np.arange(tmpl.nsteps) - np.repeat(tmpl.ray_ptr[:-1], np.diff(tmpl.ray_ptr))
    step_a = np.repeat(steps, np.diff(tmpl.recv_ptr)).astype(np.int32)
    cdef const int32_t[::1] rv_step = step_a
    cdef int64_t longest = int(np.diff(tmpl.ray_ptr).max())
    cdef const int64_t[::1] rv_ptr = tmpl.recv_ptr
    cdef const int32_t[::1] rv_dr = tmpl.recv_dr
    cdef const int32_t[::1] rv_dc = tmpl.recv_dc
    cdef const int32_t[::1] rv_zoff = zoff_a
    cdef const int32_t[::1] rv_boff = boff_a
    cdef const double[::1] rv_inv = tmpl.recv_inv
    cdef Tmpl T
    T.ray_ptr = &ray_ptr[0]
    T.nrays = ray_ptr.shape[0] - 1
    T.reach = reach
    T.side = side
    T.a_dr = &a_dr[0]
    T.a_dc = &a_dc[0]
    T.b_dr = &b_dr[0]
    T.b_dc = &b_dc[0]
    T.a_off = &a_off[0]
    T.b_off = &b_off[0]
    T.wt = &wt[0]
    T.inv_d = &inv_d[0]
    T.upd = &upd[0]
    T.rv_step = &rv_step[0]
    T.rv_ptr = &rv_ptr[0]
    T.rv_dr = &rv_dr[0]
    T.rv_dc = &rv_dc[0]
    T.rv_zoff = &rv_zoff[0]
    T.rv_boff = &rv_boff[0]
    T.rv_inv = &rv_inv[0]
    cdef uint64_t* base = &words[0]
    cdef const int32_t* zp = &z[0, 0]
    cdef double* buf
    with nogil, parallel(num_threads=nthreads):
        buf = <double*>malloc(longest * sizeof(double))
        if buf != NULL:
            for k in prange(n, schedule="dynamic", chunksize=16):
                _shed(zp, nrows, ncols, rows[k], cols[k], ht, hr, &T, win_r0[k], win_c0[k],
                      win_w[k], base + offsets[k], buf)
            free(buf)
        else:
            with gil:
                raise MemoryError()


cdef inline uint64_t _get_bits(const uint64_t* words, int64_t off, int64_t n) noexcept nogil:
    cdef int64_t wi = off >> 6, sh = off & 63
    cdef uint64_t v = words[wi] >> sh
    if sh + n > 64:
        v |= words[wi + 1] << (64 - sh)
    if n < 64:
        v &= ((<uint64_t>1) << n) - 1
    return v


cdef inline void _or_bits(uint64_t* words, int64_t off, uint64_t v, int64_t n) noexcept nogil:
    cdef int64_t wi = off >> 6, sh = off & 63
    words[wi] |= v << sh
    if sh + n > 64:
        words[wi + 1] |= v >> (64 - sh)


def popcount(const uint64_t[::1] words):
    cdef int64_t i, total = 0
    for i in range(words.shape[0]):
        total += popcount64(words[i])
    return total


def marginal_gain(const uint64_t[::1] shed, int64_t h, int64_t w,
                  const uint64_t[::1] cum, int64_t r0, int64_t c0, int64_t ncols):
    if h == 0 or w == 0:
        return 0
    cdef const uint64_t* sp = &shed[0]
    cdef const uint64_t* cp = &cum[0]
    cdef int64_t r, x, n, so, co, gain = 0
    with nogil:
        for r in range(h):
            so = r * w
            co = (r0 + r) * ncols + c0
            x = 0
            while x < w:
                n = min(64, w - x)
                gain += popcount64(_get_bits(sp, so + x, n) & ~_get_bits(cp, co + x, n))
                x += 64
    return gain


def union_into(const uint64_t[::1] shed, int64_t h, int64_t w,
               uint64_t[::1] cum, int64_t r0, int64_t c0, int64_t ncols):
    if h == 0 or w == 0:
        return 0
    cdef const uint64_t* sp = &shed[0]
    cdef uint64_t* cp = &cum[0]
    cdef int64_t r, x, n, so, co, gain = 0
    cdef uint64_t a
    with nogil:
        for r in range(h):
            so = r * w
            co = (r0 + r) * ncols + c0
            x = 0
            while x < w:
                n = min(64, w - x)
                a = _get_bits(sp, so + x, n)
                gain += popcount64(a & ~_get_bits(cp, co + x, n))
                _or_bits(cp, co + x, a, n)
                x += 64
    return gain
