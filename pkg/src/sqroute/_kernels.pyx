# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: tour construction/improvement and the queue recursion.

Every function here has a behaviourally identical counterpart in
``sqroute._fallback``; the two are selected at import time by
``sqroute._backend``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, ceil, floor

cnp.import_array()

ctypedef cnp.float64_t f8
ctypedef cnp.int64_t i8


cdef inline double _dist(const f8[::1] xs, const f8[::1] ys, Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    cdef double dx = xs[a] - xs[b]
    cdef double dy = ys[a] - ys[b]
    return sqrt(dx * dx + dy * dy)


def tour_length(const f8[::1] xs, const f8[::1] ys, const i8[::1] order):
    cdef Py_ssize_t n = order.shape[0]
    cdef Py_ssize_t k
    cdef double total = 0.0
    if n < 2:
        return 0.0
    with nogil:
        for k in range(n - 1):
            total += _dist(xs, ys, order[k], order[k + 1])
        total += _dist(xs, ys, order[n - 1], order[0])
    return total


# ---------------------------------------------------------------------------
# nearest neighbour construction on a uniform bucket grid

cdef struct Grid:
    double x0
    double y0
    double h
    Py_ssize_t g


cdef void _build_grid(const f8[::1] xs, const f8[::1] ys, i8[::1] alive, Py_ssize_t n_alive,
                      Grid* grid, i8[::1] cell_start, i8[::1] cell_count,
                      i8[::1] items) noexcept nogil:
    # alive[0:n_alive] holds the remaining point indices in increasing order
    cdef double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300
    cdef Py_ssize_t k, p, c, g, cx, cy, ncell
    cdef double span
    for k in range(n_alive):
        p = alive[k]
        if xs[p] < xmin: xmin = xs[p]
        if xs[p] > xmax: xmax = xs[p]
        if ys[p] < ymin: ymin = ys[p]
        if ys[p] > ymax: ymax = ys[p]
    g = <Py_ssize_t>ceil(sqrt(n_alive / 2.0))
    if g < 1:
        g = 1
    span = xmax - xmin
    if ymax - ymin > span:
        span = ymax - ymin
    if span <= 0.0:
        span = 1.0
    grid.x0 = xmin
    grid.y0 = ymin
    grid.h = span / g * (1.0 + 1e-12)
    grid.g = g
    ncell = g * g
    for c in range(ncell + 1):
        cell_start[c] = 0
        cell_count[c] = 0
    for k in range(n_alive):
        p = alive[k]
        cx = <Py_ssize_t>((xs[p] - xmin) / grid.h)
        cy = <Py_ssize_t>((ys[p] - ymin) / grid.h)
        if cx >= g: cx = g - 1
        if cy >= g: cy = g - 1
        cell_start[cy * g + cx + 1] += 1
    for c in range(ncell):
        cell_start[c + 1] += cell_start[c]
    for k in range(n_alive):
        p = alive[k]
        cx = <Py_ssize_t>((xs[p] - xmin) / grid.h)
        cy = <Py_ssize_t>((ys[p] - ymin) / grid.h)
        if cx >= g: cx = g - 1
        if cy >= g: cy = g - 1
        c = cy * g + cx
        items[cell_start[c] + cell_count[c]] = p
        cell_count[c] += 1
    # cell_count now doubles as the live counter of each cell


cdef Py_ssize_t _grid_nearest(const f8[::1] xs, const f8[::1] ys, double qx, double qy,
                              Grid* grid, i8[::1] cell_start, i8[::1] cell_count,
                              i8[::1] items, const cnp.uint8_t[::1] used) noexcept nogil:
    cdef Py_ssize_t g = grid.g
    cdef double h = grid.h
    cdef Py_ssize_t qcx = <Py_ssize_t>floor((qx - grid.x0) / h)
    cdef Py_ssize_t qcy = <Py_ssize_t>floor((qy - grid.y0) / h)
    cdef Py_ssize_t best = -1
    cdef double best_d2 = 1e300
    cdef Py_ssize_t r, cx, cy, c, k, p, lo_x, hi_x, lo_y, hi_y
    cdef double dx, dy, d2, bound, b
    cdef Py_ssize_t rmax
    # rings are Chebyshev shells around the (possibly outside) query cell
    rmax = g + 2
    if qcx < 0: rmax += -qcx
    if qcx >= g: rmax += qcx - g + 1
    if qcy < 0: rmax += -qcy
    if qcy >= g: rmax += qcy - g + 1
    for r in range(rmax + 1):
        if best >= 0 and r > 0:
            # distance from the query to the outside of the block of rings < r
            bound = qx - (grid.x0 + (qcx - r + 1) * h)
            b = grid.x0 + (qcx + r) * h - qx
            if b < bound: bound = b
            b = qy - (grid.y0 + (qcy - r + 1) * h)
            if b < bound: bound = b
            b = grid.y0 + (qcy + r) * h - qy
            if b < bound: bound = b
            if bound > 0.0 and best_d2 < bound * bound:
                break
        lo_y = qcy - r
        hi_y = qcy + r
        lo_x = qcx - r
        hi_x = qcx + r
        for cy in range(lo_y, hi_y + 1):
            if cy < 0 or cy >= g:
                continue
            for cx in range(lo_x, hi_x + 1):
                if cx < 0 or cx >= g:
                    continue
                if cy != lo_y and cy != hi_y and cx != lo_x and cx != hi_x:
                    continue
                c = cy * g + cx
                if cell_count[c] == 0:
                    continue
                for k in range(cell_start[c], cell_start[c + 1]):
                    p = items[k]
                    if used[p]:
                        continue
                    dx = xs[p] - qx
                    dy = ys[p] - qy
                    d2 = dx * dx + dy * dy
                    if d2 < best_d2 or (d2 == best_d2 and p < best):
                        best_d2 = d2
                        best = p
    return best


def nearest_neighbor_order(const f8[::1] xs, const f8[::1] ys, double sx, double sy):
    """Greedy tour from the point nearest (sx, sy); ties go to the lower index."""
    cdef Py_ssize_t n = xs.shape[0]
    out_arr = np.empty(n, dtype=np.int64)
    if n == 0:
        return out_arr
    cdef i8[::1] out = out_arr
    used_arr = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] used = used_arr
    alive_arr = np.arange(n, dtype=np.int64)
    cdef i8[::1] alive = alive_arr
    cdef Py_ssize_t max_cells = <Py_ssize_t>ceil(sqrt(n / 2.0)) + 1
    max_cells = max_cells * max_cells + 1
    cs_arr = np.zeros(max_cells + 1, dtype=np.int64)
    cc_arr = np.zeros(max_cells + 1, dtype=np.int64)
    it_arr = np.zeros(n, dtype=np.int64)
    cdef i8[::1] cell_start = cs_arr
    cdef i8[::1] cell_count = cc_arr
    cdef i8[::1] items = it_arr
    cdef Grid grid
    cdef Py_ssize_t n_alive = n
    cdef Py_ssize_t built_with = n
    cdef Py_ssize_t k, j, cur, c, cx, cy
    cdef double qx = sx, qy = sy
    with nogil:
        _build_grid(xs, ys, alive, n_alive, &grid, cell_start, cell_count, items)
        for k in range(n):
            cur = _grid_nearest(xs, ys, qx, qy, &grid, cell_start, cell_count, items, used)
            out[k] = cur
            used[cur] = 1
            n_alive -= 1
            cx = <Py_ssize_t>((xs[cur] - grid.x0) / grid.h)
            cy = <Py_ssize_t>((ys[cur] - grid.y0) / grid.h)
            if cx >= grid.g: cx = grid.g - 1
            if cy >= grid.g: cy = grid.g - 1
            cell_count[cy * grid.g + cx] -= 1
            qx = xs[cur]
            qy = ys[cur]
            if n_alive > 64 and 4 * n_alive < built_with:
                # shrink the grid once most points are gone
                j = 0
                for c in range(n):
                    if not used[c]:
                        alive[j] = c
                        j += 1
                _build_grid(xs, ys, alive, n_alive, &grid, cell_start, cell_count, items)
                built_with = n_alive
    return out_arr


# ---------------------------------------------------------------------------
# 2-opt

def two_opt_scan(const f8[::1] xs, const f8[::1] ys, i8[::1] t, Py_ssize_t max_passes):
    """Lexicographic first-improvement 2-opt, in place. Returns passes run."""
    cdef Py_ssize_t n = t.shape[0]
    cdef Py_ssize_t i, j, jn, lo, hi, passes = 0
    cdef i8 a, b, c, d, tmp
    cdef double delta, dab
    cdef bint improved
    if n < 4:
        return 0
    with nogil:
        while passes < max_passes:
            passes += 1
            improved = False
            for i in range(n - 2):
                for j in range(i + 2, n):
                    if i == 0 and j == n - 1:
                        continue
                    a = t[i]
                    b = t[i + 1]
                    c = t[j]
                    jn = j + 1
                    if jn == n:
                        jn = 0
                    d = t[jn]
                    delta = (_dist(xs, ys, a, c) + _dist(xs, ys, b, d)
                             - _dist(xs, ys, a, b) - _dist(xs, ys, c, d))
                    if delta < -1e-12:
                        lo = i + 1
                        hi = j
                        while lo < hi:
                            tmp = t[lo]
                            t[lo] = t[hi]
                            t[hi] = tmp
                            lo += 1
                            hi -= 1
                        improved = True
            if not improved:
                break
    return passes


cdef void _reverse(i8[::1] t, i8[::1] pos, Py_ssize_t i, Py_ssize_t j, Py_ssize_t n) noexcept nogil:
    # reverse the cyclic segment t[i..j]; flips the complement when shorter
    cdef Py_ssize_t length = (j - i + n) % n + 1
    cdef Py_ssize_t steps, s
    cdef i8 tmp
    if 2 * length > n:
        s = j + 1
        j = i - 1
        i = s
        if i >= n: i -= n
        if j < 0: j += n
        length = n - length
    steps = length // 2
    for s in range(steps):
        tmp = t[i]
        t[i] = t[j]
        t[j] = tmp
        pos[t[i]] = i
        pos[t[j]] = j
        i += 1
        if i == n: i = 0
        j -= 1
        if j < 0: j = n - 1


cdef inline i8 _succ(const i8[::1] t, const i8[::1] pos, i8 a, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t k = pos[a] + 1
    if k == n: k = 0
    return t[k]


cdef inline i8 _pred(const i8[::1] t, const i8[::1] pos, i8 a, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t k = pos[a] - 1
    if k < 0: k = n - 1
    return t[k]


cdef void _move(i8[::1] t, i8[::1] pos, i8 a, i8 b, i8 c, i8 d, Py_ssize_t n) noexcept nogil:
    # traversal a->b ... c->d becomes a->c ... b->d, whatever the array orientation
    if _succ(t, pos, a, n) == b:
        _reverse(t, pos, pos[b], pos[c], n)
    else:
        _reverse(t, pos, pos[c], pos[b], n)


cdef bint _try_or(const f8[::1] xs, const f8[::1] ys, i8[::1] t, i8[::1] pos,
                  const i8[:, ::1] nbr, i8 a, Py_ssize_t n, i8* touched) noexcept nogil:
    # move a segment of 1..3 cities starting at a next to one of its neighbours
    cdef Py_ssize_t kk = nbr.shape[1]
    cdef Py_ssize_t L, q, side, e, which
    cdef i8 s1 = a, s2, p, nx, c, c1, d1, x
    cdef i8 seg[3]
    cdef double g1, add_f, add_r, base, best_gain
    cdef i8 bc = -1, bd = -1
    cdef bint best_fwd = False, inseg
    cdef Py_ssize_t best_len = 0
    best_gain = 1e-12
    s2 = a
    for L in range(1, 4):
        if L > 1:
            s2 = _succ(t, pos, s2, n)
        seg[L - 1] = s2
        p = _pred(t, pos, s1, n)
        nx = _succ(t, pos, s2, n)
        if nx == p or nx == s1:
            break
        g1 = _dist(xs, ys, p, s1) + _dist(xs, ys, s2, nx) - _dist(xs, ys, p, nx)
        if g1 <= best_gain:
            continue
        for which in range(2):
            x = s1 if which == 0 else s2
            for q in range(kk):
                c = nbr[x, q]
                if _dist(xs, ys, x, c) >= g1:
                    break
                for side in range(2):
                    if side == 0:
                        c1 = c
                        d1 = _succ(t, pos, c, n)
                    else:
                        c1 = _pred(t, pos, c, n)
                        d1 = c
                    inseg = False
                    for e in range(L):
                        if seg[e] == c1 or seg[e] == d1:
                            inseg = True
                    if inseg or d1 == p:
                        continue
                    base = _dist(xs, ys, c1, d1)
                    add_f = _dist(xs, ys, c1, s1) + _dist(xs, ys, s2, d1) - base
                    add_r = _dist(xs, ys, c1, s2) + _dist(xs, ys, s1, d1) - base
                    if g1 - add_f > best_gain:
                        best_gain = g1 - add_f
                        bc = c1; bd = d1; best_fwd = True; best_len = L
                    if g1 - add_r > best_gain:
                        best_gain = g1 - add_r
                        bc = c1; bd = d1; best_fwd = False; best_len = L
    if bc < 0:
        return False
    s2 = seg[best_len - 1]
    p = _pred(t, pos, s1, n)
    nx = _succ(t, pos, s2, n)
    _move(t, pos, p, s1, bc, bd, n)
    if bc != nx:
        _move(t, pos, p, bc, nx, s2, n)
    if best_fwd and best_len > 1:
        _move(t, pos, bc, s2, s1, bd, n)
    touched[0] = p; touched[1] = nx; touched[2] = bc; touched[3] = bd
    return True


def two_opt_neighbors(const f8[::1] xs, const f8[::1] ys, i8[::1] t, const i8[:, ::1] nbr,
                      Py_ssize_t max_moves, bint or_opt=False):
    """Candidate-list 2-opt (optionally with Or-opt) and don't-look bits, in place.

    Returns the number of moves applied.
    """
    cdef Py_ssize_t n = t.shape[0]
    cdef Py_ssize_t kk = nbr.shape[1]
    pos_arr = np.empty(n, dtype=np.int64)
    cdef i8[::1] pos = pos_arr
    queue_arr = np.empty(n, dtype=np.int64)
    cdef i8[::1] queue = queue_arr
    inq_arr = np.ones(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] inq = inq_arr
    cdef Py_ssize_t head = 0, size = n, moves = 0
    cdef Py_ssize_t k, q, pa_, pc_, ends
    cdef i8 a, c, sa, sc, pa, pc, e
    cdef i8 touched[4]
    cdef double d_a_sa, d_a_pa, d_ac, gain
    cdef bint moved
    if n < 5:
        return 0
    if n < 8:
        or_opt = False
    for k in range(n):
        pos[t[k]] = k
        queue[k] = t[k]
    with nogil:
        while size > 0 and moves < max_moves:
            a = queue[head]
            head += 1
            if head == n: head = 0
            size -= 1
            inq[a] = 0
            moved = False
            pa_ = pos[a]
            sa = t[pa_ + 1 if pa_ + 1 < n else 0]
            pa = t[pa_ - 1 if pa_ > 0 else n - 1]
            d_a_sa = _dist(xs, ys, a, sa)
            d_a_pa = _dist(xs, ys, a, pa)
            for q in range(kk):
                c = nbr[a, q]
                d_ac = _dist(xs, ys, a, c)
                if d_ac >= d_a_sa and d_ac >= d_a_pa:
                    break
                pc_ = pos[c]
                sc = t[pc_ + 1 if pc_ + 1 < n else 0]
                pc = t[pc_ - 1 if pc_ > 0 else n - 1]
                if d_ac < d_a_sa and c != sa:
                    gain = d_a_sa + _dist(xs, ys, c, sc) - d_ac - _dist(xs, ys, sa, sc)
                    if gain > 1e-12:
                        _reverse(t, pos, pos[sa], pc_, n)
                        touched[0] = a; touched[1] = sa; touched[2] = c; touched[3] = sc
                        moved = True
                        break
                if d_ac < d_a_pa and c != pa:
                    gain = d_a_pa + _dist(xs, ys, c, pc) - d_ac - _dist(xs, ys, pa, pc)
                    if gain > 1e-12:
                        _reverse(t, pos, pa_, pos[pc], n)
                        touched[0] = a; touched[1] = pa; touched[2] = c; touched[3] = pc
                        moved = True
                        break
            if not moved and or_opt:
                moved = _try_or(xs, ys, t, pos, nbr, a, n, touched)
            if moved:
                moves += 1
                if not inq[a]:
                    inq[a] = 1
                    queue[(head + size) % n] = a
                    size += 1
                for ends in range(4):
                    e = touched[ends]
                    if not inq[e]:
                        inq[e] = 1
                        queue[(head + size) % n] = e
                        size += 1
    return moves


# ---------------------------------------------------------------------------
# queue-length recursion  y <- A y + B sqrt(y)

def iterate_y(const f8[:, ::1] A, const f8[:, ::1] B, const f8[::1] y0,
              Py_ssize_t max_iter, double rtol):
    """Run the map until the relative step drops below rtol. Returns (y, iters)."""
    cdef Py_ssize_t m = y0.shape[0]
    y_arr = np.array(y0, dtype=np.float64)
    nxt_arr = np.empty(m, dtype=np.float64)
    sq_arr = np.empty(m, dtype=np.float64)
    cdef f8[::1] y = y_arr
    cdef f8[::1] nxt = nxt_arr
    cdef f8[::1] sq = sq_arr
    cdef Py_ssize_t it = 0, a, j
    cdef double acc, num, den, diff
    with nogil:
        while it < max_iter:
            for j in range(m):
                sq[j] = sqrt(y[j])
            num = 0.0
            den = 0.0
            for a in range(m):
                acc = 0.0
                for j in range(m):
                    acc += A[a, j] * y[j] + B[a, j] * sq[j]
                nxt[a] = acc
                diff = acc - y[a]
                if diff < 0: diff = -diff
                if diff > num: num = diff
                if acc > den: den = acc
            for a in range(m):
                y[a] = nxt[a]
            it += 1
            if den == 0.0 or num <= rtol * den:
                break
    return y_arr, it
