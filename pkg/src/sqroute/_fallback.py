"""Pure-Python/numpy versions of the compiled kernels.

Same signatures and results as ``sqroute._kernels``; used when the extension
is not built or ``SQROUTE_PURE=1`` is set. Slow for tours beyond a few
hundred points.
"""
from __future__ import annotations

import math
from collections import deque

import numpy as np


def tour_length(xs, ys, order):
    if len(order) < 2:
        return 0.0
    px = xs[order]
    py = ys[order]
    dx = np.diff(px, append=px[:1])
    dy = np.diff(py, append=py[:1])
    # sequential sum keeps agreement with the compiled loop to the last ulp-ish
    return float(math.fsum(np.hypot(dx, dy)))


def nearest_neighbor_order(xs, ys, sx, sy):
    n = len(xs)
    out = np.empty(n, dtype=np.int64)
    if n == 0:
        return out
    used = np.zeros(n, dtype=bool)
    qx, qy = sx, sy
    for k in range(n):
        d2 = (xs - qx) ** 2 + (ys - qy) ** 2
        d2[used] = np.inf
        cur = int(np.argmin(d2))  # argmin returns the lowest index among ties
        out[k] = cur
        used[cur] = True
        qx, qy = xs[cur], ys[cur]
    return out


def _d(xs, ys, a, b):
    return math.hypot(xs[a] - xs[b], ys[a] - ys[b])


def two_opt_scan(xs, ys, t, max_passes):
    n = len(t)
    if n < 4:
        return 0
    xs = xs.tolist()
    ys = ys.tolist()
    tl = t.tolist()
    passes = 0
    while passes < max_passes:
        passes += 1
        improved = False
        for i in range(n - 2):
            for j in range(i + 2, n):
                if i == 0 and j == n - 1:
                    continue
                a, b, c = tl[i], tl[i + 1], tl[j]
                d = tl[j + 1] if j + 1 < n else tl[0]
                delta = (_d(xs, ys, a, c) + _d(xs, ys, b, d)
                         - _d(xs, ys, a, b) - _d(xs, ys, c, d))
                if delta < -1e-12:
                    tl[i + 1:j + 1] = tl[i + 1:j + 1][::-1]
                    improved = True
        if not improved:
            break
    t[:] = tl
    return passes


def _reverse(t, pos, i, j, n):
    length = (j - i + n) % n + 1
    if 2 * length > n:
        i, j = (j + 1) % n, (i - 1) % n
        length = n - length
    for _ in range(length // 2):
        t[i], t[j] = t[j], t[i]
        pos[t[i]] = i
        pos[t[j]] = j
        i = (i + 1) % n
        j = (j - 1) % n


def _move(t, pos, a, b, c, d, n):
    # traversal a->b ... c->d becomes a->c ... b->d, whatever the array orientation
    if t[(pos[a] + 1) % n] == b:
        _reverse(t, pos, pos[b], pos[c], n)
    else:
        _reverse(t, pos, pos[c], pos[b], n)


def _try_or(xs, ys, t, pos, nbr, a, n):
    succ = lambda x: t[(pos[x] + 1) % n]  # noqa: E731
    pred = lambda x: t[pos[x] - 1]  # noqa: E731
    s1 = s2 = a
    seg = []
    best_gain = 1e-12
    best = None
    for L in range(1, 4):
        if L > 1:
            s2 = succ(s2)
        seg.append(s2)
        p = pred(s1)
        nx = succ(s2)
        if nx == p or nx == s1:
            break
        g1 = _d(xs, ys, p, s1) + _d(xs, ys, s2, nx) - _d(xs, ys, p, nx)
        if g1 <= best_gain:
            continue
        for x in (s1, s2):
            for c in nbr[x]:
                if _d(xs, ys, x, c) >= g1:
                    break
                for c1, d1 in ((c, succ(c)), (pred(c), c)):
                    if c1 in seg or d1 in seg or d1 == p:
                        continue
                    base = _d(xs, ys, c1, d1)
                    add_f = _d(xs, ys, c1, s1) + _d(xs, ys, s2, d1) - base
                    add_r = _d(xs, ys, c1, s2) + _d(xs, ys, s1, d1) - base
                    if g1 - add_f > best_gain:
                        best_gain = g1 - add_f
                        best = (c1, d1, True, L)
                    if g1 - add_r > best_gain:
                        best_gain = g1 - add_r
                        best = (c1, d1, False, L)
    if best is None:
        return None
    bc, bd, fwd, L = best
    s2 = seg[L - 1]
    p = pred(s1)
    nx = succ(s2)
    _move(t, pos, p, s1, bc, bd, n)
    if bc != nx:
        _move(t, pos, p, bc, nx, s2, n)
    if fwd and L > 1:
        _move(t, pos, bc, s2, s1, bd, n)
    return (p, nx, bc, bd)


def two_opt_neighbors(xs, ys, t, nbr, max_moves, or_opt=False):
    n = len(t)
    if n < 5:
        return 0
    if n < 8:
        or_opt = False
    xs = xs.tolist()
    ys = ys.tolist()
    tl = t.tolist()
    nbr = nbr.tolist()
    pos = [0] * n
    for k, city in enumerate(tl):
        pos[city] = k
    queue = deque(tl)
    inq = [True] * n
    moves = 0
    while queue and moves < max_moves:
        a = queue.popleft()
        inq[a] = False
        pa_ = pos[a]
        sa = tl[(pa_ + 1) % n]
        pa = tl[pa_ - 1]
        d_a_sa = _d(xs, ys, a, sa)
        d_a_pa = _d(xs, ys, a, pa)
        touched = None
        for c in nbr[a]:
            d_ac = _d(xs, ys, a, c)
            if d_ac >= d_a_sa and d_ac >= d_a_pa:
                break
            pc_ = pos[c]
            sc = tl[(pc_ + 1) % n]
            pc = tl[pc_ - 1]
            if d_ac < d_a_sa and c != sa:
                gain = d_a_sa + _d(xs, ys, c, sc) - d_ac - _d(xs, ys, sa, sc)
                if gain > 1e-12:
                    _reverse(tl, pos, pos[sa], pc_, n)
                    touched = (a, sa, c, sc)
                    break
            if d_ac < d_a_pa and c != pa:
                gain = d_a_pa + _d(xs, ys, c, pc) - d_ac - _d(xs, ys, pa, pc)
                if gain > 1e-12:
                    _reverse(tl, pos, pa_, pos[pc], n)
                    touched = (a, pa, c, pc)
                    break
        if touched is None and or_opt:
            touched = _try_or(xs, ys, tl, pos, nbr, a, n)
        if touched is not None:
            moves += 1
            for e in (a,) + tuple(touched):
                if not inq[e]:
                    inq[e] = True
                    queue.append(e)
    t[:] = tl
    return moves


def iterate_y(A, B, y0, max_iter, rtol):
    y = np.array(y0, dtype=np.float64)
    it = 0
    while it < max_iter:
        nxt = A @ y + B @ np.sqrt(y)
        step = np.max(np.abs(nxt - y))
        top = np.max(nxt)
        y = nxt
        it += 1
        if top == 0.0 or step <= rtol * top:
            break
    return y, it
