"""Compiled inner loops.

Every reduction here is a single Neumaier-compensated accumulator run in a
fixed order, so results do not depend on how callers split work across threads.
"""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def neumaier_sum(a):
    s = 0.0
    c = 0.0
    for i in range(a.shape[0]):
        x = a[i]
        t = s + x
        if abs(s) >= abs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        s = t
    return s + c


@njit(cache=True, nogil=True)
def neumaier_dot(f, g):
    s = 0.0
    c = 0.0
    for i in range(f.shape[0]):
        x = f[i] * g[i]
        t = s + x
        if abs(s) >= abs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        s = t
    return s + c


@njit(cache=True, nogil=True)
def strided_correlate(filt, data, starts, out):
    """out[c] = sum_m filt[m] * data[starts[c] + m], compensated, m ascending."""
    nf = filt.shape[0]
    for ci in range(starts.shape[0]):
        base = starts[ci]
        s = 0.0
        c = 0.0
        for m in range(nf):
            x = filt[m] * data[base + m]
            t = s + x
            if abs(s) >= abs(x):
                c += (s - t) + x
            else:
                c += (x - t) + s
            s = t
        out[ci] = s + c


@njit(cache=True, nogil=True)
def _lagrange4(t):
    # weights of the 4-point stencil at nodes -1, 0, 1, 2 for 0 <= t <= 1
    w0 = -t * (t - 1.0) * (t - 2.0) / 6.0
    w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0
    w2 = -(t + 1.0) * t * (t - 2.0) / 2.0
    w3 = (t + 1.0) * t * (t - 1.0) / 6.0
    return w0, w1, w2, w3


@njit(cache=True, nogil=True)
def stencil(pos, n):
    """First stencil index and local coordinate for cubic interpolation at grid position pos."""
    i = int(np.floor(pos))
    if i < 1:
        i = 1
    if i > n - 3:
        i = n - 3
    return i - 1, pos - i


@njit(cache=True, nogil=True)
def interp_row(row, x0, hx, x_zero, x_max, x):
    """Cubic Lagrange interpolation of a uniform row; exact 0 for x <= x_zero or x >= x_max."""
    if x <= x_zero or x >= x_max:
        return 0.0
    n = row.shape[0]
    pos = (x - x0) / hx
    i0, t = stencil(pos, n)
    w0, w1, w2, w3 = _lagrange4(t + 0.0)
    if t == 0.0:
        return row[i0 + 1]
    return w0 * row[i0] + w1 * row[i0 + 1] + w2 * row[i0 + 2] + w3 * row[i0 + 3]


@njit(cache=True, nogil=True)
def collapse_v(table, v0, hv, v, row):
    """row[:] = table interpolated at v (cubic Lagrange along axis 0)."""
    nv = table.shape[0]
    pos = (v - v0) / hv
    i0, t = stencil(pos, nv)
    if t == 0.0:
        row[:] = table[i0 + 1]
        return
    w0, w1, w2, w3 = _lagrange4(t)
    for ix in range(table.shape[1]):
        row[ix] = (w0 * table[i0, ix] + w1 * table[i0 + 1, ix]
                   + w2 * table[i0 + 2, ix] + w3 * table[i0 + 3, ix])


@njit(cache=True, nogil=True)
def _row_value(table, iv0, tv, ix):
    # same arithmetic as collapse_v for a single column
    if tv == 0.0:
        return table[iv0 + 1, ix]
    w0, w1, w2, w3 = _lagrange4(tv)
    return (w0 * table[iv0, ix] + w1 * table[iv0 + 1, ix]
            + w2 * table[iv0 + 2, ix] + w3 * table[iv0 + 3, ix])


@njit(cache=True, nogil=True)
def interp2d(table, x0, hx, x_zero, x_max, v0, hv, xs, vs, out):
    """Pointwise bicubic interpolation, bit-identical to collapse_v followed by interp_row."""
    nv, nx = table.shape
    for i in range(xs.shape[0]):
        x = xs[i]
        if x <= x_zero or x >= x_max:
            out[i] = 0.0
            continue
        iv0, tv = stencil((vs[i] - v0) / hv, nv)
        ix0, tx = stencil((x - x0) / hx, nx)
        if tx == 0.0:
            out[i] = _row_value(table, iv0, tv, ix0 + 1)
            continue
        w0, w1, w2, w3 = _lagrange4(tx + 0.0)
        out[i] = (w0 * _row_value(table, iv0, tv, ix0) + w1 * _row_value(table, iv0, tv, ix0 + 1)
                  + w2 * _row_value(table, iv0, tv, ix0 + 2)
                  + w3 * _row_value(table, iv0, tv, ix0 + 3))


@njit(cache=True, nogil=True)
def _acc(s, c, x):
    t = s + x
    if abs(s) >= abs(x):
        c += (s - t) + x
    else:
        c += (x - t) + s
    return t, c


@njit(cache=True, nogil=True)
def _merge_ranges(a1, a2, b1, b2):
    # the union of [a1, a2] and [b1, b2] as at most two ascending runs
    if a1 > a2:
        return b1, b2, 1, 0
    if b1 > b2:
        return a1, a2, 1, 0
    if a1 <= b2 + 1 and b1 <= a2 + 1:
        return min(a1, b1), max(a2, b2), 1, 0
    if a2 < b1:
        return a1, a2, b1, b2
    return b1, b2, a1, a2


@njit(cache=True, nogil=True)
def synthesize_nodes(u, v, levels, taylor, kmins, offsets, eps, tables, x0, hx, x_zero, x_max,
                     v0, hv, low, high):
    """Truncated wavelet series at nodes (u[i], v[i]).

    ``tables[p]`` holds d_x^p Psi on the (v, x) grid.  Levels are visited in
    ascending order and k ascends within a level.  On levels flagged in
    ``taylor`` the difference Psi(x_b - k) - Psi(-k) with x_b = 2^j u is replaced
    by its cubic Taylor polynomial around -k (k <= -1), which avoids the
    cancellation of two nearly equal table values when |x_b| is tiny.  Terms
    with j < 0 go to ``low``, the others to ``high``.
    """
    nx = tables.shape[2]
    rows = np.empty((4, nx))
    for i in range(u.shape[0]):
        collapse_v(tables[0], v0, hv, v[i], rows[0])
        if taylor.any():
            for p in range(1, 4):
                collapse_v(tables[p], v0, hv, v[i], rows[p])
        ui = u[i]
        vi = v[i]
        sl = 0.0
        cl = 0.0
        sh = 0.0
        ch = 0.0
        for li in range(levels.shape[0]):
            j = levels[li]
            kmin = kmins[li]
            kmax = kmin + (offsets[li + 1] - offsets[li]) - 1
            base = offsets[li]
            scale = 2.0 ** (-j * vi)
            xb = 2.0 ** j * ui
            if taylor[li]:
                c1 = xb
                c2 = xb * xb / 2.0
                c3 = xb * xb * xb / 6.0
                k1 = max(int(np.ceil(-x_max)), kmin)
                k2 = min(-1, kmax)
                for k in range(k1, k2 + 1):
                    x = -1.0 * k
                    d = (c1 * interp_row(rows[1], x0, hx, x_zero, x_max, x)
                         + c2 * interp_row(rows[2], x0, hx, x_zero, x_max, x)
                         + c3 * interp_row(rows[3], x0, hx, x_zero, x_max, x))
                    if d == 0.0:
                        continue
                    term = scale * eps[base + k - kmin] * d
                    if j < 0:
                        sl, cl = _acc(sl, cl, term)
                    else:
                        sh, ch = _acc(sh, ch, term)
                # k = 0: Psi(x_b) - Psi(0) = Psi(x_b)
                if kmin <= 0 <= kmax:
                    d = interp_row(rows[0], x0, hx, x_zero, x_max, xb)
                    if d != 0.0:
                        term = scale * eps[base - kmin] * d
                        if j < 0:
                            sl, cl = _acc(sl, cl, term)
                        else:
                            sh, ch = _acc(sh, ch, term)
                continue
            # k with 0 < xb - k < x_max, and k with 0 < -k < x_max
            a1 = max(int(np.ceil(xb - x_max)), kmin)
            a2 = min(int(np.ceil(xb)) - 1, kmax)
            b1 = max(int(np.ceil(-x_max)), kmin)
            b2 = min(-1, kmax)
            r1, r2, r3, r4 = _merge_ranges(a1, a2, b1, b2)
            for part in range(2):
                if part == 0:
                    k1, k2 = r1, r2
                else:
                    k1, k2 = r3, r4
                for k in range(k1, k2 + 1):
                    d = (interp_row(rows[0], x0, hx, x_zero, x_max, xb - k)
                         - interp_row(rows[0], x0, hx, x_zero, x_max, -1.0 * k))
                    if d == 0.0:
                        continue
                    term = scale * eps[base + k - kmin] * d
                    if j < 0:
                        sl, cl = _acc(sl, cl, term)
                    else:
                        sh, ch = _acc(sh, ch, term)
        low[i] = sl + cl
        high[i] = sh + ch
