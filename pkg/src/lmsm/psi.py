"""The fractional-integral kernel Psi(x, v) = int (x - s)_+^(v - 1/alpha) psi(s) ds.

x-derivatives are moved onto the wavelet (integration by parts, boundary terms
vanish by compact support) and v-derivatives insert log^q(x - s), so every
integrand has the form d^kappa log^q(d) psi^(p)(x - d) with d = x - s > 0.
Quadrature is composite Gauss-Legendre on cells of width h anchored at the
kink s = x, plus a geometrically graded mesh on the last cell.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .wavelet import WaveletTable, eval_psi_wavelet


class DomainError(ValueError):
    """v outside (1/alpha, 1) or x outside a table."""


class InconclusiveRangeError(RuntimeError):
    """A localization sup was attained on the boundary of the x-range."""


@dataclass(frozen=True)
class QuadConfig:
    cell_width: float = 1.0 / 32.0
    gl_order: int = 8
    grading_depth: int = 20
    grading_ratio: float = 2.0

    def nodes(self):
        """Distances d from the kink and weights: graded part, then uniform cells m = 1, 2, ..."""
        xi, w = np.polynomial.legendre.leggauss(self.gl_order)
        xi = 0.5 * (xi + 1.0)
        w = 0.5 * w
        h = self.cell_width
        r = self.grading_ratio
        d, wt = [], []
        edges = [h * r ** -i for i in range(self.grading_depth + 1)] + [0.0]
        for hi, lo in zip(edges[:-1], edges[1:]):
            d.append(lo + (hi - lo) * xi)
            wt.append((hi - lo) * w)
        return np.concatenate(d), np.concatenate(wt), xi, w


def _check_v(v, alpha):
    v = np.asarray(v, dtype=float)
    if np.any(v <= 1.0 / alpha) or np.any(v >= 1.0):
        raise DomainError(f"v must lie in (1/alpha, 1) = ({1.0 / alpha:.6g}, 1)")


def _kernel_weights(d, v, alpha, q):
    kappa = v - 1.0 / alpha
    out = d ** kappa
    if q:
        out = out * np.log(d) ** q
    return out


def compute_psi_derivative(x, v, p, q, table: WaveletTable, alpha,
                           quad: QuadConfig = QuadConfig()) -> float:
    """(d/dx)^p (d/dv)^q Psi at a single point (x, v)."""
    if p not in (0, 1, 2, 3):
        raise ValueError("p must be in 0..3")
    if q < 0 or int(q) != q:
        raise ValueError("q must be a nonnegative integer")
    _check_v(v, alpha)
    x = float(x)
    lo, hi = table.support
    if x <= lo:
        return 0.0
    h = quad.cell_width
    gd, gw, xi, w = quad.nodes()
    total = 0.0
    if x - h < hi:
        s = x - gd
        total += float(np.sum(gw * _kernel_weights(gd, v, alpha, q) * eval_psi_wavelet(table, s, p)))
    m_lo = max(1, int(math.floor((x - hi) / h)))
    m_hi = int(math.ceil((x - lo) / h))
    if m_hi >= m_lo:
        m = np.arange(m_lo, m_hi + 1)
        d = ((m[:, None] + xi[None, :]) * h).ravel()
        wt = np.tile(w * h, m.shape[0])
        total += float(np.sum(wt * _kernel_weights(d, v, alpha, q) * eval_psi_wavelet(table, x - d, p)))
    return total


def compute_psi(x, v, table: WaveletTable, alpha, quad: QuadConfig = QuadConfig()) -> float:
    """Psi(x, v); exactly 0 when x is left of the wavelet support."""
    return compute_psi_derivative(x, v, 0, 0, table, alpha, quad)


def _grid_values(n, v_grid, p, q, table, alpha, quad):
    """Psi derivative at x = n * h for integer array n (n ascending, contiguous)."""
    h = quad.cell_width
    gd, gw, xi, w = quad.nodes()
    lo, hi = table.support
    x = n * h
    # uniform cells: x = n h, s = (n - m - xi) h.  P_g[c] = psi((c - xi_g) h)
    c_max = int(math.ceil((hi - lo) / h)) + 1
    c = np.arange(c_max + 1)
    n_hi = int(n[-1])
    m = np.arange(n_hi + 1)
    out = np.zeros((len(v_grid), n.shape[0]))
    psi_cols = [eval_psi_wavelet(table, lo + (c - xg) * h, p) for xg in xi]
    graded_psi = eval_psi_wavelet(table, x[None, :] - gd[:, None], p)
    pos = n >= 1
    for iv, v in enumerate(v_grid):
        acc = np.zeros(n.shape[0])
        for g, xg in enumerate(xi):
            kern = w[g] * h * _kernel_weights((m + xg) * h, v, alpha, q)
            kern[0] = 0.0
            conv = np.convolve(kern, psi_cols[g])[: n_hi + 1]
            idx = n[pos] - int(round(lo / h))
            acc[pos] += conv[idx]
        acc += (gw * _kernel_weights(gd, v, alpha, q)) @ graded_psi
        acc[x <= lo] = 0.0
        out[iv] = acc
    return out


@dataclass(frozen=True)
class PsiTable:
    """Psi and selected derivatives on a uniform (v, x) grid."""

    alpha: float
    x_grid: np.ndarray
    v_grid: np.ndarray
    values: dict
    quad: QuadConfig
    x_zero: float
    localization: dict = field(default_factory=dict)

    def __post_init__(self):
        a, b = self.v_grid[0], self.v_grid[-1]
        if not (a > 1.0 / self.alpha and b < 1.0):
            raise DomainError("table v-range must lie inside (1/alpha, 1)")

    @property
    def x_min(self):
        return float(self.x_grid[0])

    @property
    def x_max(self):
        return float(self.x_grid[-1])

    @property
    def hx(self):
        return float(self.x_grid[1] - self.x_grid[0])

    @property
    def hv(self):
        return float(self.v_grid[1] - self.v_grid[0])

    @property
    def v_range(self):
        return float(self.v_grid[0]), float(self.v_grid[-1])

    def __call__(self, x, v, p=0, q=0):
        """Bicubic interpolation; exact 0 for x <= left support end or x >= x_max."""
        arr = self.values[(p, q)]
        xs, vs = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(v, dtype=float))
        lo, hi = self.v_range
        if np.any(vs < lo - 1e-12) or np.any(vs > hi + 1e-12):
            raise DomainError(f"v outside table range [{lo}, {hi}]")
        out = np.empty(xs.size)
        _kernels.interp2d(arr, self.x_min, self.hx, self.x_zero, self.x_max,
                          lo, self.hv, np.ascontiguousarray(xs.ravel()),
                          np.ascontiguousarray(vs.ravel()), out)
        out = out.reshape(xs.shape)
        return float(out) if out.ndim == 0 else out


def default_x_max(table: WaveletTable, alpha, v_range, quad=QuadConfig(), ratio=1e-4):
    """Smallest x_max with (3 + x_max)^-2 < ratio * peak |Psi|."""
    h = quad.cell_width
    n = np.arange(0, int(round(2 * table.support[1] / h)) + 1)
    vals = _grid_values(n, np.array(v_range), 0, 0, table, alpha, quad)
    peak = float(np.max(np.abs(vals)))
    return float(math.ceil(1.0 / math.sqrt(ratio * peak) - 3.0))


def tabulate_psi(table: WaveletTable, alpha, v_range, n_v=26, x_max=None,
                 derivatives=((0, 0),), quad: QuadConfig = QuadConfig(), pad=4) -> PsiTable:
    """Tabulate Psi (and requested (p, q) derivatives) for fast bicubic evaluation.

    x nodes are multiples of the quadrature cell width from ``-pad`` cells left
    of the support up to ``x_max``; v nodes split ``v_range`` uniformly.
    """
    a, b = v_range
    _check_v([a, b], alpha)
    if n_v < 4:
        raise ValueError("need at least 4 v nodes for cubic interpolation")
    for p, q in derivatives:
        if p not in (0, 1, 2, 3) or q < 0:
            raise ValueError(f"unsupported derivative pair {(p, q)}")
    if x_max is None:
        x_max = default_x_max(table, alpha, v_range, quad)
    h = quad.cell_width
    lo = table.support[0]
    n0 = int(round(lo / h)) - pad
    n1 = int(math.ceil(x_max / h))
    n = np.arange(n0, n1 + 1)
    v_grid = np.linspace(a, b, n_v)
    values = {}
    for p, q in derivatives:
        values[(p, q)] = _grid_values(n, v_grid, p, q, table, alpha, quad)
    psi_table = PsiTable(alpha=alpha, x_grid=n * h, v_grid=v_grid, values=values, quad=quad,
                         x_zero=lo)
    psi_table.localization.update(_localization_constants(psi_table))
    return psi_table


def _localization_constants(psi_table):
    out = {}
    weight = (3.0 + np.abs(psi_table.x_grid)) ** 2
    for key, arr in psi_table.values.items():
        weighted = np.abs(arr) * weight[None, :]
        iv, ix = np.unravel_index(np.argmax(weighted), weighted.shape)
        out[key] = {"sup_value": float(weighted[iv, ix]), "argmax_x": float(psi_table.x_grid[ix]),
                    "argmax_v": float(psi_table.v_grid[iv]), "sup_abs": float(np.max(np.abs(arr)))}
    return out


@dataclass
class LocalizationReport:
    p: int
    q: int
    sup_value: float
    argmax_x: float
    boundary_flag: bool

    def to_dict(self):
        return {"p": self.p, "q": self.q, "sup_value": self.sup_value,
                "argmax_x": self.argmax_x, "boundary_flag": self.boundary_flag}


def verify_localization(psi_table: PsiTable, raise_on_boundary=True, edge_nodes=2):
    """sup over the table of (3 + |x|)^2 |d_x^p d_v^q Psi| for every stored (p, q).

    A sup attained within ``edge_nodes`` of either end of the x-range means the
    range is too narrow to conclude; that raises InconclusiveRangeError unless
    ``raise_on_boundary`` is False, in which case the flag is set in the report.
    """
    reports = []
    x = psi_table.x_grid
    weight = (3.0 + np.abs(x)) ** 2
    for (p, q), arr in sorted(psi_table.values.items()):
        weighted = np.max(np.abs(arr) * weight[None, :], axis=0)
        ix = int(np.argmax(weighted))
        flag = ix < edge_nodes or ix >= len(x) - edge_nodes
        reports.append(LocalizationReport(p, q, float(weighted[ix]), float(x[ix]), bool(flag)))
        if flag and raise_on_boundary:
            raise InconclusiveRangeError(
                f"weighted sup for (p, q) = {(p, q)} sits at x = {x[ix]:.4g} on the edge of "
                f"[{x[0]:.4g}, {x[-1]:.4g}]; widen the x-range")
    return reports


def save_psi_table(psi_table: PsiTable, csv_path, json_path, provenance=None):
    """CSV rows ``x,v,p,q,value`` plus JSON metadata."""
    from .io import write_csv, write_json

    xs, vs, ps, qs, vals = [], [], [], [], []
    for (p, q), arr in sorted(psi_table.values.items()):
        vv, xx = np.meshgrid(psi_table.v_grid, psi_table.x_grid, indexing="ij")
        xs.append(xx.ravel())
        vs.append(vv.ravel())
        ps.append(np.full(arr.size, p, dtype=np.int64))
        qs.append(np.full(arr.size, q, dtype=np.int64))
        vals.append(arr.ravel())
    write_csv(csv_path, ["x", "v", "p", "q", "value"],
              [np.concatenate(xs), np.concatenate(vs), np.concatenate(ps), np.concatenate(qs),
               np.concatenate(vals)])
    meta = {"alpha": psi_table.alpha, "x_range": [psi_table.x_min, psi_table.x_max],
            "hx": psi_table.hx, "v_range": list(psi_table.v_range), "n_v": len(psi_table.v_grid),
            "quad": psi_table.quad.__dict__, "localization": {
                f"{p},{q}": v for (p, q), v in psi_table.localization.items()}}
    if provenance:
        meta["provenance"] = provenance
    write_json(json_path, meta)
