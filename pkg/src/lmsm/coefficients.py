"""Wavelet coefficients eps_{j,k} = 2^{j/alpha} int psi(2^j s - k) dZ(s) of one Levy path.

Level j is always computed on the path coarsened to step ``2**-(j + r)``
(``r`` = oversampling), so psi is sampled at the dyadic nodes ``m 2**-r`` and
each coefficient is one compensated dot product.  Two routes are offered:

* direct: the step-function integral sum_m psi(m 2^-r) dZ_m;
* ibp: the integration-by-parts form -2^-r sum_m psi'(m 2^-r) Z_m (levels j >= 0;
  negative levels fall back to the direct route).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .stable import (LevyPathGrid, LevyPyramid, RandomStream, StableParams, SupportError,
                     coarsen_path, simulate_levy_pyramid)
from .wavelet import WaveletTable

DEFAULT_OVERSAMPLING = 4


class RefinementError(ValueError):
    """The path grid is too coarse for the requested wavelet levels."""

    def __init__(self, message, min_step):
        super().__init__(message)
        self.min_step = min_step


class ContractError(ValueError):
    """Empty window, empty eligible index set, or similar misuse."""


@dataclass(frozen=True)
class CoefficientWindow:
    """Levels ``j_min..j_max`` and, per level, ``k`` in ``[-K_j - padding, K_j + padding]``
    with ``K_j = ceil(2^j * 2 (M + 1))``."""

    j_min: int
    j_max: int
    M: float = 1.0
    padding: int = 240
    method: str = "direct"
    oversampling: int = DEFAULT_OVERSAMPLING

    def __post_init__(self):
        if self.j_min > self.j_max:
            raise ContractError(f"empty window: j_min={self.j_min} > j_max={self.j_max}")
        if not self.M > 0:
            raise ValueError("M must be positive")
        if self.padding < 0:
            raise ValueError("padding must be nonnegative")
        if self.method not in ("direct", "ibp"):
            raise ValueError(f"method must be 'direct' or 'ibp', got {self.method!r}")
        if self.oversampling < 0:
            raise ValueError("oversampling must be nonnegative")

    @property
    def levels(self):
        return list(range(self.j_min, self.j_max + 1))

    def k_range(self, j):
        half = int(math.ceil(2.0 ** j * 2.0 * (self.M + 1.0)))
        return -half - self.padding, half + self.padding

    def span(self, j, width):
        """s-interval holding the support of every psi(2^j s - k) in level j."""
        k0, k1 = self.k_range(j)
        return k0 * 2.0 ** -j, (k1 + width) * 2.0 ** -j

    def n_coefficients(self):
        return sum(self.k_range(j)[1] - self.k_range(j)[0] + 1 for j in self.levels)

    def to_dict(self):
        return {"j_min": self.j_min, "j_max": self.j_max, "M": self.M, "padding": self.padding,
                "method": self.method, "oversampling": self.oversampling}


def simulate_window_path(params: StableParams, window: CoefficientWindow, width, stream: RandomStream,
                         path_level=None, max_points=1 << 27) -> LevyPyramid:
    """Levy pyramid serving every level of ``window``.

    ``path_level`` fixes the finest step ``2**-path_level``.  Levels above
    ``window.j_max`` are still simulated (with their own spans), so two windows
    that share ``path_level``, ``M`` and ``padding`` see the same realization on
    their common levels.
    """
    r = window.oversampling
    if path_level is None:
        path_level = window.j_max + r
    j_top = path_level - r
    if j_top < window.j_max:
        raise RefinementError(f"path step 2^-{path_level} cannot serve level {window.j_max} "
                              f"with oversampling {r}", 2.0 ** -(window.j_max + r))
    spans = {j: window.span(j, width) for j in range(window.j_min, j_top + 1)}
    return simulate_levy_pyramid(params, spans, r, stream, max_points=max_points)


def _level_path(source, j, r):
    step = 2.0 ** -(j + r)
    if isinstance(source, LevyPyramid):
        if source.oversampling != r:
            raise ValueError(f"pyramid oversampling {source.oversampling} != window's {r}")
        if j not in source.paths:
            raise RefinementError(f"pyramid has no level {j}", step)
        return source.paths[j]
    ratio = step / source.step
    factor = int(round(ratio))
    if factor < 1 or abs(ratio - factor) > 1e-9 * ratio:
        raise RefinementError(f"path step {source.step:g} does not divide the level-{j} step "
                              f"{step:g}; need a dyadic step <= {step:g}", step)
    return source if factor == 1 else coarsen_path(source, factor)


def _source_params(source):
    return source.params


def _source_provenance(source):
    if isinstance(source, LevyPyramid):
        fine = source.paths[max(source.paths)]
        out = {"alpha": source.params.alpha, "scale": source.params.scale, "step": fine.step,
               "oversampling": source.oversampling, "pyramid_levels": [min(source.paths),
                                                                      max(source.paths)]}
        out.update(source.stream.to_dict())
        return out
    return source.provenance()


def _check_resolution(source, window, wavelet):
    """Finest step must be <= 2^-j_max * width / 64."""
    if isinstance(source, LevyPyramid):
        step = 2.0 ** -(max(source.paths) + source.oversampling)
    else:
        step = source.step
    limit = 2.0 ** -window.j_max * wavelet.width / 64.0
    if step > limit:
        raise RefinementError(f"path step {step:g} exceeds 2^-j_max * width / 64 = {limit:g}",
                              limit)


def _level_starts(path, j, r, k0, k1, n_taps, n_data):
    n_lo = int(round(path.s_min / path.step))
    ks = np.arange(k0, k1 + 1, dtype=np.int64)
    starts = ks * (1 << r) - n_lo
    if starts[0] < 0 or starts[-1] + n_taps > n_data:
        raise SupportError(f"level {j}: wavelet supports for k in [{k0}, {k1}] leave the path "
                           f"span [{path.s_min:g}, {path.s_max:g}]")
    return starts


@dataclass(frozen=True)
class CoefficientTable:
    """Coefficients of every level of a window, stored flat.

    Level ``levels[i]`` holds k from ``kmins[i]`` in ``eps[offsets[i]:offsets[i+1]]``.
    """

    window: CoefficientWindow
    alpha: float
    levels: np.ndarray
    kmins: np.ndarray
    offsets: np.ndarray
    eps: np.ndarray
    provenance: dict = field(default_factory=dict)

    def level(self, j):
        i = int(np.searchsorted(self.levels, j))
        if i >= len(self.levels) or self.levels[i] != j:
            raise KeyError(f"level {j} not in table")
        vals = self.eps[self.offsets[i]:self.offsets[i + 1]]
        return np.arange(self.kmins[i], self.kmins[i] + len(vals)), vals

    def epsilon(self, j, k):
        ks, vals = self.level(j)
        if not ks[0] <= k <= ks[-1]:
            raise KeyError(f"k={k} outside level {j}")
        return float(vals[k - ks[0]])

    def index_arrays(self):
        """(j, k, eps) as aligned flat arrays."""
        js = np.repeat(self.levels, np.diff(self.offsets))
        ks = np.concatenate([np.arange(k0, k0 + n) for k0, n in
                             zip(self.kmins, np.diff(self.offsets))])
        return js, ks, self.eps

    def scaled(self, factor):
        return CoefficientTable(self.window, self.alpha, self.levels, self.kmins, self.offsets,
                                self.eps * factor, dict(self.provenance))


def _assemble(window, alpha, per_level, provenance):
    levels = np.array(sorted(per_level), dtype=np.int64)
    kmins = np.array([per_level[j][0] for j in levels], dtype=np.int64)
    sizes = [per_level[j][1].shape[0] for j in levels]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    eps = np.concatenate([per_level[j][1] for j in levels]) if sizes else np.zeros(0)
    return CoefficientTable(window, float(alpha), levels, kmins, offsets,
                            np.ascontiguousarray(eps), provenance)


def _direct(path, filt, j, r, k0, k1, alpha):
    dz = np.ascontiguousarray(path.increments())
    starts = _level_starts(path, j, r, k0, k1, filt.shape[0], dz.shape[0])
    out = np.empty(starts.shape[0])
    _kernels.strided_correlate(filt, dz, starts, out)
    return out * 2.0 ** (j / alpha)


def compute_coefficients_direct(source, wavelet: WaveletTable,
                                window: CoefficientWindow) -> CoefficientTable:
    """eps_{j,k} = 2^{j/alpha} * integrate_step(psi(2^j . - k), path) over the window.

    ``source`` is a LevyPathGrid (coarsened per level) or a LevyPyramid.
    """
    _check_resolution(source, window, wavelet)
    r = window.oversampling
    alpha = _source_params(source).alpha
    filt = np.ascontiguousarray(wavelet.node_values(0, r)[1:-1])
    per_level = {}
    for j in window.levels:
        path = _level_path(source, j, r)
        k0, k1 = window.k_range(j)
        per_level[j] = (k0, _direct(path, filt, j, r, k0, k1, alpha))
    prov = {"method": "direct", "window": window.to_dict(), "path": _source_provenance(source),
            "wavelet_order": wavelet.order}
    return _assemble(window, alpha, per_level, prov)


def compute_coefficients_ibp(source, wavelet: WaveletTable,
                             window: CoefficientWindow) -> CoefficientTable:
    """eps_{j,k} = -2^{j/alpha} int psi'(u) Z((u + k) 2^-j) du (left-point rule, j >= 0).

    Levels j < 0 use the direct route; the table records which levels did.
    """
    _check_resolution(source, window, wavelet)
    r = window.oversampling
    alpha = _source_params(source).alpha
    dfilt = np.ascontiguousarray(wavelet.node_values(1, r))
    filt = np.ascontiguousarray(wavelet.node_values(0, r)[1:-1])
    per_level = {}
    direct_levels = []
    for j in window.levels:
        path = _level_path(source, j, r)
        k0, k1 = window.k_range(j)
        if j < 0:
            per_level[j] = (k0, _direct(path, filt, j, r, k0, k1, alpha))
            direct_levels.append(j)
            continue
        starts = _level_starts(path, j, r, k0, k1, dfilt.shape[0], path.n_points)
        out = np.empty(starts.shape[0])
        _kernels.strided_correlate(dfilt, path.values, starts, out)
        per_level[j] = (k0, out * (-(2.0 ** (j / alpha)) * 2.0 ** -r))
    prov = {"method": "ibp", "direct_levels": direct_levels, "window": window.to_dict(),
            "path": _source_provenance(source), "wavelet_order": wavelet.order}
    return _assemble(window, alpha, per_level, prov)


def compute_coefficients(source, wavelet, window):
    if window.method == "ibp":
        return compute_coefficients_ibp(source, wavelet, window)
    return compute_coefficients_direct(source, wavelet, window)


def route_discrepancy(direct: CoefficientTable, ibp: CoefficientTable, j_lo=0):
    """max |direct - ibp| over levels j >= j_lo, with its (j, k)."""
    js, ks, a = direct.index_arrays()
    _, _, b = ibp.index_arrays()
    sel = js >= j_lo
    if not np.any(sel):
        raise ContractError("no levels to compare")
    d = np.abs(a - b)
    d[~sel] = -1.0
    i = int(np.argmax(d))
    return {"max_abs": float(d[i]), "argmax_j": int(js[i]), "argmax_k": int(ks[i]),
            "median_abs": float(np.median(d[sel]))}


# ---------------------------------------------------------------------------
# growth bounds


@dataclass
class BoundFitReport:
    kind: str
    parameter: float
    C_fit: float
    argmax_j: int
    argmax_k: int
    histogram_counts: list
    histogram_bins: list
    n_terms: int

    def to_dict(self):
        return {"kind": self.kind, "eta_or_l": self.parameter, "C_fit": self.C_fit,
                "argmax_j": self.argmax_j, "argmax_k": self.argmax_k,
                "histogram_counts": self.histogram_counts,
                "histogram_bins": self.histogram_bins, "n_terms": self.n_terms}


def _fit(kind, parameter, ratios, js, ks, bins=20):
    i = int(np.argmax(ratios))
    hi = float(ratios[i])
    counts, edges = np.histogram(ratios, bins=bins, range=(0.0, hi if hi > 0 else 1.0))
    return BoundFitReport(kind, float(parameter), hi, int(js[i]), int(ks[i]),
                          counts.tolist(), edges.tolist(), int(ratios.shape[0]))


def check_bound_omega0(table: CoefficientTable, eta) -> BoundFitReport:
    """C_fit = max |eps_{j,k}| / [(3 + |j|)(3 + |k|)]^{1/alpha + eta}."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    js, ks, eps = table.index_arrays()
    if eps.shape[0] == 0:
        raise ContractError("empty coefficient table")
    expo = 1.0 / table.alpha + eta
    ratios = np.abs(eps) / ((3.0 + np.abs(js)) * (3.0 + np.abs(ks))) ** expo
    return _fit("omega0", eta, ratios, js, ks)


def check_bound_omega1(table: CoefficientTable, l) -> BoundFitReport:
    """C'_fit = max over j >= 0, |k| 2^-j <= l of |eps_{j,k}| 2^{-j/alpha}."""
    if not l > 0:
        raise ValueError("l must be positive")
    js, ks, eps = table.index_arrays()
    sel = (js >= 0) & (np.abs(ks) * 2.0 ** -js.astype(float) <= l)
    if not np.any(sel):
        raise ContractError("no coefficient with j >= 0 and |k| 2^-j <= l")
    js, ks = js[sel], ks[sel]
    ratios = np.abs(eps[sel]) * 2.0 ** (-js / table.alpha)
    return _fit("omega1", l, ratios, js, ks)


# ---------------------------------------------------------------------------
# serialisation


def save_coefficients(table: CoefficientTable, csv_path, json_path, provenance=None):
    from .io import write_csv, write_json

    js, ks, eps = table.index_arrays()
    write_csv(csv_path, ["j", "k", "epsilon"], [js, ks, eps])
    meta = {"alpha": table.alpha, "window": table.window.to_dict(),
            "provenance": provenance or table.provenance}
    write_json(json_path, meta)


def load_coefficients(csv_path, json_path) -> CoefficientTable:
    import json

    from .io import read_csv

    _, data = read_csv(csv_path)
    with open(json_path) as fh:
        meta = json.load(fh)
    window = CoefficientWindow(**meta["window"])
    js = data[:, 0].astype(np.int64)
    ks = data[:, 1].astype(np.int64)
    per_level = {}
    for j in np.unique(js):
        sel = js == j
        per_level[int(j)] = (int(ks[sel][0]), np.ascontiguousarray(data[sel, 2]))
    return _assemble(window, meta["alpha"], per_level, meta.get("provenance", {}))
