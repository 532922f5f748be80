"""Symmetric alpha-stable randomness: variates, Levy motion on grids, step integrals.

Conventions
-----------
* ``sample_sas`` draws SaS(alpha, scale) with characteristic function
  ``exp(-|scale * t|**alpha)`` via the Chambers-Mallows-Stuck transform.
* A ``LevyPathGrid`` stores Z(s_i) at s_i = s_min + i * step with Z(0) = 0 exactly.
  Cell i is (s_i, s_{i+1}]; its increment Z(s_{i+1}) - Z(s_i) is SaS with scale
  ``scale * step**(1/alpha)``.
* Step integrals pair f at the right end of each cell.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from . import _kernels

CHUNK_CELLS = 1 << 12
DEFAULT_MAX_POINTS = 1 << 27


class ResourceError(MemoryError):
    """Requested grid exceeds the configured memory budget."""


class GridAlignmentError(ValueError):
    """Samples do not line up with the nodes of a path grid."""


class SupportError(ValueError):
    """An integrand's support leaves the simulated span."""


@dataclass(frozen=True)
class StableParams:
    alpha: float
    scale: float = 1.0

    def __post_init__(self):
        a = float(self.alpha)
        if not (1.0 < a < 2.0):
            raise ValueError(f"alpha must lie in the open interval (1, 2), got {self.alpha}")
        if not (self.scale >= 0.0) or not math.isfinite(self.scale):
            raise ValueError(f"scale must be a finite nonnegative number, got {self.scale}")


@dataclass(frozen=True)
class RandomStream:
    """Counter-based stream keyed by (master_seed, substream_path).

    Backed by Philox seeded from ``SeedSequence(master_seed, spawn_key=path)``,
    so sibling paths give independent streams and replays are bit-exact.
    """

    master_seed: int
    substream_path: tuple = ()

    def __post_init__(self):
        if not (0 <= int(self.master_seed) < 2**64):
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        path = tuple(int(p) for p in self.substream_path)
        if any(p < 0 for p in path):
            raise ValueError("substream indices must be nonnegative")
        object.__setattr__(self, "substream_path", path)

    def child(self, *idx) -> "RandomStream":
        return RandomStream(self.master_seed, self.substream_path + tuple(int(i) for i in idx))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.master_seed), spawn_key=self.substream_path)
        return np.random.Generator(np.random.Philox(ss))

    def to_dict(self):
        return {"seed": int(self.master_seed), "substream_path": list(self.substream_path)}


def _cms_standard(alpha, gen, n):
    v = gen.uniform(-np.pi / 2, np.pi / 2, size=n)
    w = gen.standard_exponential(size=n)
    av = alpha * v
    return (np.sin(av) / np.cos(v) ** (1.0 / alpha)
            * (np.cos(v - av) / w) ** ((1.0 - alpha) / alpha))


def sample_sas(params: StableParams, n: int, stream: RandomStream) -> np.ndarray:
    """n i.i.d. SaS(alpha, scale) variates (Chambers-Mallows-Stuck)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if params.scale == 0.0:
        return np.zeros(n)
    x = _cms_standard(params.alpha, stream.generator(), n)
    return params.scale * x


# ---------------------------------------------------------------------------
# distribution function by characteristic-function inversion


def sas_cdf(x, alpha):
    """CDF of the standard SaS law, F(x) = 1/2 + (1/pi) int_0^inf sin(tx) exp(-t^alpha) / t dt."""
    x = float(x)
    if x == 0.0:
        return 0.5
    val, _ = integrate.quad(lambda t: math.exp(-t**alpha) * math.sin(t * abs(x)) / t,
                            0, np.inf, limit=500)
    f = 0.5 + val / math.pi
    return f if x > 0 else 1.0 - f


@lru_cache(maxsize=256)
def sas_quantile(p, alpha):
    """Quantile of the standard SaS law (numerical inversion of ``sas_cdf``)."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return -sas_quantile(1.0 - p, alpha)
    hi = 1.0
    while sas_cdf(hi, alpha) < p:
        hi *= 2.0
    return optimize.brentq(lambda x: sas_cdf(x, alpha) - p, 0.0, hi, xtol=1e-13)


def quantile_scale(samples, alpha, probs=(0.25, 0.75)):
    """Scale estimate from the spread between two quantiles of the sample."""
    lo, hi = probs
    q = np.quantile(np.asarray(samples), [lo, hi])
    ref = sas_quantile(hi, alpha) - sas_quantile(lo, alpha)
    return float((q[1] - q[0]) / ref)


@dataclass
class QuantileTestResult:
    distance: float
    threshold: float
    passed: bool
    probs: list
    n_boot: int
    level: float

    def to_dict(self):
        return dict(self.__dict__)


def _flat(groups, idx):
    return np.concatenate([groups[i] for i in idx])


def quantile_distance_test(sample, reference, probs=tuple(np.linspace(0.05, 0.95, 19)),
                           n_boot=500, level=0.99, seed=0) -> QuantileTestResult:
    """Two-sample quantile distance with a bootstrap threshold.

    The distance is max_p |q_p(sample) - q_p(reference)| divided by the
    reference interquartile range.  ``sample`` may be a list of arrays, one per
    independent cluster (e.g. all coefficients of one path); the bootstrap then
    resamples whole clusters, which keeps within-path dependence intact.  The
    threshold is the ``level`` quantile of the recentred bootstrap distance.
    """
    groups = [np.asarray(g, float).ravel() for g in sample] if isinstance(sample, (list, tuple)) \
        else [np.asarray(x, float).reshape(1) for x in np.asarray(sample, float).ravel()]
    ref = np.asarray(reference, float).ravel()
    probs = np.asarray(probs, float)
    pooled = np.concatenate(groups)
    qs = np.quantile(pooled, probs)
    qr = np.quantile(ref, probs)
    iqr = float(np.subtract(*np.quantile(ref, [0.75, 0.25])))
    if not iqr > 0:
        raise ValueError("reference sample has zero interquartile range")
    dist = float(np.max(np.abs(qs - qr)) / iqr)
    rng = np.random.default_rng(seed)
    stats = np.empty(n_boot)
    single = all(g.shape[0] == 1 for g in groups)
    for b in range(n_boot):
        sel = rng.integers(0, len(groups), len(groups))
        bs = pooled[sel] if single else _flat(groups, sel)
        br = ref[rng.integers(0, ref.shape[0], ref.shape[0])]
        d = (np.quantile(bs, probs) - qs) - (np.quantile(br, probs) - qr)
        stats[b] = np.max(np.abs(d)) / iqr
    thr = float(np.quantile(stats, level))
    return QuantileTestResult(dist, thr, dist <= thr, probs.tolist(), int(n_boot), float(level))


# ---------------------------------------------------------------------------
# Levy motion on a grid


@dataclass(frozen=True)
class LevyPathGrid:
    """Levy SaS motion sampled on a uniform grid containing 0."""

    s_min: float
    step: float
    values: np.ndarray
    params: StableParams
    stream: RandomStream | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def n_points(self):
        return self.values.shape[0]

    @property
    def zero_index(self):
        return int(round(-self.s_min / self.step))

    @property
    def s_max(self):
        return self.s_min + (self.n_points - 1) * self.step

    @property
    def s(self):
        return (np.arange(self.n_points) - self.zero_index) * self.step

    def increments(self):
        return np.diff(self.values)

    def index_of(self, s, tol=1e-9):
        """Grid index of s; raises GridAlignmentError if s is not a node."""
        pos = (np.asarray(s, dtype=float) - self.s_min) / self.step
        idx = np.rint(pos)
        if np.any(np.abs(pos - idx) > tol) or np.any(idx < 0) or np.any(idx >= self.n_points):
            raise GridAlignmentError(f"point(s) {s} are not nodes of the path grid")
        return idx.astype(np.int64)

    def left_limit_lookup(self, s):
        """Z at arbitrary s using the right-continuous piecewise-constant path."""
        pos = np.floor((np.asarray(s, dtype=float) - self.s_min) / self.step + 1e-12)
        if np.any(pos < 0) or np.any(pos >= self.n_points):
            raise SupportError("lookup outside the simulated span")
        return self.values[pos.astype(np.int64)]

    def provenance(self):
        out = {"alpha": self.params.alpha, "scale": self.params.scale, "step": self.step}
        if self.stream is not None:
            out.update(self.stream.to_dict())
        return out


def _zigzag(c):
    return 2 * c if c >= 0 else -2 * c - 1


def _cell_increments(params, stream, step, i_lo, i_hi):
    """Increments of cells i_lo..i_hi-1 (cell i = (i*step, (i+1)*step]).

    Cells are drawn in fixed chunks keyed by chunk index, so the value of a
    cell never depends on the requested range.
    """
    out = np.empty(i_hi - i_lo)
    cell_scale = params.scale * step ** (1.0 / params.alpha)
    c_lo = i_lo // CHUNK_CELLS
    c_hi = (i_hi - 1) // CHUNK_CELLS
    for c in range(c_lo, c_hi + 1):
        draws = _cms_standard(params.alpha, stream.child(_zigzag(c)).generator(), CHUNK_CELLS)
        a = max(i_lo, c * CHUNK_CELLS)
        b = min(i_hi, (c + 1) * CHUNK_CELLS)
        out[a - i_lo:b - i_lo] = draws[a - c * CHUNK_CELLS:b - c * CHUNK_CELLS]
    return out * cell_scale


def _values_from_increments(inc, n_neg):
    """Node values with Z = 0 at node n_neg; inc[i] is the cell right of node i."""
    n = inc.shape[0] + 1
    vals = np.zeros(n)
    if n_neg < n - 1:
        vals[n_neg + 1:] = np.cumsum(inc[n_neg:])
    if n_neg > 0:
        vals[:n_neg] = -np.cumsum(inc[:n_neg][::-1])[::-1]
    return vals


def simulate_levy_path(params: StableParams, s_min, s_max, step, stream: RandomStream,
                       max_points=DEFAULT_MAX_POINTS) -> LevyPathGrid:
    """Levy SaS motion on a uniform grid with Z(0) = 0.

    ``s_min`` is moved down (and ``s_max`` up) to the nearest grid node so that
    0 is a node; the adjustment is recorded in ``metadata``.
    """
    if not (s_min < 0 < s_max):
        raise ValueError("need s_min < 0 < s_max")
    if not step > 0:
        raise ValueError("step must be positive")
    n_neg = int(math.ceil(-s_min / step - 1e-9))
    n_pos = int(math.ceil(s_max / step - 1e-9))
    n_points = n_neg + n_pos + 1
    if n_points > max_points:
        raise ResourceError(f"grid needs {n_points} points, budget is {max_points}")
    inc = _cell_increments(params, stream, step, -n_neg, n_pos)
    vals = _values_from_increments(inc, n_neg)
    meta = {"requested_s_min": float(s_min), "requested_s_max": float(s_max),
            "s_min_adjustment": float(-n_neg * step - s_min)}
    return LevyPathGrid(s_min=-n_neg * step, step=float(step), values=vals, params=params,
                        stream=stream, metadata=meta)


def coarsen_path(path: LevyPathGrid, factor: int) -> LevyPathGrid:
    """Subsample a path by an integer factor (the coarse increments are sums of fine ones)."""
    z = path.zero_index
    lo = z % factor
    vals = path.values[lo::factor]
    n = (path.n_points - 1 - lo) // factor + 1
    vals = np.ascontiguousarray(vals[:n])
    return LevyPathGrid(s_min=path.s_min + lo * path.step, step=path.step * factor,
                        values=vals, params=path.params, stream=path.stream,
                        metadata={"coarsened_from_step": path.step, "factor": factor})


@dataclass(frozen=True)
class LevyPyramid:
    """Nested dyadic family of Levy paths, one per wavelet level.

    Level j has step ``2**-(j + oversampling)``.  Inside the span of level j+1
    its increments are sums of level j+1 increments; outside, they are fresh
    draws.  All levels are therefore samples of one Levy motion.
    """

    params: StableParams
    stream: RandomStream
    oversampling: int
    paths: dict

    def path_for_level(self, j):
        return self.paths[j]

    @property
    def levels(self):
        return sorted(self.paths)

    def total_points(self):
        return sum(p.n_points for p in self.paths.values())


def simulate_levy_pyramid(params: StableParams, spans: dict, oversampling: int,
                          stream: RandomStream, max_points=DEFAULT_MAX_POINTS) -> LevyPyramid:
    """Build a LevyPyramid covering ``spans[j] = (s_lo, s_hi)`` for each level j."""
    levels = sorted(spans, reverse=True)
    if levels != list(range(levels[0], levels[-1] - 1, -1)):
        raise ValueError("pyramid levels must be consecutive integers")
    # hull with finer spans, then align outward to the next coarser step
    hull = {}
    lo, hi = 0.0, 0.0
    for j in levels:
        lo = min(lo, spans[j][0])
        hi = max(hi, spans[j][1])
        coarse = 2.0 ** -(j - 1 + oversampling)
        hull[j] = (math.floor(lo / coarse) * coarse, math.ceil(hi / coarse) * coarse)
        lo, hi = hull[j]
    total = 0
    for j in levels:
        step = 2.0 ** -(j + oversampling)
        total += int(round((hull[j][1] - hull[j][0]) / step)) + 1
    if total > max_points:
        raise ResourceError(f"pyramid needs {total} points, budget is {max_points}")

    paths = {}
    prev_inc = None
    prev_range = None
    for idx, j in enumerate(levels):
        step = 2.0 ** -(j + oversampling)
        i_lo = int(round(hull[j][0] / step))
        i_hi = int(round(hull[j][1] / step))
        level_stream = stream.child(_zigzag(j))
        inc = _cell_increments(params, level_stream, step, i_lo, i_hi)
        if prev_inc is not None:
            f_lo, f_hi = prev_range
            # fine cells [f_lo, f_hi) -> coarse cells [f_lo//2, f_hi//2)
            agg = prev_inc[0::2] + prev_inc[1::2]
            c_lo = f_lo // 2
            inc[c_lo - i_lo:c_lo - i_lo + agg.shape[0]] = agg
        vals = _values_from_increments(inc, -i_lo)
        paths[j] = LevyPathGrid(s_min=i_lo * step, step=step, values=vals, params=params,
                                stream=level_stream, metadata={"level": j})
        prev_inc, prev_range = inc, (i_lo, i_hi)
    return LevyPyramid(params=params, stream=stream, oversampling=oversampling, paths=paths)


# ---------------------------------------------------------------------------
# integrals against the path


def integrate_step(f_values, path: LevyPathGrid, s_start=None) -> float:
    """sum_i f(s_{i+1}) (Z(s_{i+1}) - Z(s_i)) over the nodes covered by ``f_values``.

    ``f_values[i]`` is f at node ``s_start + i * step``; ``s_start`` defaults to
    the first node of the path.
    """
    f = np.ascontiguousarray(f_values, dtype=np.float64)
    start = 0 if s_start is None else int(path.index_of(s_start))
    stop = start + f.shape[0]
    if f.ndim != 1 or stop > path.n_points:
        raise GridAlignmentError("f_values run past the end of the path grid")
    if f.shape[0] < 2:
        return 0.0
    dz = np.diff(path.values[start:stop])
    return float(_kernels.neumaier_dot(f[1:], dz))


def integrate_by_parts(f, fprime, path: LevyPathGrid, support) -> float:
    """-int f'(s) Z(s) ds by a left-point Riemann sum over the path nodes.

    ``support = (a, b)`` must contain the support of f and lie inside the span;
    f and f' must vanish at both ends.
    """
    a, b = support
    if a < path.s_min - 1e-12 or b > path.s_max + 1e-12:
        raise SupportError(f"support [{a}, {b}] leaves the path span "
                           f"[{path.s_min}, {path.s_max}]")
    for end in (a, b):
        if abs(f(end)) > 1e-12 or abs(fprime(end)) > 1e-12:
            raise SupportError("f and f' must vanish at the support endpoints")
    i_lo = int(math.floor((a - path.s_min) / path.step + 1e-9))
    i_hi = int(math.ceil((b - path.s_min) / path.step - 1e-9))
    s = path.s_min + np.arange(i_lo, i_hi + 1) * path.step
    w = np.asarray(fprime(s), dtype=np.float64) * path.step
    return -float(_kernels.neumaier_dot(np.ascontiguousarray(w), path.values[i_lo:i_hi + 1]))


# ---------------------------------------------------------------------------
# serialisation


def save_levy_path(path: LevyPathGrid, csv_path, json_path):
    from .io import write_csv, write_json

    write_csv(csv_path, ["s", "z"], [path.s, path.values])
    write_json(json_path, path.provenance())


def load_levy_path(csv_path, json_path) -> LevyPathGrid:
    from .io import read_csv

    _, data = read_csv(csv_path)
    with open(json_path) as fh:
        meta = json.load(fh)
    stream = RandomStream(meta["seed"], tuple(meta.get("substream_path", ()))) if "seed" in meta else None
    return LevyPathGrid(s_min=float(data[0, 0]), step=float(meta["step"]),
                        values=np.ascontiguousarray(data[:, 1]),
                        params=StableParams(meta["alpha"], meta["scale"]), stream=stream)
