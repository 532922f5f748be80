"""Oscillation ratios, trend classification and scaling checks for sampled paths and fields.

Level L means the dyadic grid with spacing ``(b - a) 2**-L`` over the sample
interval.  For each level two sups are kept:

* ``sup_per_level``: over all pairs of the level grid (with a cap, see
  ``FULL_SCAN_CAP``).  Pair sets are nested, so this sequence never decreases.
* ``scale_sup_per_level``: over neighbouring nodes only, i.e. separation
  exactly one grid step.  These pair sets are disjoint across levels.

The trend (bounded / diverging) is read from the log-log slope of the
scale-resolved sups against the resolution ``2**L``, with a leave-one-level-out
jackknife band widened by an exponent tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

FULL_SCAN_CAP = 1 << 12
DEFAULT_Z = 1.96
DEFAULT_TOL = 0.01

CORRECTIONS = ("none", "log_power", "sqrt_log", "neg_log_power")


class TrendError(ValueError):
    """Fewer than the levels needed for a trend."""


class UndefinedExponentError(ValueError):
    """Constant input: no oscillation to regress."""


class ContractError(ValueError):
    pass


@dataclass(frozen=True)
class ModulusSpec:
    """|t - s|^gamma times an optional logarithmic correction c(|t - s|).

    log_power(beta):     (1 + |log d|)^beta
    sqrt_log:            (1 + |log d|)^(1/2)
    neg_log_power(eta):  (1 + |log d|)^(-eta)
    """

    gamma: float
    correction: str = "none"
    param: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.correction not in CORRECTIONS:
            raise ValueError(f"correction must be one of {CORRECTIONS}")
        if self.correction in ("log_power", "neg_log_power"):
            if self.param is None or not self.param > 0:
                raise ValueError(f"{self.correction} needs a positive parameter")

    def __call__(self, d):
        d = np.asarray(d, dtype=float)
        out = d ** self.gamma
        if self.correction == "none":
            return out
        lg = 1.0 + np.abs(np.log(d))
        if self.correction == "log_power":
            return out * lg ** self.param
        if self.correction == "sqrt_log":
            return out * np.sqrt(lg)
        return out * lg ** (-self.param)

    def to_dict(self):
        return {"gamma": self.gamma, "correction": self.correction, "param": self.param}


@dataclass
class HolderReport:
    modulus: dict
    levels: list
    sup_per_level: list
    argmax_pairs: list
    scale_sup_per_level: list
    slope: float
    band: tuple
    classification: str
    far_pair_sup: float = 0.0
    extra: dict = field(default_factory=dict)
    seeds_agreeing: dict | None = None

    def to_dict(self):
        out = {"modulus": self.modulus, "levels": self.levels,
               "sup_per_level": self.sup_per_level, "argmax_pairs": self.argmax_pairs,
               "scale_sup_per_level": self.scale_sup_per_level, "slope": self.slope,
               "band": list(self.band), "classification": self.classification,
               "far_pair_sup": self.far_pair_sup,
               "operationalization": "log-log slope of neighbour-pair sups vs resolution, "
                                     "jackknife band widened by an exponent tolerance"}
        out.update(self.extra)
        if self.seeds_agreeing is not None:
            out["seeds_agreeing"] = self.seeds_agreeing
        return out


# ---------------------------------------------------------------------------
# trend


def jackknife_slope(x, y):
    """OLS slope of y on x and its leave-one-out jackknife standard error."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n = x.shape[0]
    if n < 2:
        raise TrendError("need at least 2 levels for a trend")
    slope = float(np.polyfit(x, y, 1)[0])
    if n < 3:
        return slope, 0.0
    loo = np.array([np.polyfit(np.delete(x, i), np.delete(y, i), 1)[0] for i in range(n)])
    se = float(np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))
    return slope, se


def classify_trend(levels, sups, z=DEFAULT_Z, tol=DEFAULT_TOL, richardson=False):
    """(slope, band, label) for log sups against log resolution.

    band = slope -/+ (z * se + tol).  'diverging' if the band is strictly
    positive, 'bounded' if it contains 0 or lies below it.  All-zero sups are
    'bounded' with slope 0; non-finite or partly zero sups are 'inconclusive'.

    With ``richardson=True`` (consecutive levels only) the sups are first
    replaced by 2 s_L - s_(L-1), which removes the O(h) bias a difference
    quotient of a smooth function carries at step h.  Meant for Lipschitz
    scans; the first level is consumed.
    """
    sups = np.asarray(sups, float)
    levels = np.asarray(levels, float)
    if len(levels) < 2:
        raise TrendError("need at least 2 levels for a trend")
    if np.all(sups == 0.0):
        return 0.0, (-tol, tol), "bounded"
    if richardson:
        if len(levels) < 3 or np.any(np.diff(levels) != 1.0):
            raise TrendError("extrapolated trend needs at least 3 consecutive levels")
        sups = 2.0 * sups[1:] - sups[:-1]
        levels = levels[1:]
    if np.any(sups <= 0.0) or not np.all(np.isfinite(sups)):
        return float("nan"), (float("nan"), float("nan")), "inconclusive"
    x = levels * math.log(2.0)
    slope, se = jackknife_slope(x, np.log(sups))
    half = z * se + tol
    band = (slope - half, slope + half)
    return slope, band, ("diverging" if band[0] > 0.0 else "bounded")


def tally(reports):
    """Seed-wise tally of classifications; also stored on every report."""
    counts = {}
    for r in reports:
        counts[r.classification] = counts.get(r.classification, 0) + 1
    for r in reports:
        r.seeds_agreeing = {"tally": dict(counts), "n_seeds": len(reports),
                            "agreeing": counts.get(r.classification, 0)}
    return counts


# ---------------------------------------------------------------------------
# 1-D pair scans


def _scan_lags(y, h, lags, modulus, far):
    best, arg, far_best = 0.0, (0, 0), 0.0
    for m in lags:
        d = np.abs(y[m:] - y[:-m])
        i = int(np.argmax(d))
        sep = m * h
        r = float(d[i] / modulus(sep)) if d[i] > 0 else 0.0
        if sep > far:
            far_best = max(far_best, r)
        elif r > best:
            best, arg = r, (i, i + m)
    return best, arg, far_best


def pair_sup(y, h, modulus, far=1.0, cap=FULL_SCAN_CAP):
    """sup over pairs of a uniform sample of |y_i - y_k| / modulus(|i - k| h).

    Up to ``cap`` intervals every pair is visited.  Beyond that, all pairs of
    the sub-grid with ``cap`` intervals plus every pair at a power-of-two
    separation.  Pairs farther apart than ``far`` go to a separate sup.
    Returns (sup, (i, k), far_sup).
    """
    y = np.asarray(y, float)
    n = y.shape[0] - 1
    if n <= cap:
        return _scan_lags(y, h, range(1, n + 1), modulus, far)
    stride = int(math.ceil(n / cap))
    sub = y[::stride]
    b1, a1, f1 = _scan_lags(sub, h * stride, range(1, sub.shape[0]), modulus, far)
    a1 = (a1[0] * stride, a1[1] * stride)
    lags = [1 << e for e in range(int(math.log2(n)) + 1) if (1 << e) <= n]
    b2, a2, f2 = _scan_lags(y, h, lags, modulus, far)
    return (b1, a1, max(f1, f2)) if b1 >= b2 else (b2, a2, max(f1, f2))


def _as_series(samples, t=None):
    if hasattr(samples, "t_grid") and hasattr(samples, "y"):
        return np.asarray(samples.t_grid, float), np.asarray(samples.y, float)
    if isinstance(samples, tuple) and len(samples) == 2:
        return np.asarray(samples[0], float), np.asarray(samples[1], float)
    y = np.asarray(samples, float)
    if t is None:
        t = np.linspace(0.0, 1.0, y.shape[-1])
    return np.asarray(t, float), y


def _level_view(t, y, L):
    n = t.shape[0] - 1
    top = int(round(math.log2(n)))
    if 2 ** top != n:
        raise ContractError(f"sample needs 2^L + 1 points, got {n + 1}")
    if L > top:
        raise ContractError(f"level {L} finer than the sample (2^{top} intervals)")
    stride = 2 ** (top - L)
    return t[::stride], y[..., ::stride]


def _series_for_level(samples, L, t):
    if callable(samples) and not hasattr(samples, "t_grid"):
        tt, yy = samples(L)
        return np.asarray(tt, float), np.asarray(yy, float)
    tt, yy = _as_series(samples, t)
    return _level_view(tt, yy, L)


def holder_ratio_scan(samples, modulus: ModulusSpec, levels, t=None, far=1.0,
                      z=DEFAULT_Z, tol=DEFAULT_TOL) -> HolderReport:
    """Per level L: sup of |Y(t) - Y(s)| / modulus(|t - s|) over the 2^L grid.

    ``samples`` is an LmsmPath, a (t, y) pair or a y array on a uniform grid
    with 2^Lmax + 1 points, or a callable ``L -> (t, y)`` that re-synthesizes.
    """
    levels = sorted(int(L) for L in levels)
    if len(levels) < 2:
        raise TrendError("need at least 2 levels for a trend")
    sups, args, scale_sups, far_sup = [], [], [], 0.0
    for L in levels:
        tt, yy = _series_for_level(samples, L, t)
        h = float(tt[1] - tt[0])
        s, (i, k), f = pair_sup(yy, h, modulus, far)
        sups.append(s)
        args.append([float(tt[i]), float(tt[k])])
        far_sup = max(far_sup, f)
        d = np.abs(np.diff(yy))
        scale_sups.append(float(d.max() / modulus(h)) if h <= far else 0.0)
    slope, band, label = classify_trend(levels, scale_sups, z, tol)
    return HolderReport(modulus.to_dict(), levels, sups, args, scale_sups, slope, band, label,
                        far_sup)


def estimate_holder_exponent(samples, levels, t=None, z=DEFAULT_Z):
    """Slope of log sup-oscillation at separation 2^-L against log 2^-L.

    ``samples`` may hold several paths (2-D, one per row); the per-level
    oscillations are then pooled by their median before regressing.
    Returns (estimate, (lo, hi), per-level oscillations).
    """
    levels = sorted(int(L) for L in levels)
    if len(levels) < 3:
        raise TrendError("need at least 3 levels")
    osc, steps = [], []
    for L in levels:
        tt, yy = _series_for_level(samples, L, t)
        yy = np.atleast_2d(yy)
        per_path = np.max(np.abs(np.diff(yy, axis=-1)), axis=-1)
        osc.append(float(np.median(per_path)))
        steps.append(float(tt[1] - tt[0]))
    osc = np.array(osc)
    if np.any(osc <= 0.0):
        raise UndefinedExponentError("no oscillation at some level: the input is constant")
    slope, se = jackknife_slope(np.log(steps), np.log(osc))
    return slope, (slope - z * se, slope + z * se), osc.tolist()


# ---------------------------------------------------------------------------
# fields


def _field_values(fg, part):
    arr = {"x": fg.x, "xdot": fg.xdot, "xddot": fg.xddot}[part]
    if arr is None:
        raise ContractError(f"field has no '{part}' values")
    return np.asarray(arr, float)


def _grid_levels(n_points, levels, min_level=1):
    top = int(round(math.log2(n_points - 1)))
    if 2 ** top != n_points - 1:
        raise ContractError(f"grid needs 2^L + 1 nodes, got {n_points}")
    if levels is None:
        levels = list(range(max(min_level, top - 4), top + 1))
    return top, sorted(levels)


def lipschitz_in_v_scan(fg, levels=None, part="x", z=DEFAULT_Z, tol=DEFAULT_TOL) -> HolderReport:
    """sup over u and v1 != v2 of |X(u, v1) - X(u, v2)| / |v1 - v2| per v-grid level (0/0 = 0)."""
    x = _field_values(fg, part)
    v = np.asarray(fg.v_grid, float)
    if v.shape[0] < 2:
        raise ContractError("need at least 2 v nodes")
    top, levels = _grid_levels(v.shape[0], levels)
    sups, args, scale_sups = [], [], []
    for L in levels:
        stride = 2 ** (top - L)
        xs, vs = x[:, ::stride], v[::stride]
        best, arg = 0.0, [0.0, 0.0]
        for m in range(1, vs.shape[0]):
            d = np.abs(xs[:, m:] - xs[:, :-m]) / (vs[m] - vs[0])
            i = np.unravel_index(int(np.argmax(d)), d.shape)
            if d[i] > best:
                best, arg = float(d[i]), [float(vs[i[1]]), float(vs[i[1] + m])]
        sups.append(best)
        args.append(arg)
        scale_sups.append(float(np.max(np.abs(np.diff(xs, axis=1))) / (vs[1] - vs[0])))
    slope, band, label = classify_trend(levels, scale_sups, z, tol, richardson=True)
    modulus = {"kind": "lipschitz_in_v", "trend": "extrapolated 2 s_L - s_(L-1)"}
    return HolderReport(modulus, levels, sups, args, scale_sups, slope, band, label)


@njit(cache=True)
def _joint_scan(x, u, v, inv_alpha):
    nu, nv = x.shape
    best = 0.0
    bu = 0.0
    bv = 0.0
    arg = np.zeros(4)
    for a in range(nu * nv):
        i1 = a // nv
        k1 = a % nv
        for b in range(a + 1, nu * nv):
            i2 = b // nv
            k2 = b % nv
            du = abs(u[i1] - u[i2])
            dv = abs(v[k1] - v[k2])
            vm = max(v[k1], v[k2])
            den = du ** (vm - inv_alpha) + dv if du > 0 else dv
            if den == 0.0:
                continue
            r = abs(x[i1, k1] - x[i2, k2]) / den
            if r > best:
                best = r
                arg[0] = u[i1]
                arg[1] = v[k1]
                arg[2] = u[i2]
                arg[3] = v[k2]
            if dv == 0.0 and r > bu:
                bu = r
            if du == 0.0 and r > bv:
                bv = r
    return best, bu, bv, arg


def _joint_shell(x, u, v, inv_alpha):
    # pairs one u step apart whose v separation is at most that step
    hu = float(u[1] - u[0])
    num_u = np.abs(np.diff(x, axis=0))
    best = 0.0
    for dk in range(-(x.shape[1] - 1), x.shape[1]):
        k1 = np.arange(max(0, -dk), x.shape[1] - max(0, dk))
        k2 = k1 + dk
        dv = np.abs(v[k2] - v[k1])
        if dv.size == 0 or dv.min() > hu * (1.0 + 1e-12):
            continue
        keep = dv <= hu * (1.0 + 1e-12)
        k1, k2, dv = k1[keep], k2[keep], dv[keep]
        num = num_u[:, k1] if dk == 0 else np.abs(x[1:, k2] - x[:-1, k1])
        den = hu ** (np.maximum(v[k1], v[k2]) - inv_alpha) + dv
        best = max(best, float(np.max(num / den[None, :])))
    return best


def joint_modulus_scan(fg, alpha, levels=None, part="x", z=DEFAULT_Z,
                       tol=DEFAULT_TOL) -> HolderReport:
    """sup of |X(u1, v1) - X(u2, v2)| / (|u1 - u2|^(v1 v v2 - 1/alpha) + |v1 - v2|).

    Level L takes the u sub-grid with 2^L intervals and the full v grid; the
    reported sup visits every node pair of it.  The trend uses the pairs at
    scale h = 2 / 2^L: one u step apart with |v1 - v2| <= h.  Pairs with
    u1 = u2 never shrink with L and are left to the Lipschitz-in-v scan; their
    sup is reported here as ``v_only_sup`` next to the u-only (v1 = v2) sup.
    """
    x = _field_values(fg, part)
    u = np.asarray(fg.u_grid, float)
    v = np.ascontiguousarray(np.asarray(fg.v_grid, float))
    top, levels = _grid_levels(u.shape[0], levels, min_level=2)
    sups, args, scale_sups, mu, mv = [], [], [], [], []
    for L in levels:
        su = 2 ** (top - L)
        us = np.ascontiguousarray(u[::su])
        xs = np.ascontiguousarray(x[::su])
        best, bu, bv, arg = _joint_scan(xs, us, v, 1.0 / alpha)
        sups.append(float(best))
        mu.append(float(bu))
        mv.append(float(bv))
        scale_sups.append(_joint_shell(xs, us, v, 1.0 / alpha))
        args.append([float(a) for a in arg])
    slope, band, label = classify_trend(levels, scale_sups, z, tol)
    return HolderReport({"kind": "joint", "alpha": alpha}, levels, sups, args, scale_sups, slope,
                        band, label, extra={"u_only_sup": mu, "v_only_sup": mv,
                                            "subsampling": {"u_intervals": [2 ** L for L in levels],
                                                            "v_nodes": int(v.shape[0])}})


@dataclass
class SmoothnessReport:
    lipschitz_u: HolderReport
    lipschitz_v: HolderReport | None
    second_difference_u: dict

    def to_dict(self):
        return {"lipschitz_u": self.lipschitz_u.to_dict(),
                "lipschitz_v": None if self.lipschitz_v is None else self.lipschitz_v.to_dict(),
                "second_difference_u": self.second_difference_u}


def _u_scan(x, u, levels, top, gamma, z, tol):
    sups, args, scale_sups, second = [], [], [], []
    mod = ModulusSpec(gamma)
    for L in levels:
        stride = 2 ** (top - L)
        us, xs = u[::stride], x[::stride]
        h = float(us[1] - us[0])
        best, arg = 0.0, [0.0, 0.0]
        for k in range(xs.shape[1]):
            s, (i, j), _ = pair_sup(xs[:, k], h, mod, far=math.inf)
            if s > best:
                best, arg = s, [float(us[i]), float(us[j])]
        sups.append(best)
        args.append(arg)
        scale_sups.append(float(np.max(np.abs(np.diff(xs, axis=0)))) / mod(h))
        if xs.shape[0] >= 3:
            second.append(float(np.max(np.abs(np.diff(xs, 2, axis=0)))) / h ** 2)
        else:
            second.append(0.0)
    slope, band, label = classify_trend(levels, scale_sups, z, tol, richardson=True)
    rep = HolderReport(mod.to_dict(), levels, sups, args, [float(s) for s in scale_sups], slope,
                       band, label)
    return rep, second


def low_freq_smoothness_check(fg, levels=None, part="xdot", gamma=1.0, z=DEFAULT_Z,
                              tol=DEFAULT_TOL) -> SmoothnessReport:
    """Difference-quotient constants of a field across u refinements (and v refinements).

    With the default ``gamma=1`` this is a Lipschitz check; the same routine run
    on the full field X is the gamma = 1 probe that separates X from its low
    frequency part.  Second differences / h^2 are reported alongside.
    """
    x = _field_values(fg, part)
    u = np.asarray(fg.u_grid, float)
    top, levels = _grid_levels(u.shape[0], levels, min_level=2)
    lip_u, second = _u_scan(x, u, levels, top, gamma, z, tol)
    lip_v = None
    # the extrapolated v trend needs 3 levels, i.e. at least 2^3 + 1 v nodes
    if len(fg.v_grid) >= 9 and ((len(fg.v_grid) - 1) & (len(fg.v_grid) - 2)) == 0:
        lip_v = lipschitz_in_v_scan(fg, part=part, z=z, tol=tol)
    s_slope, s_band, s_label = classify_trend(levels, second, z, tol, richardson=True)
    return SmoothnessReport(lip_u, lip_v, {"levels": levels, "sup_per_level": second,
                                           "slope": s_slope, "band": list(s_band),
                                           "classification": s_label})


# ---------------------------------------------------------------------------
# self-similarity


@dataclass
class ScalingReport:
    exponent: float
    scales: list
    t_points: list
    probs: list
    discrepancy: list
    band: list
    within_band: list
    ensemble_size: int

    def to_dict(self):
        return dict(self.__dict__)


def _log_quantile_gap(a, b, probs, shift):
    # a, b: (members, t points); quantiles of the pooled mixture over t
    qa = np.quantile(np.abs(a).ravel(), probs)
    qb = np.quantile(np.abs(b).ravel(), probs)
    return np.log(qb) - np.log(qa) - shift


def self_similarity_check(generator, hurst, scales, ensemble_size,
                          t_points=tuple(np.arange(2, 9) / 32.0),
                          probs=(0.5, 0.6, 0.7, 0.8, 0.9), exponent=None,
                          n_boot=1000, level=0.99, seed=0, samples=None) -> ScalingReport:
    """Compare quantiles of |Y(c t)| with c^H times quantiles of |Y(t)|.

    ``generator(member, t)`` returns Y at the times ``t`` for ensemble member
    ``member``; alternatively pass ``samples`` of shape (members, times) laid
    out on ``sorted(set(t_points * c for c in [1] + scales))``.  Values over
    all ``t_points`` are pooled: if Y is H-self-similar, the mixture law of
    Y(c t_i) equals c^H times that of Y(t_i).  The discrepancy at scale c is
    the max over ``probs`` of |log q_p|Y(ct)| - log q_p|Y(t)| - H log c|.
    Its band is the ``level`` quantile of the same statistic recentred on the
    observed gap, over bootstrap resamples of ensemble members (each member's
    values at t and c t stay together).  ``exponent`` overrides H, e.g. for a
    negative control.
    """
    if hurst.kind != "constant":
        raise ContractError("self-similarity needs a constant Hurst function")
    H = float(hurst.params["value"]) if exponent is None else float(exponent)
    t_points = np.asarray(t_points, float)
    scales = [float(c) for c in scales]
    all_t = np.unique(np.concatenate([t_points * c for c in scales] + [t_points]))
    if samples is None:
        samples = np.array([generator(m, all_t) for m in range(ensemble_size)])
    samples = np.asarray(samples, float)
    if samples.shape != (ensemble_size, all_t.shape[0]):
        raise ContractError(f"samples must have shape {(ensemble_size, all_t.shape[0])}")
    idx = {float(tv): i for i, tv in enumerate(all_t)}
    probs = np.asarray(probs, float)
    rng = np.random.default_rng(seed)
    boots = rng.integers(0, ensemble_size, size=(n_boot, ensemble_size))
    a = samples[:, [idx[float(tv)] for tv in t_points]]
    disc, band, ok = [], [], []
    for c in scales:
        if c == 1.0:
            disc.append(0.0)
            band.append(0.0)
            ok.append(True)
            continue
        b = samples[:, [idx[float(tv * c)] for tv in t_points]]
        gap = _log_quantile_gap(a, b, probs, H * math.log(c))
        stats = np.empty(n_boot)
        for i, sel in enumerate(boots):
            g = _log_quantile_gap(a[sel], b[sel], probs, H * math.log(c))
            stats[i] = np.max(np.abs(g - gap))
        thr = float(np.quantile(stats, level))
        d = float(np.max(np.abs(gap)))
        disc.append(d)
        band.append(thr)
        ok.append(d <= thr)
    return ScalingReport(H, scales, t_points.tolist(), probs.tolist(), disc, band, ok,
                         int(ensemble_size))
