"""Truncated wavelet series for X(u, v), its low/high frequency parts and Y(t) = X(t, H(t)).

Every node is summed independently in a fixed order (levels ascending, k
ascending, one compensated accumulator per part), so splitting the nodes
across threads never changes a bit of the output.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .coefficients import CoefficientTable, ContractError, check_bound_omega0, check_bound_omega1
from .psi import DomainError, PsiTable

NODE_CHUNK = 256
TAYLOR_THRESHOLD = 2.0 ** -8


class ConfigurationError(ValueError):
    """Coefficient window and synthesis grid do not fit together."""


class RangeError(ValueError):
    """The Psi table does not cover what the synthesis needs."""


# ---------------------------------------------------------------------------
# Hurst functions


@dataclass(frozen=True)
class HurstFunction:
    """H(t) on an interval, one of four kinds.

    constant        {"value"}
    affine_clipped  {"intercept", "slope", "lo", "hi"}
    sinusoidal      {"center", "amplitude", "frequency", "phase"=0, "holder_order"=1}
                    H = center + amplitude * sign(s) |s|^holder_order, s = sin(2 pi f t + phase)
    user_tabulated  {"t": [...], "h": [...]} (piecewise linear)
    """

    kind: str
    params: dict
    interval: tuple = (0.0, 1.0)

    KINDS = ("constant", "affine_clipped", "sinusoidal", "user_tabulated")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown Hurst kind {self.kind!r}; expected one of {self.KINDS}")
        p = self.params
        need = {"constant": ("value",), "affine_clipped": ("intercept", "slope", "lo", "hi"),
                "sinusoidal": ("center", "amplitude", "frequency"),
                "user_tabulated": ("t", "h")}[self.kind]
        missing = [k for k in need if k not in p]
        if missing:
            raise ValueError(f"{self.kind} Hurst function needs {missing}")
        if self.kind == "sinusoidal":
            g = p.get("holder_order", 1.0)
            if not 0 < g <= 1:
                raise ValueError("holder_order must lie in (0, 1]")
        if self.kind == "user_tabulated":
            t = np.asarray(p["t"], dtype=float)
            if t.ndim != 1 or t.shape != np.asarray(p["h"]).shape or np.any(np.diff(t) <= 0):
                raise ValueError("user_tabulated needs increasing t and matching h")

    @classmethod
    def constant(cls, value, interval=(0.0, 1.0)):
        return cls("constant", {"value": float(value)}, interval)

    @classmethod
    def sinusoidal(cls, center, amplitude, frequency=1.0, phase=0.0, holder_order=1.0,
                   interval=(0.0, 1.0)):
        return cls("sinusoidal", {"center": center, "amplitude": amplitude,
                                  "frequency": frequency, "phase": phase,
                                  "holder_order": holder_order}, interval)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        p = self.params
        if self.kind == "constant":
            return np.full(t.shape, float(p["value"]))
        if self.kind == "affine_clipped":
            return np.clip(p["intercept"] + p["slope"] * t, p["lo"], p["hi"])
        if self.kind == "sinusoidal":
            s = np.sin(2.0 * np.pi * p["frequency"] * t + p.get("phase", 0.0))
            g = p.get("holder_order", 1.0)
            return p["center"] + p["amplitude"] * np.sign(s) * np.abs(s) ** g
        return np.interp(t, np.asarray(p["t"], float), np.asarray(p["h"], float))

    @property
    def gamma_H(self):
        if self.kind == "constant":
            return 1.0
        if self.kind == "sinusoidal":
            return float(self.params.get("holder_order", 1.0))
        return 1.0

    @property
    def h_range(self):
        p = self.params
        if self.kind == "constant":
            return float(p["value"]), float(p["value"])
        if self.kind == "sinusoidal":
            a = abs(p["amplitude"])
            return p["center"] - a, p["center"] + a
        t = np.linspace(*self.interval, 4097)
        if self.kind == "user_tabulated":
            t = np.concatenate([t, np.asarray(p["t"], float)])
            t = t[(t >= self.interval[0]) & (t <= self.interval[1])]
        h = self(t)
        return float(h.min()), float(h.max())

    def validate(self, alpha):
        lo, hi = self.h_range
        if not (lo > 1.0 / alpha and hi < 1.0):
            raise DomainError(f"H range [{lo:.6g}, {hi:.6g}] must lie inside "
                              f"(1/alpha, 1) = ({1.0 / alpha:.6g}, 1)")

    def holder_probe(self, level=14):
        """sup |H(t) - H(s)| / |t - s|^gamma_H over dyadic neighbours at every scale."""
        a, b = self.interval
        t = np.linspace(a, b, 2 ** level + 1)
        h = self(t)
        best = 0.0
        lag = 1
        while lag < t.shape[0]:
            d = np.abs(h[lag:] - h[:-lag])
            best = max(best, float(d.max() / ((t[lag] - t[0]) ** self.gamma_H)))
            lag *= 2
        return best

    def to_dict(self):
        return {"kind": self.kind, "params": self.params, "interval": list(self.interval),
                "gamma_H": self.gamma_H}


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class FieldGrid:
    """X on the tensor grid u_grid x v_grid; arrays have shape (len(u_grid), len(v_grid))."""

    u_grid: np.ndarray
    v_grid: np.ndarray
    x: np.ndarray | None
    xdot: np.ndarray | None = None
    xddot: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def scaled(self, factor):
        def s(a):
            return None if a is None else a * factor
        return FieldGrid(self.u_grid, self.v_grid, s(self.x), s(self.xdot), s(self.xddot),
                         dict(self.metadata))


@dataclass(frozen=True)
class LmsmPath:
    t_grid: np.ndarray
    h_values: np.ndarray
    y: np.ndarray
    hurst: HurstFunction
    metadata: dict = field(default_factory=dict)


@dataclass
class TailBoundReport:
    high_levels: float
    low_levels: float
    k_tail: float
    inputs: dict

    @property
    def total(self):
        return self.high_levels + self.low_levels + self.k_tail

    def to_dict(self):
        return {"high_levels": self.high_levels, "low_levels": self.low_levels,
                "k_tail": self.k_tail, "total": self.total, "inputs": self.inputs}


# ---------------------------------------------------------------------------
# the engine


def _psi_stack(psi: PsiTable):
    keys = [(p, 0) for p in range(4)]
    if all(k in psi.values for k in keys):
        return np.ascontiguousarray(np.stack([psi.values[k] for k in keys])), True
    return np.ascontiguousarray(psi.values[(0, 0)][None]), False


def _check_inputs(coeffs: CoefficientTable, psi: PsiTable, u, v):
    if psi.alpha != coeffs.alpha:
        raise ConfigurationError(f"Psi table alpha {psi.alpha} != coefficient alpha {coeffs.alpha}")
    lo, hi = psi.v_range
    if v.size and (v.min() < lo - 1e-12 or v.max() > hi + 1e-12):
        raise RangeError(f"v values span [{v.min():.6g}, {v.max():.6g}], Psi table covers "
                         f"[{lo:.6g}, {hi:.6g}]")
    if psi.x_min > psi.x_zero:
        raise RangeError("Psi table does not reach the left end of the wavelet support")
    if coeffs.eps.size == 0:
        return
    u_lo, u_hi = (float(u.min()), float(u.max())) if u.size else (0.0, 0.0)
    for i, j in enumerate(coeffs.levels):
        kmin = int(coeffs.kmins[i])
        kmax = kmin + int(coeffs.offsets[i + 1] - coeffs.offsets[i]) - 1
        need_lo = math.ceil(min(2.0 ** j * u_lo, 0.0) - psi.x_max)
        need_hi = math.ceil(max(2.0 ** j * u_hi, 0.0)) - 1
        if kmin > need_lo or kmax < need_hi:
            raise ConfigurationError(
                f"level {j}: window k in [{kmin}, {kmax}] does not cover [{need_lo}, {need_hi}] "
                f"needed for u in [{u_lo:g}, {u_hi:g}]; raise M or padding")


def _taylor_levels(levels, u_absmax, threshold):
    return np.array([j < 0 and 2.0 ** j * u_absmax <= threshold for j in levels], dtype=np.bool_)


def _run(coeffs, psi, u, v, threads=1, taylor_threshold=TAYLOR_THRESHOLD):
    u = np.ascontiguousarray(u, dtype=np.float64)
    v = np.ascontiguousarray(v, dtype=np.float64)
    _check_inputs(coeffs, psi, u, v)
    low = np.zeros(u.shape[0])
    high = np.zeros(u.shape[0])
    if u.shape[0] == 0 or coeffs.eps.size == 0:
        return low, high, {"taylor_levels": []}
    tables, have_derivs = _psi_stack(psi)
    u_absmax = float(np.max(np.abs(u)))
    taylor = _taylor_levels(coeffs.levels, u_absmax, taylor_threshold) if have_derivs \
        else np.zeros(len(coeffs.levels), dtype=np.bool_)
    args = (coeffs.levels, taylor, coeffs.kmins, coeffs.offsets, coeffs.eps, tables,
            psi.x_min, psi.hx, psi.x_zero, psi.x_max, psi.v_range[0], psi.hv)

    def work(sl):
        _kernels.synthesize_nodes(u[sl], v[sl], *args, low[sl], high[sl])

    chunks = [slice(i, min(i + NODE_CHUNK, u.shape[0])) for i in range(0, u.shape[0], NODE_CHUNK)]
    if threads <= 1 or len(chunks) == 1:
        for sl in chunks:
            work(sl)
    else:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            list(pool.map(work, chunks))
    info = {"taylor_levels": [int(j) for j, t in zip(coeffs.levels, taylor) if t]}
    return low, high, info


def _provenance(coeffs, psi, extra=None):
    out = {"alpha": coeffs.alpha, "coefficients": coeffs.provenance,
           "window": coeffs.window.to_dict(),
           "psi": {"x_range": [psi.x_min, psi.x_max], "hx": psi.hx,
                   "v_range": list(psi.v_range), "n_v": int(len(psi.v_grid))}}
    if extra:
        out.update(extra)
    return out


def synthesize_nodes(coeffs: CoefficientTable, psi: PsiTable, u, v, threads=1):
    """(X_dot, X_ddot) at arbitrary nodes (u[i], v[i]); X = X_dot + X_ddot."""
    u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
    low, high, _ = _run(coeffs, psi, u.ravel(), v.ravel(), threads)
    return low.reshape(u.shape), high.reshape(u.shape)


def _field(coeffs, psi, u_grid, v_grid, threads, budget):
    u_grid = np.asarray(u_grid, dtype=float)
    v_grid = np.asarray(v_grid, dtype=float)
    uu, vv = np.meshgrid(u_grid, v_grid, indexing="ij")
    low, high, info = _run(coeffs, psi, uu.ravel(), vv.ravel(), threads)
    shape = uu.shape
    meta = _provenance(coeffs, psi, {"truncation": info})
    if budget is None and coeffs.eps.size:
        budget = default_tail_bound(coeffs, psi, v_grid.min(), v_grid.max(),
                                    float(np.max(np.abs(u_grid))))
    if budget is not None:
        meta["tail_bound"] = budget.to_dict()
    return low.reshape(shape), high.reshape(shape), meta


def synthesize_field(coeffs: CoefficientTable, psi: PsiTable, u_grid, v_grid, budget=None,
                     threads=1, parts=True) -> FieldGrid:
    """X on a tensor grid, with the low and high frequency parts when ``parts``.

    X is formed as low + high, so the stored parts add up to X exactly.
    """
    low, high, meta = _field(coeffs, psi, u_grid, v_grid, threads, budget)
    x = low + high
    return FieldGrid(np.asarray(u_grid, float), np.asarray(v_grid, float), x,
                     low if parts else None, high if parts else None, meta)


def synthesize_low_frequency(coeffs, psi, u_grid, v_grid, budget=None, threads=1) -> FieldGrid:
    low, _, meta = _field(coeffs, psi, u_grid, v_grid, threads, budget)
    meta["part"] = "low"
    return FieldGrid(np.asarray(u_grid, float), np.asarray(v_grid, float), None, low, None, meta)


def synthesize_high_frequency(coeffs, psi, u_grid, v_grid, budget=None, threads=1) -> FieldGrid:
    _, high, meta = _field(coeffs, psi, u_grid, v_grid, threads, budget)
    meta["part"] = "high"
    return FieldGrid(np.asarray(u_grid, float), np.asarray(v_grid, float), None, None, high, meta)


def synthesize_lmsm(coeffs: CoefficientTable, psi: PsiTable, hurst: HurstFunction, t_grid,
                    budget=None, threads=1) -> LmsmPath:
    """Y(t) = X(t, H(t)) evaluated node by node at the exact value H(t)."""
    hurst.validate(coeffs.alpha)
    t = np.asarray(t_grid, dtype=float)
    h = hurst(t)
    low, high, info = _run(coeffs, psi, t, h, threads)
    meta = _provenance(coeffs, psi, {"truncation": info, "hurst": hurst.to_dict()})
    if budget is None and coeffs.eps.size and t.size:
        budget = default_tail_bound(coeffs, psi, float(h.min()), float(h.max()),
                                    float(np.max(np.abs(t))))
    if budget is not None:
        meta["tail_bound"] = budget.to_dict()
    return LmsmPath(t, h, low + high, hurst, meta)


# ---------------------------------------------------------------------------
# truncation budget


def _geometric_tail(first, ratio):
    return first / (1.0 - ratio) if ratio < 1.0 else math.inf


def truncation_error_estimate(window, budget, bound_fits, localization) -> TailBoundReport:
    """Heuristic bound on the mass discarded by truncating the series.

    ``budget`` holds ``a``, ``b`` (v-range), ``M`` (|u| bound), ``alpha``,
    ``eta`` (of the omega0 fit), ``x_max`` (Psi table reach) and ``l`` (the
    omega1 band); ``bound_fits`` holds ``C_fit`` and ``C1_fit``;
    ``localization`` holds ``C0`` and ``C1`` = sup (3 + |x|)^2 |d_x^p Psi| for p = 0, 1.

    * levels above j_max: C1_fit 2^{j/alpha} 2^{-ja} * 2 C0 S, S = sum_n (3 + |n|)^-2
    * levels below j_min: C_fit ((3 + |j|)(3 + |k|))^{1/alpha + eta} 2^{|j| b} 2^{-|j|} M C1 (3 + |k|)^-2,
      summed over k
    * k tails: every retained level, indices whose argument lies beyond x_max,
      bounded with the omega0 envelope at the window edge and the (3 + |x|)^-2 decay
      (on negative levels the difference of Psi values is bounded through d_x Psi).
    """
    for key in ("C_fit", "C1_fit"):
        if key not in bound_fits or bound_fits[key] is None:
            raise ContractError(f"bound fit {key} missing")
    for key in ("C0", "C1"):
        if key not in localization:
            raise ContractError(f"localization constant {key} missing")
    alpha, a, b, M = budget["alpha"], budget["a"], budget["b"], budget["M"]
    eta, x_max = budget.get("eta", 0.1), budget["x_max"]
    C, C1 = bound_fits["C_fit"], bound_fits["C1_fit"]
    L0, L1 = localization["C0"], localization["C1"]
    expo = 1.0 / alpha + eta
    n = np.arange(-100000, 100001)
    S2 = float(np.sum((3.0 + np.abs(n)) ** -2.0))
    S_k = float(np.sum((3.0 + np.abs(n)) ** (expo - 2.0)))

    ratio_hi = 2.0 ** -(a - 1.0 / alpha)
    first_hi = C1 * 2.0 ** (-(window.j_max + 1) * (a - 1.0 / alpha)) * 2.0 * L0 * S2
    high = _geometric_tail(first_hi, ratio_hi)

    # j = j_min - 1, j_min - 2, ...; (3 + |j|)^expo grows only polynomially
    js = np.arange(window.j_min - 1, window.j_min - 4000, -1)
    low = float(np.sum(C * (3.0 + np.abs(js)) ** expo * 2.0 ** (js * (1.0 - b)) * M * L1 * S_k))

    # k tail: sum over n > x_max of (3 + n)^-2 ~ 1 / (2 + x_max), both Psi(x) and Psi(-k)
    tail_x = 2.0 / (2.0 + x_max)
    k_tail = 0.0
    for j in window.levels:
        k0, k1 = window.k_range(j)
        env = C * ((3.0 + abs(j)) * (3.0 + max(abs(k0), abs(k1)))) ** expo
        if j < 0:
            # |Psi(2^j u - k) - Psi(-k)| <= 2^j M sup|d_x Psi|
            k_tail += 2.0 ** (-j * (b - 1.0)) * M * env * L1 * tail_x
        else:
            k_tail += 2.0 ** (-j * a) * env * L0 * tail_x
    inputs = {"window": window.to_dict(), "budget": dict(budget), "bound_fits": dict(bound_fits),
              "localization": dict(localization)}
    return TailBoundReport(float(high), float(low), float(k_tail), inputs)


def default_tail_bound(coeffs: CoefficientTable, psi: PsiTable, a, b, M, eta=0.1):
    """truncation_error_estimate fed with fits measured on ``coeffs`` and ``psi``."""
    l = 2.0 * (coeffs.window.M + 1.0)
    try:
        C1 = check_bound_omega1(coeffs, l).C_fit
    except ContractError:
        C1 = 0.0
    fits = {"C_fit": check_bound_omega0(coeffs, eta).C_fit, "C1_fit": C1}
    loc = {"C0": psi.localization.get((0, 0), {}).get("sup_value", 0.0),
           "C1": psi.localization.get((1, 0), {}).get("sup_value",
                                                      psi.localization[(0, 0)]["sup_value"])}
    budget = {"alpha": coeffs.alpha, "a": float(a), "b": float(b), "M": float(max(M, 1e-300)),
              "eta": eta, "x_max": psi.x_max, "l": l}
    return truncation_error_estimate(coeffs.window, budget, fits, loc)


# ---------------------------------------------------------------------------
# serialisation


def save_field(fg: FieldGrid, csv_path, json_path=None, provenance=None):
    from .io import write_csv, write_json

    uu, vv = np.meshgrid(fg.u_grid, fg.v_grid, indexing="ij")
    header = ["u", "v"]
    cols = [uu.ravel(), vv.ravel()]
    for name, arr in (("x", fg.x), ("xdot", fg.xdot), ("xddot", fg.xddot)):
        if arr is not None:
            header.append(name)
            cols.append(arr.ravel())
    write_csv(csv_path, header, cols)
    if json_path is not None:
        write_json(json_path, {"metadata": fg.metadata, "provenance": provenance or {}})


def save_lmsm(path: LmsmPath, csv_path, json_path=None, provenance=None):
    from .io import write_csv, write_json

    write_csv(csv_path, ["t", "h", "y"], [path.t_grid, path.h_values, path.y])
    if json_path is not None:
        write_json(json_path, {"metadata": path.metadata, "provenance": provenance or {}})
