"""Run configuration: one JSON document describes a full run.

Unknown keys are rejected, every section has defaults, and cross-field
consistency (Hurst range, Psi table range, path coverage) is checked before
any work starts.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .coefficients import CoefficientWindow
from .synthesis import HurstFunction

OUT_ENV = "LMSM_OUT"
FORMATS = ("csv", "json")


class ValidationError(ValueError):
    """The configuration is inconsistent; ``field`` names the offending entry."""

    def __init__(self, message, field_name=None):
        super().__init__(message)
        self.field = field_name


@dataclass(frozen=True)
class WaveletConfig:
    order: int = 12
    level: int = 14


@dataclass(frozen=True)
class PathConfig:
    # finest step; null means 2^-(j_max + oversampling)
    step: float | None = None
    s_min: float | None = None
    s_max: float | None = None
    oversampling: int = 4


@dataclass(frozen=True)
class WindowConfig:
    j_min: int = -40
    j_max: int = 13
    padding: int = 240


@dataclass(frozen=True)
class GridConfig:
    M: float = 1.0
    a: float = 0.7
    b: float = 0.9
    u_points: int = 257
    v_points: int = 33
    t_points: int = 2049
    psi_v_points: int = 26


@dataclass(frozen=True)
class HurstConfig:
    kind: str = "sinusoidal"
    params: dict = field(default_factory=lambda: {"center": 0.8, "amplitude": 0.1})
    gamma_H: float | None = None


@dataclass(frozen=True)
class SeedConfig:
    master: int = 0
    ensemble_size: int = 4


@dataclass(frozen=True)
class OutputConfig:
    directory: str | None = None
    formats: tuple = FORMATS


@dataclass(frozen=True)
class VerifyConfig:
    holder_levels: tuple = (6, 7, 8, 9, 10, 11)
    eta: float = 0.1
    neg_log_eta: float = 0.2
    scales: tuple = (2.0, 4.0)
    n_boot: int = 500


@dataclass(frozen=True)
class RunConfig:
    alpha: float = 1.5
    wavelet: WaveletConfig = WaveletConfig()
    path: PathConfig = PathConfig()
    window: WindowConfig = WindowConfig()
    grids: GridConfig = GridConfig()
    hurst: HurstConfig = HurstConfig()
    seeds: SeedConfig = SeedConfig()
    outputs: OutputConfig = OutputConfig()
    verify: VerifyConfig = VerifyConfig()

    # -- derived -----------------------------------------------------------

    @property
    def coefficient_window(self) -> CoefficientWindow:
        return CoefficientWindow(self.window.j_min, self.window.j_max, M=self.grids.M,
                                 padding=self.window.padding,
                                 oversampling=self.path.oversampling)

    @property
    def path_level(self) -> int:
        if self.path.step is None:
            return self.window.j_max + self.path.oversampling
        return int(round(-math.log2(self.path.step)))

    def hurst_function(self) -> HurstFunction:
        p = dict(self.hurst.params)
        if self.hurst.kind == "constant":
            return HurstFunction.constant(p["value"])
        if self.hurst.kind == "sinusoidal":
            if self.hurst.gamma_H is not None:
                p.setdefault("holder_order", self.hurst.gamma_H)
            return HurstFunction.sinusoidal(**p)
        return HurstFunction(self.hurst.kind, p)

    def u_grid(self):
        return np.linspace(-self.grids.M, self.grids.M, self.grids.u_points)

    def v_grid(self):
        return np.linspace(self.grids.a, self.grids.b, self.grids.v_points)

    def t_grid(self):
        return np.linspace(0.0, 1.0, self.grids.t_points)

    def psi_v_range(self):
        # a little slack around [a, b] keeps evaluation away from the table edge
        lo, hi = 1.0 / self.alpha, 1.0
        pad = 0.05 * (self.grids.b - self.grids.a) + 1e-3
        return max(self.grids.a - pad, 0.5 * (lo + self.grids.a)), \
            min(self.grids.b + pad, 0.5 * (hi + self.grids.b))

    def output_dir(self):
        return self.outputs.directory or os.environ.get(OUT_ENV) or "lmsm_out"

    def to_dict(self):
        d = asdict(self)
        d["outputs"]["formats"] = list(d["outputs"]["formats"])
        d["verify"]["holder_levels"] = list(d["verify"]["holder_levels"])
        d["verify"]["scales"] = list(d["verify"]["scales"])
        return d

    # -- checks --------------------------------------------------------------

    def validate(self):
        a = self.alpha
        if not (isinstance(a, (int, float)) and 1.0 < a < 2.0):
            raise ValidationError(f"alpha must lie in the open interval (1, 2), got {a}", "alpha")
        g = self.grids
        if not (1.0 / a < g.a < g.b < 1.0):
            raise ValidationError(
                f"need 1/alpha < a < b < 1 for the v-range, got a={g.a}, b={g.b}, "
                f"1/alpha={1.0 / a:.6g}", "grids")
        if g.M <= 0:
            raise ValidationError("grids.M must be positive", "grids.M")
        for name in ("u_points", "v_points", "t_points"):
            n = getattr(g, name)
            if not (isinstance(n, int) and n >= 2):
                raise ValidationError(f"grids.{name} must be an integer >= 2", f"grids.{name}")
        if g.psi_v_points < 4:
            raise ValidationError("grids.psi_v_points must be >= 4", "grids.psi_v_points")
        w = self.window
        if w.j_min > w.j_max:
            raise ValidationError(f"empty window: j_min={w.j_min} > j_max={w.j_max}", "window")
        if w.padding < 0:
            raise ValidationError("window.padding must be nonnegative", "window.padding")
        if self.wavelet.order < 12:
            raise ValidationError("wavelet.order must be >= 12", "wavelet.order")
        p = self.path
        if p.step is not None:
            lvl = -math.log2(p.step) if p.step > 0 else float("nan")
            if not (lvl == lvl and abs(lvl - round(lvl)) < 1e-12):
                raise ValidationError(f"path.step must be a power of two, got {p.step}", "path.step")
            if round(lvl) < w.j_max + p.oversampling:
                raise ValidationError(
                    f"path.step {p.step} too coarse for j_max={w.j_max}; need at most "
                    f"2^-{w.j_max + p.oversampling}", "path.step")
        if p.s_min is not None or p.s_max is not None:
            width = 2 * self.wavelet.order - 1
            lo, hi = self.coefficient_window.span(w.j_max, width)
            if (p.s_min is not None and p.s_min > lo) or (p.s_max is not None and p.s_max < hi):
                raise ValidationError(
                    f"path span [{p.s_min}, {p.s_max}] does not cover the coefficient "
                    f"window span [{lo:.6g}, {hi:.6g}] at level {w.j_max}", "path")
        try:
            H = self.hurst_function()
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"bad hurst section: {exc}", "hurst") from exc
        h_lo, h_hi = H.h_range
        if not (1.0 / a < h_lo and h_hi < 1.0):
            raise ValidationError(
                f"Hurst range [{h_lo:.6g}, {h_hi:.6g}] must lie inside (1/alpha, 1) = "
                f"({1.0 / a:.6g}, 1)", "hurst")
        if h_lo < g.a - 1e-12 or h_hi > g.b + 1e-12:
            raise ValidationError(
                f"Hurst range [{h_lo:.6g}, {h_hi:.6g}] must lie inside the v-range "
                f"[{g.a}, {g.b}]", "hurst")
        s = self.seeds
        if not (0 <= s.master < 2 ** 64):
            raise ValidationError("seeds.master must be a 64-bit unsigned integer", "seeds.master")
        if s.ensemble_size < 1:
            raise ValidationError("seeds.ensemble_size must be >= 1", "seeds.ensemble_size")
        bad = set(self.outputs.formats) - set(FORMATS)
        if bad:
            raise ValidationError(f"unknown output formats {sorted(bad)}", "outputs.formats")
        v = self.verify
        if len(v.holder_levels) < 3:
            raise ValidationError("verify.holder_levels needs at least 3 levels",
                                  "verify.holder_levels")
        if v.eta <= 0 or v.neg_log_eta <= 0:
            raise ValidationError("verify.eta and verify.neg_log_eta must be positive", "verify")
        return self


_SECTIONS = {"wavelet": WaveletConfig, "path": PathConfig, "window": WindowConfig,
             "grids": GridConfig, "hurst": HurstConfig, "seeds": SeedConfig,
             "outputs": OutputConfig, "verify": VerifyConfig}
_TUPLES = {("outputs", "formats"), ("verify", "holder_levels"), ("verify", "scales")}


def config_from_dict(data: dict) -> RunConfig:
    """Build (without validating) a RunConfig from a nested dict."""
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValidationError(f"unknown config keys {sorted(unknown)}", sorted(unknown)[0])
    kwargs = {}
    for key, value in data.items():
        cls = _SECTIONS.get(key)
        if cls is None:
            kwargs[key] = value
            continue
        if not isinstance(value, dict):
            raise ValidationError(f"section '{key}' must be an object", key)
        names = {f.name for f in fields(cls)}
        extra = set(value) - names
        if extra:
            raise ValidationError(f"unknown keys {sorted(extra)} in section '{key}'", key)
        sec = {k: (tuple(v) if (key, k) in _TUPLES else v) for k, v in value.items()}
        kwargs[key] = cls(**sec)
    return RunConfig(**kwargs)


def load_config(path=None, overrides=None) -> RunConfig:
    """Read a JSON config (or defaults), apply flag overrides, validate."""
    data = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config is not valid JSON: {exc}") from exc
    cfg = config_from_dict(data)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "alpha":
            cfg = replace(cfg, alpha=float(value))
        elif key == "seed":
            cfg = replace(cfg, seeds=replace(cfg.seeds, master=int(value)))
        elif key == "out":
            cfg = replace(cfg, outputs=replace(cfg.outputs, directory=str(value)))
        elif key == "ensemble_size":
            cfg = replace(cfg, seeds=replace(cfg.seeds, ensemble_size=int(value)))
        else:
            raise ValidationError(f"unknown override {key}")
    return cfg.validate()
