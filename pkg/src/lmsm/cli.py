"""Command line front-end: ``lmsm simulate | coeffs | synthesize | verify``.

Every artifact carries the same provenance block (the run configuration minus
the output location, plus the package version) and its SHA-256.  Results never
depend on ``--threads``.

Exit codes: 0 success, 2 validation, 3 resource, 4 numerically inconclusive.
"""
from __future__ import annotations

import argparse
import collections
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache

import numpy as np

from . import __version__
from . import coefficients as coef
from . import psi as psi_mod
from . import regularity as reg
from . import synthesis as syn
from .config import RunConfig, ValidationError, load_config
from .io import provenance_hash, write_csv, write_json
from .stable import GridAlignmentError, RandomStream, ResourceError, StableParams, SupportError
from .wavelet import WaveletSpec, build_wavelet_table

EXIT_OK, EXIT_VALIDATION, EXIT_RESOURCE, EXIT_INCONCLUSIVE = 0, 2, 3, 4
SUITES = ("bounds", "holder", "joint", "smoothness", "scaling")


class Inconclusive(RuntimeError):
    """Raised after all artifacts are written when some report is inconclusive."""


# ---------------------------------------------------------------------------
# shared state


@lru_cache(maxsize=4)
def _wavelet(order, level):
    return build_wavelet_table(WaveletSpec(order=order, table_level=level))


@lru_cache(maxsize=4)
def _psi(order, level, alpha, v_range, n_v):
    return psi_mod.tabulate_psi(_wavelet(order, level), alpha, v_range, n_v=n_v,
                                derivatives=((0, 0), (1, 0), (2, 0), (3, 0), (0, 1)))


class Run:
    def __init__(self, cfg: RunConfig, threads=1):
        self.cfg = cfg
        self.threads = max(1, int(threads))
        d = cfg.to_dict()
        d["outputs"].pop("directory")
        self.provenance = {"package": "lmsm", "version": __version__, "config": d}
        self.hash = provenance_hash(self.provenance)
        self.out = cfg.output_dir()
        self.written = []

    @property
    def wavelet(self):
        return _wavelet(self.cfg.wavelet.order, self.cfg.wavelet.level)

    @property
    def psi(self):
        c = self.cfg
        return _psi(c.wavelet.order, c.wavelet.level, c.alpha, c.psi_v_range(),
                    c.grids.psi_v_points)

    def stream(self, member):
        return RandomStream(self.cfg.seeds.master, (member,))

    def pyramid(self, member):
        c = self.cfg
        return coef.simulate_window_path(StableParams(c.alpha), c.coefficient_window,
                                         self.wavelet.width, self.stream(member),
                                         path_level=c.path_level)

    def coefficients(self, member, method="direct"):
        pyr = self.pyramid(member)
        win = self.cfg.coefficient_window
        if method == "ibp":
            return coef.compute_coefficients_ibp(pyr, self.wavelet, win)
        return coef.compute_coefficients_direct(pyr, self.wavelet, win)

    def map_members(self, fn):
        # table builders are not thread-safe (mpmath keeps global precision)
        self.wavelet, self.psi
        members = range(self.cfg.seeds.ensemble_size)
        if self.threads == 1:
            return [fn(m) for m in members]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(fn, members))

    # -- writing -----------------------------------------------------------

    def _path(self, name):
        return os.path.join(self.out, name)

    def csv(self, name, header, columns):
        if "csv" not in self.cfg.outputs.formats:
            return
        write_csv(self._path(name), header, columns,
                  comments=(f"provenance_hash={self.hash}",
                            "provenance=" + json.dumps(self.provenance, sort_keys=True,
                                                       separators=(",", ":"))))
        self.written.append(name)

    def json(self, name, payload):
        if "json" not in self.cfg.outputs.formats:
            return
        body = dict(payload)
        body["provenance"] = self.provenance
        body["provenance_hash"] = self.hash
        write_json(self._path(name), body)
        self.written.append(name)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(run: Run):
    pyr = run.pyramid(0)
    top = max(pyr.paths)
    path = pyr.paths[top]
    run.csv("levy_path.csv", ["s", "z"], [path.s, path.values])
    levels = {str(j): {"s_min": p.s_min, "s_max": p.s_max, "step": p.step, "n_points": p.n_points}
              for j, p in sorted(pyr.paths.items())}
    run.json("levy_path.json", {"alpha": run.cfg.alpha, "stream": run.stream(0).to_dict(),
                                "finest_level": int(top), "s_min": path.s_min,
                                "s_max": path.s_max, "step": path.step,
                                "n_points": path.n_points, "pyramid_levels": levels,
                                "oversampling": pyr.oversampling})


def _bound_fits(run, table):
    l = 2.0 * (run.cfg.grids.M + 1.0)
    out = {"omega0": coef.check_bound_omega0(table, run.cfg.verify.eta).to_dict()}
    try:
        out["omega1"] = coef.check_bound_omega1(table, l).to_dict()
    except coef.ContractError as exc:
        out["omega1"] = {"error": str(exc)}
    return out


def _write_coefficients(run, table, name):
    js, ks, eps = table.index_arrays()
    run.csv(name, ["j", "k", "epsilon"], [js.astype(np.int64), ks.astype(np.int64), eps])


def cmd_coeffs(run: Run, method="direct"):
    pyr = run.pyramid(0)
    win = run.cfg.coefficient_window
    tables = {}
    if method in ("direct", "both"):
        tables["direct"] = coef.compute_coefficients_direct(pyr, run.wavelet, win)
    if method in ("ibp", "both"):
        tables["ibp"] = coef.compute_coefficients_ibp(pyr, run.wavelet, win)
    for name, table in tables.items():
        fname = "coefficients.csv" if method != "both" else f"coefficients_{name}.csv"
        _write_coefficients(run, table, fname)
        run.json(f"bounds_{name}.json", {"route": name, "fits": _bound_fits(run, table),
                                         "table": table.provenance})
    if method == "both":
        rep = coef.route_discrepancy(tables["direct"], tables["ibp"], j_lo=max(0, win.j_min))
        rep["path_step"] = 2.0 ** -run.cfg.path_level
        run.json("route_discrepancy.json", rep)


def cmd_synthesize(run: Run):
    c = run.cfg
    table = run.coefficients(0)
    psi = run.psi
    loc = [r.to_dict() for r in psi_mod.verify_localization(psi, raise_on_boundary=True)]
    fg = syn.synthesize_field(table, psi, c.u_grid(), c.v_grid(), threads=run.threads)
    uu, vv = np.meshgrid(fg.u_grid, fg.v_grid, indexing="ij")
    run.csv("field.csv", ["u", "v", "x", "xdot", "xddot"],
            [uu.ravel(), vv.ravel(), fg.x.ravel(), fg.xdot.ravel(), fg.xddot.ravel()])
    H = c.hurst_function()
    path = syn.synthesize_lmsm(table, psi, H, c.t_grid(), threads=run.threads)
    run.csv("lmsm.csv", ["t", "h", "y"], [path.t_grid, path.h_values, path.y])
    tail = fg.metadata.get("tail_bound")
    spread = float(np.subtract(*np.quantile(fg.x, [0.75, 0.25])))
    run.json("tail_bound.json", {"tail_bound": tail, "field_iqr": spread,
                                 "localization": loc, "hurst": H.to_dict(),
                                 "truncation": fg.metadata.get("truncation")})


# -- verify ----------------------------------------------------------------


def _member_products(run, member, need_path, need_field):
    table = run.coefficients(member)
    out = {"table": table}
    if need_path:
        out["path"] = syn.synthesize_lmsm(table, run.psi, run.cfg.hurst_function(),
                                          run.cfg.t_grid())
    if need_field:
        out["field"] = syn.synthesize_field(table, run.psi, run.cfg.u_grid(), run.cfg.v_grid())
    return out


def _series_rows(reports, label):
    rows = [[], [], [], [], []]
    for m, r in enumerate(reports):
        for L, s, sc in zip(r.levels, r.sup_per_level, r.scale_sup_per_level):
            rows[0].append(m)
            rows[1].append(label)
            rows[2].append(int(L))
            rows[3].append(float(s))
            rows[4].append(float(sc))
    return rows


def _write_series(run, name, groups):
    cols = [[], [], [], [], []]
    for label, reports in groups:
        rows = _series_rows(reports, label)
        for c, r in zip(cols, rows):
            c.extend(r)
    if not cols[0]:
        return
    labels = sorted(set(cols[1]))
    code = {lab: i for i, lab in enumerate(labels)}
    run.csv(name, ["member", "statistic", "level", "sup", "scale_sup"],
            [np.array(cols[0], np.int64), np.array([code[x] for x in cols[1]], np.int64),
             np.array(cols[2], np.int64), np.array(cols[3]), np.array(cols[4])])
    return labels


def _report_block(reports):
    counts = reg.tally(reports)
    return {"tally": counts, "members": [r.to_dict() for r in reports]}


def _dict_block(entries):
    counts = dict(collections.Counter(e["classification"] for e in entries))
    for e in entries:
        e["seeds_agreeing"] = {"tally": counts, "n_seeds": len(entries),
                               "agreeing": counts[e["classification"]]}
    return {"tally": counts, "members": entries}


def suite_bounds(run, products):
    fits = [_bound_fits(run, p["table"]) for p in products]
    c0 = np.array([f["omega0"]["C_fit"] for f in fits])
    c1 = np.array([f["omega1"].get("C_fit", np.nan) for f in fits])
    run.csv("verify_bounds_series.csv", ["member", "C_fit", "C1_fit"],
            [np.arange(len(fits), dtype=np.int64), c0, c1])
    finite = int(np.sum(np.isfinite(c0) & np.isfinite(c1)))
    run.json("verify_bounds.json", {"members": fits, "eta": run.cfg.verify.eta,
                                    "l": 2.0 * (run.cfg.grids.M + 1.0),
                                    "seeds_agreeing": {"tally": {"finite": finite},
                                                       "n_seeds": len(fits)}})
    return []


def suite_holder(run, products):
    c = run.cfg
    H = c.hurst_function()
    gamma = min(H.gamma_H, H.h_range[0] - 1.0 / c.alpha)
    levels = list(c.verify.holder_levels)
    plain = reg.ModulusSpec(gamma)
    neg = reg.ModulusSpec(gamma, "neg_log_power", c.verify.neg_log_eta)
    paths = [p["path"] for p in products]
    r_plain = [reg.holder_ratio_scan(p, plain, levels) for p in paths]
    r_neg = [reg.holder_ratio_scan(p, neg, levels) for p in paths]
    est, band, osc = reg.estimate_holder_exponent(np.array([p.y for p in paths]), levels,
                                                  t=paths[0].t_grid)
    labels = _write_series(run, "verify_holder_series.csv",
                           [("critical", r_plain), ("neg_log", r_neg)])
    run.json("verify_holder.json", {"gamma_star": gamma, "critical": _report_block(r_plain),
                                    "neg_log": _report_block(r_neg),
                                    "exponent_estimate": {"estimate": est, "band": list(band),
                                                          "oscillation": osc, "levels": levels},
                                    "series_statistic_codes": labels})
    return r_plain + r_neg


def suite_joint(run, products):
    fields_ = [p["field"] for p in products]
    lip = [reg.lipschitz_in_v_scan(f) for f in fields_]
    joint = [reg.joint_modulus_scan(f, run.cfg.alpha) for f in fields_]
    labels = _write_series(run, "verify_joint_series.csv", [("lipschitz_v", lip),
                                                            ("joint", joint)])
    run.json("verify_joint.json", {"lipschitz_in_v": _report_block(lip),
                                   "joint": _report_block(joint),
                                   "series_statistic_codes": labels})
    return lip + joint


def suite_smoothness(run, products):
    fields_ = [p["field"] for p in products]
    low = [reg.low_freq_smoothness_check(f, part="xdot") for f in fields_]
    full = [reg.low_freq_smoothness_check(f, part="x") for f in fields_]
    lo_u = [s.lipschitz_u for s in low]
    fu_u = [s.lipschitz_u for s in full]
    labels = _write_series(run, "verify_smoothness_series.csv", [("xdot_lipschitz_u", lo_u),
                                                                 ("x_probe_u", fu_u)])
    run.json("verify_smoothness.json", {
        "xdot": _report_block(lo_u), "x_gamma1_probe": _report_block(fu_u),
        "xdot_second_difference": _dict_block([s.second_difference_u for s in low]),
        "xdot_lipschitz_v": (None if any(s.lipschitz_v is None for s in low)
                             else _report_block([s.lipschitz_v for s in low])),
        "series_statistic_codes": labels})
    return lo_u + fu_u


def suite_scaling(run, products):
    c = run.cfg
    H = c.hurst_function()
    if H.kind != "constant":
        raise reg.ContractError("the scaling suite needs a constant Hurst function")
    scales = [1.0] + [float(s) for s in c.verify.scales]
    t_points = np.arange(2, 9) / 32.0
    all_t = np.unique(np.concatenate([t_points * s for s in scales]))
    samples = np.array([syn.synthesize_lmsm(p["table"], run.psi, H, all_t).y for p in products])
    rep = reg.self_similarity_check(None, H, scales, len(products), t_points=t_points,
                                    samples=samples, n_boot=c.verify.n_boot)
    run.csv("verify_scaling_series.csv", ["scale", "discrepancy", "band"],
            [np.array(rep.scales), np.array(rep.discrepancy), np.array(rep.band)])
    ok = int(sum(rep.within_band))
    run.json("verify_scaling.json", {"report": rep.to_dict(),
                                     "seeds_agreeing": {"tally": {"within_band": ok},
                                                        "n_seeds": len(products)}})
    return []


SUITE_FUNCS = {"bounds": suite_bounds, "holder": suite_holder, "joint": suite_joint,
               "smoothness": suite_smoothness, "scaling": suite_scaling}


def cmd_verify(run: Run, suite="all"):
    suites = list(SUITES) if suite == "all" else [suite]
    if suite == "all" and run.cfg.hurst.kind != "constant":
        suites.remove("scaling")
    need_path = "holder" in suites
    need_field = "joint" in suites or "smoothness" in suites
    products = run.map_members(lambda m: _member_products(run, m, need_path, need_field))
    reports = []
    for s in suites:
        reports.extend(SUITE_FUNCS[s](run, products))
    if any(r.classification == "inconclusive" for r in reports):
        raise Inconclusive("at least one report is inconclusive; see the verify JSON files")


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    p = argparse.ArgumentParser(prog="lmsm", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--alpha", type=float, help="stability index in (1, 2)")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", help="output directory (default: $LMSM_OUT or ./lmsm_out)")
    common.add_argument("--threads", type=int, default=1, help="worker threads")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="simulate the Levy path")
    c = sub.add_parser("coeffs", parents=[common], help="wavelet coefficients and bound fits")
    c.add_argument("--method", choices=("direct", "ibp", "both"), default="direct")
    sub.add_parser("synthesize", parents=[common], help="field X, LMSM path and tail bound")
    v = sub.add_parser("verify", parents=[common], help="regularity and scaling diagnostics")
    v.add_argument("--suite", choices=SUITES + ("all",), default="all")
    v.add_argument("--ensemble-size", type=int, dest="ensemble_size")
    return p


def _fail(code, exc):
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if getattr(exc, "field", None):
        err["field"] = exc.field
    if getattr(exc, "min_step", None) is not None:
        err["min_step"] = exc.min_step
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        overrides = {"alpha": args.alpha, "seed": args.seed, "out": args.out,
                     "ensemble_size": getattr(args, "ensemble_size", None)}
        cfg = load_config(args.config, overrides)
        run = Run(cfg, threads=args.threads)
        if args.command == "simulate":
            cmd_simulate(run)
        elif args.command == "coeffs":
            cmd_coeffs(run, args.method)
        elif args.command == "synthesize":
            cmd_synthesize(run)
        else:
            cmd_verify(run, args.suite)
    except (psi_mod.InconclusiveRangeError, Inconclusive, reg.TrendError,
            reg.UndefinedExponentError) as exc:
        return _fail(EXIT_INCONCLUSIVE, exc)
    except (ResourceError, MemoryError) as exc:
        return _fail(EXIT_RESOURCE, exc)
    except (ValidationError, coef.RefinementError, coef.ContractError, reg.ContractError,
            syn.ConfigurationError, syn.RangeError, psi_mod.DomainError, GridAlignmentError,
            SupportError, ValueError, OSError) as exc:
        return _fail(EXIT_VALIDATION, exc)
    print(json.dumps({"written": run.written, "directory": run.out,
                      "provenance_hash": run.hash}, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
