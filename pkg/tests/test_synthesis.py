import math

import numpy as np
import pytest

from lmsm import coefficients as C
from lmsm import regularity as R
from lmsm import synthesis as S
from lmsm.psi import DomainError
from lmsm.stable import RandomStream, StableParams

ALPHA = 1.5
U = np.linspace(-1, 1, 257)
V = np.array([0.7, 0.8, 0.9])


def _coeffs(wavelet, j_max, seed=0, path_level=18):
    win = C.CoefficientWindow(-40, j_max)
    pyr = C.simulate_window_path(StableParams(ALPHA), win, wavelet.width, RandomStream(seed),
                                 path_level=path_level)
    return C.compute_coefficients_direct(pyr, wavelet, win)


@pytest.fixture(scope="module")
def coeffs(wavelet):
    return _coeffs(wavelet, 12)


@pytest.fixture(scope="module")
def field(coeffs, psi_table):
    return S.synthesize_field(coeffs, psi_table, U, V)


# -- Hurst functions ----------------------------------------------------------------

def test_hurst_kinds():
    t = np.linspace(0, 1, 9)
    assert np.array_equal(S.HurstFunction.constant(0.8)(t), np.full(9, 0.8))
    h = S.HurstFunction.sinusoidal(0.8, 0.1)
    assert h.h_range == (pytest.approx(0.7), pytest.approx(0.9))
    assert h(0.25) == pytest.approx(0.9)
    aff = S.HurstFunction("affine_clipped", {"intercept": 0.6, "slope": 0.5, "lo": 0.7, "hi": 0.85})
    assert aff(np.array([0.0, 0.3, 1.0])).tolist() == pytest.approx([0.7, 0.75, 0.85])
    tab = S.HurstFunction("user_tabulated", {"t": [0, 1], "h": [0.7, 0.9]})
    assert tab(0.5) == pytest.approx(0.8)


def test_hurst_rejects_bad_input():
    with pytest.raises(ValueError):
        S.HurstFunction("spline", {})
    with pytest.raises(ValueError):
        S.HurstFunction("sinusoidal", {"center": 0.8})
    with pytest.raises(ValueError):
        S.HurstFunction.sinusoidal(0.8, 0.1, holder_order=1.5)
    with pytest.raises(DomainError):
        S.HurstFunction.sinusoidal(0.7, 0.1).validate(ALPHA)


@pytest.mark.parametrize("g", [1.0, 0.5])
def test_hurst_holder_probe_finite(g):
    h = S.HurstFunction.sinusoidal(0.8, 0.1, holder_order=g)
    assert h.gamma_H == g
    probes = [h.holder_probe(level) for level in (10, 12, 14)]
    assert all(math.isfinite(p) for p in probes)
    assert probes[2] < 1.05 * probes[0]


# -- fields -------------------------------------------------------------------------

def test_zero_table_gives_zero_field(coeffs, psi_table):
    fg = S.synthesize_field(coeffs.scaled(0.0), psi_table, U[::16], V)
    assert not np.any(fg.x) and not np.any(fg.xdot) and not np.any(fg.xddot)
    assert not np.any(S.synthesize_low_frequency(coeffs.scaled(0.0), psi_table, U[::16], V).xdot)
    assert not np.any(S.synthesize_high_frequency(coeffs.scaled(0.0), psi_table, U[::16], V).xddot)


def test_parts_add_up_exactly(field):
    assert np.array_equal(field.x, field.xdot + field.xddot)


def test_part_functions_match_field(coeffs, psi_table, field):
    lo = S.synthesize_low_frequency(coeffs, psi_table, U, V)
    hi = S.synthesize_high_frequency(coeffs, psi_table, U, V)
    assert np.array_equal(lo.xdot, field.xdot) and np.array_equal(hi.xddot, field.xddot)


def test_field_vanishes_at_origin(field):
    i0 = int(np.argmin(np.abs(U)))
    assert U[i0] == 0.0
    assert np.max(np.abs(field.x[i0])) <= field.metadata["tail_bound"]["total"]
    assert np.all(field.x[i0] == 0.0)


def test_threads_do_not_change_bits(coeffs, psi_table, field):
    fg4 = S.synthesize_field(coeffs, psi_table, U, V, threads=4)
    assert np.array_equal(fg4.x, field.x) and np.array_equal(fg4.xdot, field.xdot)


def test_low_part_second_differences_bounded(field):
    rep = R.low_freq_smoothness_check(field, levels=range(4, 9))
    assert rep.second_difference_u["classification"] == "bounded"


@pytest.mark.parametrize("iv", [0, 1, 2])
def test_high_part_holder_at_v_minus_inverse_alpha(field, iv):
    mod = R.ModulusSpec(V[iv] - 1 / ALPHA)
    assert R.holder_ratio_scan((U, field.xddot[:, iv]), mod, range(4, 9)).classification == "bounded"


def test_window_too_narrow(wavelet, psi_table):
    win = C.CoefficientWindow(-2, 2, padding=0)
    pyr = C.simulate_window_path(StableParams(ALPHA), win, wavelet.width, RandomStream(0))
    co = C.compute_coefficients_direct(pyr, wavelet, win)
    with pytest.raises(S.ConfigurationError):
        S.synthesize_field(co, psi_table, U, V)


def test_v_outside_table(coeffs, psi_table):
    with pytest.raises(S.RangeError):
        S.synthesize_field(coeffs, psi_table, U, np.array([0.95]))


def test_scale_grows_like_power_of_u(lfsm_ensemble):
    # X(u, v0) is v0-self-similar in u, so its quantile spread scales like u^v0
    all_t, samples = lfsm_ensemble
    iqr = np.subtract(*np.quantile(samples, [0.75, 0.25], axis=0))
    slope = np.polyfit(np.log(all_t), np.log(iqr), 1)[0]
    assert slope == pytest.approx(0.8, abs=0.05)


# -- paths --------------------------------------------------------------------------

def test_constant_h_matches_field_slice(coeffs, psi_table, field):
    y = S.synthesize_lmsm(coeffs, psi_table, S.HurstFunction.constant(0.8), U[U >= 0])
    assert np.array_equal(y.y, field.x[U >= 0, 1])


def test_sinusoidal_path_finite_and_continuous(coeffs, psi_table):
    h = S.HurstFunction.sinusoidal(0.8, 0.1)
    t = np.linspace(0, 1, 2 ** 12 + 1)
    y = S.synthesize_lmsm(coeffs, psi_table, h, t)
    assert np.isfinite(y.y).all()
    incs = [np.max(np.abs(np.diff(y.y[::2 ** (12 - L)]))) for L in (6, 8, 10, 12)]
    assert incs[-1] < incs[0]
    assert y.y[0] == 0.0


def test_path_depends_on_h_locally(coeffs, psi_table):
    t = np.linspace(0, 1, 513)
    h1 = S.HurstFunction("user_tabulated", {"t": [0, 0.5, 1], "h": [0.75, 0.8, 0.85]})
    h2 = S.HurstFunction("user_tabulated", {"t": [0, 0.5, 1], "h": [0.75, 0.8, 0.72]})
    y1 = S.synthesize_lmsm(coeffs, psi_table, h1, t).y
    y2 = S.synthesize_lmsm(coeffs, psi_table, h2, t).y
    left = t <= 0.5
    assert np.array_equal(y1[left], y2[left])
    assert not np.array_equal(y1, y2)


# -- truncation ---------------------------------------------------------------------

def _budget():
    return {"alpha": ALPHA, "a": 0.7, "b": 0.9, "M": 1.0, "eta": 0.1, "x_max": 230.0}


def test_tail_bound_decreases_with_window():
    fits = {"C_fit": 1.0, "C1_fit": 1.0}
    loc = {"C0": 40.0, "C1": 60.0}
    a = S.truncation_error_estimate(C.CoefficientWindow(-40, 12), _budget(), fits, loc)
    b = S.truncation_error_estimate(C.CoefficientWindow(-41, 13), _budget(), fits, loc)
    assert b.total < a.total
    assert b.high_levels < a.high_levels and b.low_levels < a.low_levels


def test_k_tail_linear_in_decay_constants():
    fits = {"C_fit": 1.0, "C1_fit": 1.0}
    win = C.CoefficientWindow(-40, 12)
    a = S.truncation_error_estimate(win, _budget(), fits, {"C0": 40.0, "C1": 60.0})
    b = S.truncation_error_estimate(win, _budget(), fits, {"C0": 80.0, "C1": 120.0})
    assert b.k_tail == pytest.approx(2 * a.k_tail, rel=1e-12)


def test_tail_bound_needs_inputs():
    with pytest.raises(C.ContractError):
        S.truncation_error_estimate(C.CoefficientWindow(0, 1), _budget(), {"C_fit": 1.0},
                                    {"C0": 1.0, "C1": 1.0})


def test_tail_bound_covers_observed_truncation_change(wavelet, psi_table, field):
    wide = S.synthesize_field(_coeffs(wavelet, 14), psi_table, U, V)
    change = np.max(np.abs(wide.x - field.x))
    assert 0 < change <= field.metadata["tail_bound"]["total"]


@pytest.mark.xfail(strict=True, reason=(
    "the analytic bound uses worst-case envelopes and exceeds the field's IQR by orders of "
    "magnitude; even the observed j_max 12 -> 14 change is about 1e-2 of the IQR"))
def test_tail_bound_below_thousandth_of_iqr(field):
    iqr = float(np.subtract(*np.percentile(field.x, [75, 25])))
    assert field.metadata["tail_bound"]["total"] < 1e-3 * iqr


def test_csv_outputs(field, tmp_path):
    from lmsm.io import read_csv
    S.save_field(field, tmp_path / "f.csv", tmp_path / "f.json")
    header, data = read_csv(tmp_path / "f.csv")
    assert header == ["u", "v", "x", "xdot", "xddot"]
    assert data.shape == (U.size * V.size, 5)
