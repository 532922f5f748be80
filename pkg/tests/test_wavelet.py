import math

import numpy as np
import pytest
import pywt

from lmsm.wavelet import (WaveletConstructionError, WaveletSpec, build_wavelet_table,
                          daubechies_filter, eval_psi_wavelet, load_wavelet_table, lp_norm,
                          save_wavelet_table, wavelet_moments)


def test_spec_floors():
    with pytest.raises(ValueError):
        WaveletSpec(order=10)
    with pytest.raises(ValueError):
        WaveletSpec(table_level=6)


def test_filter_matches_pywavelets():
    assert np.allclose(daubechies_filter(12), pywt.Wavelet("db12").rec_lo, atol=1e-14)


def test_table_tolerances(wavelet):
    md = wavelet.metadata
    assert abs(md["integral"]) < 1e-8
    assert abs(md["l2_norm_sq"] - 1) < 1e-6
    assert md["max_moment"] < wavelet.spec.tolerance
    assert md["partition_of_unity_error"] < 1e-12


def test_vanishing_moments_recomputed(wavelet):
    m = wavelet_moments(wavelet.x, wavelet.values[0], wavelet.order)
    assert np.max(np.abs(m)) < 1e-6


def test_unit_l2_norm(wavelet):
    assert lp_norm(wavelet, 2.0) == pytest.approx(1.0, abs=1e-8)


def test_cascade_reference_converges_to_table(wavelet):
    # the PyWavelets cascade has O(2^-L) error, so its distance to our table
    # should drop by about 4 every two levels
    errs = []
    for level in (10, 12):
        _, psi, x = pywt.Wavelet("db12").wavefun(level=level)
        errs.append(np.max(np.abs(eval_psi_wavelet(wavelet, x) - psi)))
    assert errs[1] < 2.5e-3
    assert 3.0 < errs[0] / errs[1] < 5.0


@pytest.mark.parametrize("p", [0, 1, 2, 3])
def test_zero_outside_support(wavelet, p):
    x = np.array([-5.0, -1e-9, 0.0, 23.0, 23.5, 100.0])
    assert np.array_equal(eval_psi_wavelet(wavelet, x, p), np.zeros(6))


@pytest.mark.parametrize("p", [0, 1, 2, 3])
def test_nodes_reproduced_exactly(wavelet, p, rng):
    idx = rng.integers(0, wavelet.x.shape[0], 200)
    assert np.array_equal(eval_psi_wavelet(wavelet, wavelet.x[idx], p), wavelet.values[p][idx])


def test_scalar_in_scalar_out(wavelet):
    assert isinstance(eval_psi_wavelet(wavelet, 3.3), float)


def test_bad_derivative_order(wavelet):
    with pytest.raises(ValueError):
        eval_psi_wavelet(wavelet, 1.0, 4)


def test_first_derivative_against_finite_difference(wavelet, rng):
    x = rng.uniform(0.0, 23.0, 1000)
    h = 2.0 ** -(wavelet.spec.table_level + 2)
    fd = (eval_psi_wavelet(wavelet, x + h) - eval_psi_wavelet(wavelet, x - h)) / (2 * h)
    d = eval_psi_wavelet(wavelet, x, 1)
    assert np.max(np.abs(fd - d)) < 1e-3 * np.max(np.abs(wavelet.values[1]))


@pytest.mark.parametrize("p", [1, 2])
def test_derivative_consistency_order(wavelet, p, rng):
    x = rng.uniform(0.01, 22.99, 1000)
    d = eval_psi_wavelet(wavelet, x, p)
    hs = 2.0 ** -np.arange(10, 15, 2)
    errs = [np.max(np.abs((eval_psi_wavelet(wavelet, x + h, p - 1)
                           - eval_psi_wavelet(wavelet, x - h, p - 1)) / (2 * h) - d)) for h in hs]
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 1.5 < slope < 2.5


def test_third_derivative_consistency(wavelet, rng):
    x = rng.uniform(0.01, 22.99, 1000)
    d = eval_psi_wavelet(wavelet, x, 3)
    errs = []
    for h in (2.0 ** -10, 2.0 ** -12, 2.0 ** -14):
        fd = (eval_psi_wavelet(wavelet, x + h, 2) - eval_psi_wavelet(wavelet, x - h, 2)) / (2 * h)
        errs.append(np.max(np.abs(fd - d)))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 2e-3 * np.max(np.abs(wavelet.values[3]))


def test_construction_error_names_violation():
    with pytest.raises(WaveletConstructionError, match="violated"):
        build_wavelet_table(WaveletSpec(order=12, table_level=8, tolerance=1e-300))


def test_csv_round_trip(wavelet, tmp_path):
    save_wavelet_table(wavelet, tmp_path / "w.csv", tmp_path / "w.json")
    back = load_wavelet_table(tmp_path / "w.csv", tmp_path / "w.json")
    assert back.support == wavelet.support
    for p in range(4):
        assert np.allclose(back.values[p], wavelet.values[p], rtol=1e-15, atol=0)
    x = np.linspace(0.1, 22.9, 57)
    assert np.allclose(eval_psi_wavelet(back, x, 2), eval_psi_wavelet(wavelet, x, 2),
                       rtol=1e-12, atol=1e-12)


def test_header_and_metadata(wavelet, tmp_path):
    import json
    save_wavelet_table(wavelet, tmp_path / "w.csv", tmp_path / "w.json")
    first = [ln for ln in open(tmp_path / "w.csv") if not ln.startswith("#")][0]
    assert first.strip() == "x,psi,dpsi,d2psi,d3psi"
    meta = json.load(open(tmp_path / "w.json"))
    assert meta["order"] == 12 and meta["level"] == 14
    assert meta["support"] == [0.0, 23.0]
    assert math.isfinite(meta["tolerances"]["max_moment"])
