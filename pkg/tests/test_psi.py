import dataclasses

import numpy as np
import pytest
from scipy import integrate

from lmsm import psi as P
from lmsm.wavelet import eval_psi_wavelet

ALPHA = 1.5


def quad_oracle(wavelet, x, v, p=0):
    """Adaptive QUADPACK integral with the algebraic end-point weight (x - s)^kappa."""
    kappa = v - 1.0 / ALPHA
    hi = min(x, wavelet.support[1])
    val, _ = integrate.quad(lambda s: eval_psi_wavelet(wavelet, s, p), wavelet.support[0], hi,
                            weight="alg", wvar=(0.0, kappa), limit=2000, epsabs=1e-12,
                            epsrel=1e-9)
    return val


@pytest.mark.parametrize("v", [0.5, 1 / ALPHA, 1.0, 1.2])
def test_v_outside_domain(wavelet, v):
    with pytest.raises(P.DomainError):
        P.compute_psi(2.0, v, wavelet, ALPHA)


@pytest.mark.parametrize("x", [-3.0, -1e-6, 0.0])
def test_zero_left_of_support(wavelet, x):
    for p in range(4):
        assert P.compute_psi_derivative(x, 0.8, p, 1, wavelet, ALPHA) == 0.0


@pytest.mark.parametrize("x", [2.0, 7.3])
def test_against_adaptive_quadrature(wavelet, x):
    ours = P.compute_psi(x, 0.8, wavelet, ALPHA)
    assert ours == pytest.approx(quad_oracle(wavelet, x, 0.8), rel=1e-4)


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_x_derivative_against_adaptive_quadrature(wavelet):
    ours = P.compute_psi_derivative(5.5, 0.75, 2, 0, wavelet, ALPHA)
    assert ours == pytest.approx(quad_oracle(wavelet, 5.5, 0.75, p=2), rel=1e-4)


def test_p0_q0_is_psi(wavelet):
    assert P.compute_psi_derivative(3.1, 0.8, 0, 0, wavelet, ALPHA) == \
        P.compute_psi(3.1, 0.8, wavelet, ALPHA)


@pytest.mark.parametrize("x", [2.0, 6.0, 13.7])
def test_x_derivative_finite_difference(wavelet, x):
    h = 1e-4
    fd = (P.compute_psi(x + h, 0.8, wavelet, ALPHA) - P.compute_psi(x - h, 0.8, wavelet, ALPHA)) / (2 * h)
    assert P.compute_psi_derivative(x, 0.8, 1, 0, wavelet, ALPHA) == pytest.approx(fd, rel=1e-3)


@pytest.mark.parametrize("x", [2.0, 6.0, 13.7])
def test_v_derivative_finite_difference(wavelet, x):
    h = 1e-4
    fd = (P.compute_psi(x, 0.8 + h, wavelet, ALPHA) - P.compute_psi(x, 0.8 - h, wavelet, ALPHA)) / (2 * h)
    assert P.compute_psi_derivative(x, 0.8, 0, 1, wavelet, ALPHA) == pytest.approx(fd, rel=1e-3)


def test_weighted_decay_stabilizes(wavelet):
    xs = np.linspace(5, 100, 400)
    w = np.array([(3 + x) ** 2 * abs(P.compute_psi(x, 0.8, wavelet, ALPHA)) for x in xs])
    assert np.isfinite(w).all()
    assert w[xs > 50].max() <= w[xs <= 50].max()


def test_table_interpolation_against_direct(psi_table_v, wavelet, rng):
    xs = rng.uniform(0, 40, 200)
    vs = rng.uniform(0.7, 0.9, 200)
    direct = np.array([P.compute_psi(x, v, wavelet, ALPHA) for x, v in zip(xs, vs)])
    interp = psi_table_v(xs, vs)
    assert np.max(np.abs(interp - direct)) < 1e-3 * np.max(np.abs(direct))
    assert np.median(np.abs(interp - direct) / np.abs(direct)) < 1e-3


def test_interpolation_error_shrinks_with_density(wavelet, rng):
    xs = rng.uniform(0, 40, 100)
    errs = []
    for cw in (1 / 8, 1 / 16, 1 / 32):
        q = P.QuadConfig(cell_width=cw)
        t = P.tabulate_psi(wavelet, ALPHA, (0.7, 0.9), n_v=8, x_max=60.0, quad=q)
        direct = np.array([P.compute_psi(x, 0.8, wavelet, ALPHA, q) for x in xs])
        errs.append(np.max(np.abs(t(xs, 0.8) - direct)))
    assert errs[0] > errs[1] > errs[2]


def test_table_nodes_match_direct(psi_table_v, wavelet):
    i = [10, 400, 1000]
    for p, q in ((0, 0), (1, 0), (0, 1)):
        vals = psi_table_v.values[(p, q)][3, i]
        direct = [P.compute_psi_derivative(x, psi_table_v.v_grid[3], p, q, wavelet, ALPHA)
                  for x in psi_table_v.x_grid[i]]
        assert np.allclose(vals, direct, rtol=1e-9, atol=1e-14)


def test_table_zero_region_exact(psi_table_v):
    x = np.array([-1.0, -0.01, 0.0])
    assert np.array_equal(psi_table_v(x, 0.8), np.zeros(3))


def test_table_rejects_v_outside_range(psi_table_v):
    with pytest.raises(P.DomainError):
        psi_table_v(1.0, 0.95)


def test_v_lipschitz_on_random_triples(psi_table_v, rng):
    bound = np.max(np.abs(psi_table_v.values[(0, 1)]))
    x = rng.uniform(0, 50, 300)
    v1, v2 = rng.uniform(0.7, 0.9, (2, 300))
    diff = np.abs(psi_table_v(x, v1) - psi_table_v(x, v2))
    assert np.all(diff <= bound * np.abs(v1 - v2) * (1 + 1e-3) + 1e-12)


def test_localization_interior_and_stable(wavelet):
    sups = []
    for x_max in (60.0, 120.0):
        t = P.tabulate_psi(wavelet, ALPHA, (0.7, 0.9), n_v=8, x_max=x_max)
        (rep,) = P.verify_localization(t)
        assert not rep.boundary_flag
        assert t.x_min < rep.argmax_x < t.x_max
        sups.append(rep.sup_value)
    assert abs(sups[1] / sups[0] - 1) < 0.01


def test_localization_reports_every_pair(psi_table):
    reps = P.verify_localization(psi_table)
    assert [(r.p, r.q) for r in reps] == [(0, 0), (1, 0), (2, 0), (3, 0)]
    assert all(np.isfinite(r.sup_value) and r.sup_value > 0 for r in reps)
    assert set(reps[0].to_dict()) == {"p", "q", "sup_value", "argmax_x", "boundary_flag"}


def test_truncated_decay_is_flagged(psi_table_v):
    # a fixture whose weighted values grow with x: the sup lands on the edge
    grow = psi_table_v.values[(0, 0)] * 0 + (3 + np.abs(psi_table_v.x_grid))[None, :] ** -1
    bad = dataclasses.replace(psi_table_v, values={(0, 0): grow})
    with pytest.raises(P.InconclusiveRangeError):
        P.verify_localization(bad)
    (rep,) = P.verify_localization(bad, raise_on_boundary=False)
    assert rep.boundary_flag


def test_default_x_max_meets_ratio(wavelet, psi_table):
    peak = np.max(np.abs(psi_table.values[(0, 0)]))
    assert (3 + psi_table.x_max) ** -2 < 1e-4 * peak


def test_csv_export(psi_table_v, tmp_path):
    from lmsm.io import read_csv
    P.save_psi_table(psi_table_v, tmp_path / "p.csv", tmp_path / "p.json")
    header, data = read_csv(tmp_path / "p.csv")
    assert header == ["x", "v", "p", "q", "value"]
    assert data.shape[0] == sum(a.size for a in psi_table_v.values.values())
