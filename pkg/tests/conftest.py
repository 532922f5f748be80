import numpy as np
import pytest

from lmsm import psi as P
from lmsm.wavelet import WaveletSpec, build_wavelet_table

ALPHA = 1.5
PSI_V_RANGE = (0.69, 0.91)
PSI_DERIVS = ((0, 0), (1, 0), (2, 0), (3, 0))

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def wavelet():
    return build_wavelet_table(WaveletSpec(order=12, table_level=14))


@pytest.fixture(scope="session")
def psi_table(wavelet):
    return P.tabulate_psi(wavelet, ALPHA, PSI_V_RANGE, derivatives=PSI_DERIVS)


@pytest.fixture(scope="session")
def psi_table_v(wavelet):
    """Small table with v-derivatives, for kernel-level checks."""
    return P.tabulate_psi(wavelet, ALPHA, (0.7, 0.9), n_v=8, x_max=60.0,
                          derivatives=((0, 0), (1, 0), (0, 1), (0, 2)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one line per acceptance criterion; printed in the terminal summary."""
    def record(number, passed, detail, expected_failure=None):
        status = "PASS" if passed else "FAIL"
        if not passed and expected_failure:
            status += " (xfail)"
        line = f"criterion {number:>2}: {status}  {detail}"
        _ACCEPTANCE_LINES.append((number, line))
        print(line)
        return line
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


LFSM_H = 0.8
LFSM_T_POINTS = tuple(np.arange(2, 9) / 32.0)
LFSM_SCALES = (2.0, 4.0)


@pytest.fixture(scope="session")
def lfsm_ensemble(wavelet, psi_table):
    """500 LFSM members (H = 0.8) at t_points and their images under the scales.

    Returns (all_t, samples) with samples of shape (500, len(all_t)).
    """
    from lmsm import coefficients as C
    from lmsm import synthesis as S
    from lmsm.stable import RandomStream, StableParams

    win = C.CoefficientWindow(-40, 10)
    hurst = S.HurstFunction.constant(LFSM_H)
    tp = np.asarray(LFSM_T_POINTS)
    all_t = np.unique(np.concatenate([tp * c for c in LFSM_SCALES] + [tp]))
    rows = []
    for m in range(500):
        pyr = C.simulate_window_path(StableParams(ALPHA), win, wavelet.width,
                                     RandomStream(5000 + m), path_level=14)
        co = C.compute_coefficients_direct(pyr, wavelet, win)
        rows.append(S.synthesize_lmsm(co, psi_table, hurst, all_t).y)
    return all_t, np.array(rows)
