"""
From a Levy path to wavelet coefficients
========================================

Draw one symmetric alpha-stable Levy path, turn it into the random
coefficients eps_{j,k} by two routes, and look at what the coefficients
look like in aggregate.
"""

import numpy as np

from lmsm import coefficients as C
from lmsm.stable import RandomStream, StableParams, quantile_scale, sample_sas
from lmsm.wavelet import WaveletSpec, build_wavelet_table, lp_norm

alpha = 1.5
params = StableParams(alpha)

# the Daubechies wavelet is tabulated once on a dyadic grid (a few seconds)
W = build_wavelet_table(WaveletSpec(order=12, table_level=14))
print("wavelet support:", W.support, " L^alpha norm:", round(lp_norm(W, alpha), 4))

# SaS variates: the quantile scale of a large draw recovers sigma
x = sample_sas(params, 200_000, RandomStream(1))
print("quantile scale of 2e5 unit draws:", round(quantile_scale(x, alpha), 4))

# one path, resolved finely enough for levels 0..8 of the window
win = C.CoefficientWindow(0, 8, padding=8)
pyr = C.simulate_window_path(params, win, W.width, RandomStream(7), path_level=14)
direct = C.compute_coefficients_direct(pyr, W, win)
ibp = C.compute_coefficients_ibp(pyr, W, win)
print("coefficients in window:", direct.eps.size)

# both routes estimate the same integral; the gap concentrates at large jumps
gap = C.route_discrepancy(direct, ibp)
print("route discrepancy  max %.2e  median %.2e" % (gap["max_abs"], gap["median_abs"]))

# each eps_{j,k} is SaS with scale ||psi||_alpha, whatever (j, k)
print("pooled scale / ||psi||_alpha:",
      round(quantile_scale(direct.eps, alpha) / lp_norm(W, alpha), 3))

# the largest coefficients sit where the path jumps hardest
js, ks, eps = direct.index_arrays()
top = np.argsort(-np.abs(eps))[:3]
for i in top:
    print("  j=%d k=%d eps=%.3f" % (js[i], ks[i], eps[i]))

# growth envelopes: C_fit for the two bounds
print("omega0 C_fit (eta 0.1):", round(C.check_bound_omega0(direct, 0.1).C_fit, 3))
print("omega1 C'_fit (l = 4): ", round(C.check_bound_omega1(direct, 4.0).C_fit, 3))
