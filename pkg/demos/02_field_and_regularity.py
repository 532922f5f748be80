"""
Synthesizing the field and reading off its regularity
=====================================================

Build X(u, v) on a grid, cut out a multifractional path Y(t) = X(t, H(t)),
then ask the regularity scans what they see.
"""

import numpy as np

from lmsm import coefficients as C
from lmsm import psi as P
from lmsm import regularity as R
from lmsm import synthesis as S
from lmsm.stable import RandomStream, StableParams
from lmsm.wavelet import WaveletSpec, build_wavelet_table

alpha = 1.5
W = build_wavelet_table(WaveletSpec(order=12, table_level=14))

# kernel table with the x-derivatives used by the Taylor shortcut
psi = P.tabulate_psi(W, alpha, (0.69, 0.91),
                     derivatives=((0, 0), (1, 0), (2, 0), (3, 0)))
for rep in P.verify_localization(psi):
    print("sup (3+|x|)^2 |d^%d Psi| = %.3f at x = %.2f" % (rep.p, rep.sup_value, rep.argmax_x))

# coefficients from level -30 (far field) up to level 13 (fine detail)
win = C.CoefficientWindow(-30, 13)
pyr = C.simulate_window_path(StableParams(alpha), win, W.width, RandomStream(11),
                             path_level=17)
coeffs = C.compute_coefficients_direct(pyr, W, win)
del pyr

u = np.linspace(-1, 1, 257)
v = np.linspace(0.7, 0.9, 17)
F = S.synthesize_field(coeffs, psi, u, v)
print("field shape:", F.x.shape, " X(0, v) == 0:", bool(np.all(F.x[128] == 0)))
print("tail bound (worst case):", "%.3g" % F.metadata["tail_bound"]["total"])

# the low-frequency part is smooth, the full field is not Lipschitz in u
lo = R.low_freq_smoothness_check(F)
hi = R.low_freq_smoothness_check(F, part="x")
print("Xdot Lipschitz in u:", lo.lipschitz_u.classification,
      "  X at gamma = 1:", hi.lipschitz_u.classification)
print("X Lipschitz in v:   ", R.lipschitz_in_v_scan(F).classification)

# a path with H oscillating in [0.7, 0.9]
H = S.HurstFunction.sinusoidal(0.8, 0.1)
t = np.linspace(0, 1, 2 ** 12 + 1)
Y = S.synthesize_lmsm(coeffs, psi, H, t)
g = min(H.gamma_H, H.h_range[0] - 1 / alpha)
rep = R.holder_ratio_scan(Y, R.ModulusSpec(g), range(7, 13))
print("critical gamma %.4f -> %s, slope %.3f" % (g, rep.classification, rep.slope))
for L, s in zip(rep.levels, rep.scale_sup_per_level):
    print("   level %2d   sup ratio %.3f" % (L, s))

# uniform exponent of a constant-H path: near H - 1/alpha, with a wide band for one path
lfsm = S.synthesize_lmsm(coeffs, psi, S.HurstFunction.constant(0.85), t)
est, band, _ = R.estimate_holder_exponent(lfsm.y, range(4, 13), t=t)
print("LFSM H=0.85: exponent %.3f  band (%.3f, %.3f)  expected %.3f"
      % (est, band[0], band[1], 0.85 - 1 / alpha))
