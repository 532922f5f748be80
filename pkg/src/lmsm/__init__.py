"""Wavelet-series synthesis of linear fractional and multifractional stable motion."""

__version__ = "0.1.0"

from .stable import (LevyPathGrid, RandomStream, StableParams, integrate_by_parts,  # noqa: E402
                     integrate_step, sample_sas, simulate_levy_path)
from .wavelet import WaveletSpec, WaveletTable, build_wavelet_table  # noqa: E402
from .psi import PsiTable, compute_psi, tabulate_psi, verify_localization  # noqa: E402
from .coefficients import (CoefficientTable, CoefficientWindow, check_bound_omega0,  # noqa: E402
                           check_bound_omega1, compute_coefficients_direct,
                           compute_coefficients_ibp, simulate_window_path)
from .synthesis import (FieldGrid, HurstFunction, LmsmPath, synthesize_field,  # noqa: E402
                        synthesize_lmsm, truncation_error_estimate)
from .regularity import (ModulusSpec, estimate_holder_exponent, holder_ratio_scan,  # noqa: E402
                         joint_modulus_scan, lipschitz_in_v_scan, low_freq_smoothness_check,
                         self_similarity_check)
