"""Global, local and derivative sensitivity with noise calibration."""
from pleak.sensitivity.analysis import derivative_analysis
from pleak.sensitivity.globalsens import GlobalSensitivityMatrix, global_sensitivity, task_sensitivity
from pleak.sensitivity.local import LocalSensitivity, local_row_sensitivity
from pleak.sensitivity.noise import CalibrationResult, SmoothParams, calibrate_noise, gen_cauchy_quantile
from pleak.sensitivity.norm import NormSpec, format_norm, parse_norm
from pleak.sensitivity.smooth import SmoothFunction, derivative_sensitivity, smooth_bound, smooth_lower

__all__ = [
    "CalibrationResult", "GlobalSensitivityMatrix", "LocalSensitivity", "NormSpec", "SmoothFunction",
    "SmoothParams", "calibrate_noise", "derivative_analysis", "derivative_sensitivity", "format_norm",
    "gen_cauchy_quantile", "global_sensitivity", "local_row_sensitivity", "parse_norm", "smooth_bound",
    "smooth_lower", "task_sensitivity",
]
