"""Coverage analysis for feedback-aided IoT uplink over Rayleigh fading.

The public surface re-exports the most used entry points; submodules hold
the rest.
"""

__version__ = "0.1.0"

from .config import ConfigError, SystemConfig, default_config, load_config
from .coverage import (
    CoverageCurve,
    aps_feedback,
    aps_forward,
    coverage_curve,
    coverage_feedback_closed,
    coverage_feedback_exact,
    coverage_feedback_gl,
    coverage_forward,
    prop1_coefficients,
)
from .montecarlo import McEstimate, mc_connectable_aps, mc_coverage
from .thresholds import critical_snr_feedback, critical_snr_forward

__all__ = [
    "ConfigError", "SystemConfig", "default_config", "load_config",
    "CoverageCurve", "coverage_curve", "coverage_forward", "coverage_feedback_exact",
    "coverage_feedback_gl", "coverage_feedback_closed", "prop1_coefficients",
    "aps_forward", "aps_feedback", "McEstimate", "mc_coverage", "mc_connectable_aps",
    "critical_snr_forward", "critical_snr_feedback",
]
