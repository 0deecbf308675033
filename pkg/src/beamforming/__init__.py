"""
Beamforming Package
- Rate evaluation and its exact phase gradient
- Water-filling power allocation
- Wave-based beamforming optimizers and the multiuser schemes
"""

from src.beamforming.rates import PowerAllocation, RateReport, sum_rate, sumrate_gradient
from src.beamforming.schemes import (
    DEFAULT_SCHEMES,
    SCHEME_REGISTRY,
    BaseScheme,
    TrialContext,
    build_scheme,
)

__all__ = [
    'PowerAllocation', 'RateReport', 'sum_rate', 'sumrate_gradient',
    'DEFAULT_SCHEMES', 'SCHEME_REGISTRY', 'BaseScheme', 'TrialContext', 'build_scheme',
]
