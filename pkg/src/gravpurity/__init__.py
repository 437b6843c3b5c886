"""Purity loss of a self-gravitating free Gaussian wavepacket.

Closed-form kernels, a Monte-Carlo purity estimator with rigorous error
bars, independent verification oracles, and a figure-table pipeline.
All computation is in Planck units (hbar = c = G = 1).
"""

__version__ = "0.1.0"

from .closedform import (  # noqa: F401
    KU_THRESHOLD,
    NoEvolutionWindowError,
    RegionLabel,
    bracket_b,
    classify_region,
    kinetic_over_potential,
    msq_momentum,
    msq_position,
    pair_wavefunction,
    phase,
    regularized_distance,
    sigma_b,
    t_f,
)
from .mcpurity import (  # noqa: F401
    Estimate,
    McConfig,
    PurityCurve,
    PurityEstimate,
    RegionViolationError,
    estimate_purity,
    final_purity,
    phase_delta,
    purity_curve,
    short_time_coefficient,
)
from .units import (  # noqa: F401
    DerivedScales,
    InvalidParameterError,
    ModelParams,
    SigmaSpec,
    derive,
    resolve_sigma,
    to_si,
)
