"""Blow-up criteria and radial simulation for a quasilinear chemotaxis system."""

from .params import ModelParams, ParamValidationError, RadialTable, unit_sphere_area
from .regions import (
    GammaWindow,
    RegionLabel,
    classify_region,
    classify_thm2,
    exponent_p0,
    gamma_window,
    kappa_threshold,
    kappa_thresholds,
    kappa_threshold_thm2,
    region_grid,
    theta_exponent,
    thm2_grid,
)
from .grids import MassGrid
from .elliptic import ChemoField, solve_chemo_bvp
from .dynamics import (
    BlowupReport,
    MassState,
    check_power_bound,
    init_profile,
    reconstruct_u,
    run,
    step,
)
from .moments import (
    MomentSample,
    beta_function,
    integrals_I,
    phi,
    phi0_lower_bound,
    psi_alpha,
    riccati_blowup_time,
    verify_keyineq,
    verify_lemma_bounds,
)

__version__ = "0.1.0"
