"""Bandlimited, localized, nearly tight frames on discretized domains.

The package builds multiscale frames from band-filtered averaging functionals
over dyadic cube covers of a gridded domain, certifies their frame bounds and
localization numerically, reconstructs functions by the frame algorithm, and
computes three equivalent Besov-type smoothness norms from the same data.
"""

__version__ = "0.1.0"

from .besov import (
    BesovParams,
    BesovReport,
    best_approx,
    besov_norm_approx,
    besov_norm_frame,
    besov_norm_lp,
    besov_report,
    inequality_suite,
)
from .config import RunConfig, config_from_dict, config_from_file
from .covers import (
    CubeCover,
    Functional,
    build_cover,
    functional_integral,
    make_functionals,
    spacing_for_level,
)
from .eigen import (
    EigenBasis,
    dim_resolved_span,
    load_eigenbasis,
    save_eigenbasis,
    solve_lowest,
    spectral_apply,
)
from .errors import (
    AssemblyError,
    CacheMismatchError,
    CalibrationError,
    ConfigurationError,
    ContractViolation,
    EmptyDomainError,
    FrameLabError,
    SolverError,
    SuiteViolation,
    UnresolvedBandError,
)
from .filters import FilterBank, band_filter, band_interval, cutoff, make_filter_bank
from .frame import (
    FrameAtom,
    FrameCoefficients,
    FrameSystem,
    analyze,
    analyze_via_bands,
    build_frame,
    calibrate_a0,
    calibrate_levels,
    certified_projection,
    energy_radius,
    frame_bounds,
    interior_atom_index,
    localization_profile,
    reconstruct,
    synthesize,
)
from .grid import GridDomain, build_domain, inner_product
from .operator import (
    CoefficientField,
    OperatorMatrix,
    apply_operator,
    assemble,
    identity_coefficient,
    matrix_coefficient,
    scalar_coefficient,
    wave_coefficient,
)
from .pipeline import run_pipeline, sample_bandlimited
