"""spdradial: radial fields, Busemann functions and geometric quantiles on SPD matrices."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .errors import (
    ConvergenceError,
    DegeneracyError,
    DomainError,
    InputError,
    OptimizationError,
    ParseError,
    RangeError,
    SpdError,
)
from .spectral import eig_sym, sqrt_pair, sym_exp, sym_log, sym_power, gram_schmidt
from .geometry import distance, exp_map, geodesic, geodesic_between, log_map, metric_inner, metric_norm
from .radial import (
    BoundaryDirection,
    busemann,
    power_mean_finite,
    power_mean_limit,
    power_mean_limit_degenerate,
    radial_field,
    radial_field_oracle,
    radial_jacobian_fd,
    whitened_radial_field,
)
from .quantiles import (
    Dataset,
    OptimizerConfig,
    QuantileIndex,
    QuantileResult,
    TreatmentEffect,
    TreatmentPair,
    fit_frechet_median,
    fit_quantile,
    frechet_mean,
    frechet_median,
    individual_treatment_effect,
    quantile,
    quantile_loss,
)
from .dataio import EllipsoidGlyph, ellipsoid_glyph, export_ellipsoids, load_dataset, save_dataset
from .grid import preset_directions, quantile_grid
