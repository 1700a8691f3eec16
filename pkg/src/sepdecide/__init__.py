"""Two-sided separability decision for finite-dimensional bipartite states.

The entangled side runs the partial-transpose test and a symmetric-extension
search; the separable side enumerates a dense rational grid of product states
and tests convex-hull membership.  The scheduler interleaves both on the
input and on two shifted copies that bracket a thin border band.
"""

__version__ = "0.1.0"

from .linalg import BipartiteDims, DimensionError, NotHermitianError
from .states import (
    DensityMatrix,
    ProductState,
    PureState,
    StateFormatError,
    StateValidationError,
    bell,
    isotropic,
    max_mixed,
    random_rational_separable,
    read_state,
    validate,
    werner,
    write_state,
)
from .dps import DpsConfig, DpsOutcome, dps_step, ppt_check, symmetric_projector
from .hull import (
    SeparableDecomposition,
    barycentric_membership,
    extract_certificate,
    facet_sign_membership,
    growing_hull_check,
)
from .enumeration import enumerate_product, enumerate_range_product, nearest_in_grid
from .config import DEFAULTS, SchedulerConfig, make_config
from .scheduler import EtaShift, Verdict, make_shift, run

__all__ = [
    "BipartiteDims",
    "DimensionError",
    "NotHermitianError",
    "DensityMatrix",
    "ProductState",
    "PureState",
    "StateFormatError",
    "StateValidationError",
    "bell",
    "isotropic",
    "max_mixed",
    "random_rational_separable",
    "read_state",
    "validate",
    "werner",
    "write_state",
    "DpsConfig",
    "DpsOutcome",
    "dps_step",
    "ppt_check",
    "symmetric_projector",
    "SeparableDecomposition",
    "barycentric_membership",
    "extract_certificate",
    "facet_sign_membership",
    "growing_hull_check",
    "enumerate_product",
    "enumerate_range_product",
    "nearest_in_grid",
    "DEFAULTS",
    "SchedulerConfig",
    "make_config",
    "EtaShift",
    "Verdict",
    "make_shift",
    "run",
]
