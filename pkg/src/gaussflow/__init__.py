"""Transfer entropy and directed information for linear Gaussian diffusions.

The continuous-time quantities are computed from matrix Riccati equations
(:mod:`gaussflow.measures`); :mod:`gaussflow.oracle` provides an independent
check through exact sampling and Gaussian conditional mutual information.
"""

from .errors import (
    BlowUp,
    BreakpointOrder,
    DegenerateBeyondJitter,
    DimensionMismatch,
    GaussFlowError,
    H1Violation,
    H2Violation,
    H3Violation,
    H4Violation,
    H5Violation,
    HypothesisViolation,
    ModelError,
    NegativeTime,
    NoStabilizingSolution,
    NotPSD,
    NotSymmetric,
    NumericalError,
    PSDLost,
    SizeCap,
    StepMisaligned,
)
from .factor import (
    FactorizationCache,
    check_h5,
    initial_factorization,
    noise_factorization,
    reduced_eig,
    three_block_factorization,
)
from .measures import (
    InformationCurve,
    SplitCurve,
    SplitResult,
    di_curves,
    di_rate,
    di_split_w,
    di_split_w_curves,
    di_split_x,
    di_split_x_curves,
    directed_information,
    filter_riccati,
    te_split_w,
    te_split_w_curve,
    te_split_x,
    te_split_x_curve,
    transfer_entropy,
    transfer_entropy_curve,
)
from .model import (
    CoefficientMap,
    ModelSpec,
    Partition2,
    Partition3,
    ValidatedModel,
    constant_model,
    eval_coefficients,
    load_model,
    model_from_dict,
    model_to_dict,
    validate_model,
)
from .riccati import RiccatiSpec, RiccatiTrajectory, integrate, solve_are

__version__ = "0.1.0"
