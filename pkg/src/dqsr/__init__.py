"""Simulation of dynamical quantum state reduction driven by fixed random draws.

Four collapse models over N pointer states (two-state, single-lambda,
sequential and bisection), their continuum random field, a vectorized
integrator and ensemble statistics that measure the deviation of outcome
frequencies from the Born weights.
"""

from .ensemble import (
    EnsembleReport,
    SweepAxis,
    SweepTable,
    binomial_stderr,
    born_deviation,
    merge_reports,
    run_ensemble,
    sweep,
)
from .field import (
    FieldSpec,
    Histogram,
    SeedSpec,
    continuum_generator,
    draw_uniform,
    field_pdf_histogram,
    grid_points,
    propagator_kernel,
    random_field_sample,
    sign_partition_continuum,
)
from .generators import (
    Convention,
    ModelKind,
    ModelMismatchError,
    ModelSpec,
    StochasticDraw,
    UnsupportedNError,
    g_bisection,
    g_sequential,
    g_two_state,
    separatrix_values,
    sign_partition,
    theta_velocity_sequential,
    theta_velocity_single_lambda,
    theta_velocity_two_state,
)
from .integrate import (
    Form,
    HaltReason,
    IntegratorConfig,
    NumericalBlowupError,
    Scheme,
    TrajectoryRecord,
    continue_trajectory,
    detect_outcome,
    run_batch,
    run_trajectory,
    step,
)
from .state import (
    InvalidStateError,
    angles_from_weights,
    born_weights,
    normalize,
    weights_from_angles,
)

__version__ = "0.1.0"
