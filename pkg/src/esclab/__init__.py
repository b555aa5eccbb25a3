"""Extremum-seeking control with a worst-case-optimal adaptive step-size.

The package couples a weighted batch least-squares gradient estimator
carrying hard ellipsoidal error bounds with a gated integral controller
whose step-size solves the worst-case descent game against those
bounds. Built-in plants, costs, and dither generators reproduce the
five reference closed-loop examples end to end.
"""

from .controller import (
    ControllerConfig,
    ControllerState,
    GainSynthesisProblem,
    compute_step_size,
    controller_step,
    synthesize_linear_gain,
    verify_gain,
    worst_case_error,
)
from .estimator import (
    CurvatureBounds,
    ErrorInterval,
    GradientEstimate,
    SampleBatch,
    build_information,
    compute_weight,
    error_ellipsoid_residual,
    estimate_gradient,
    omega_interval,
)
from .harness import (
    DivergenceError,
    RunConfig,
    TraceRecord,
    bench1_config,
    bench2_config,
    bench3_config,
    default_config,
    drone_config,
    emit_csv,
    illustrative_config,
    run_closed_loop,
    trace_column,
)
from .models import (
    DitherSpec,
    PlantModel,
    bench1_cost,
    bench1_plant,
    bench2_plant,
    bench3_cost,
    bench3_plant,
    bench3_transform,
    dither_sample,
    drone_plant,
    plume_cost,
    quadratic_cost,
    second_order_plant,
)
from .numerics import (
    is_psd,
    solve_discrete_lyapunov,
    spectral_radius,
    sym_sqrt,
    tr_minus,
    tr_plus,
)

__version__ = "0.1.0"
