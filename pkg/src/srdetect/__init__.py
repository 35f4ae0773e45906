"""Numerics for the Shiryaev-Roberts-r drift-change detector.

Calibrates the head start r* that makes the procedure an equalizer over
change points, verifies the sign of the perturbation value f_lambda(r*)
on a lambda sweep, and cross-checks both against Monte Carlo simulation
of the detection statistic.
"""

from srdetect.calibration import (
    BracketError,
    CalibrationResult,
    asymptotic_r_star,
    calibrate,
    f0_at,
)
from srdetect.fredholm import (
    KernelMatrix,
    LambdaSweep,
    SingularSystemError,
    assemble_f0_vector,
    assemble_kernel,
    ode_residual,
    solve_f_lambda,
    sweep_lambda,
)
from srdetect.quadrature import DiffWeights, Grid, diff_weights, integrate, make_grid
from srdetect.simulator import (
    HorizonCapError,
    MartingaleCheck,
    McEstimate,
    PathOutcome,
    SimBatch,
    SimConfig,
    detect_stream,
    mc_delay_ratio,
    mc_f_lambda,
    mc_martingale_check,
    mc_mean_stop_time,
    run_path,
    simulate_paths,
    step_statistic,
)
from srdetect.specfun import (
    EULER_GAMMA,
    ScaledExpIntegrals,
    e1,
    e1_scaled,
    ei_scaled,
    g,
    scaled_pair,
)

__version__ = "0.1.0"

__all__ = [
    "BracketError",
    "CalibrationResult",
    "DiffWeights",
    "EULER_GAMMA",
    "Grid",
    "HorizonCapError",
    "KernelMatrix",
    "LambdaSweep",
    "MartingaleCheck",
    "McEstimate",
    "PathOutcome",
    "ScaledExpIntegrals",
    "SimBatch",
    "SimConfig",
    "SingularSystemError",
    "asymptotic_r_star",
    "assemble_f0_vector",
    "assemble_kernel",
    "calibrate",
    "detect_stream",
    "diff_weights",
    "e1",
    "e1_scaled",
    "ei_scaled",
    "f0_at",
    "g",
    "integrate",
    "make_grid",
    "mc_delay_ratio",
    "mc_f_lambda",
    "mc_martingale_check",
    "mc_mean_stop_time",
    "ode_residual",
    "run_path",
    "scaled_pair",
    "simulate_paths",
    "solve_f_lambda",
    "step_statistic",
    "sweep_lambda",
    "__version__",
]
