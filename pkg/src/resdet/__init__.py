"""resdet: residual-based attack detection in stochastic LTI control loops.

Tune chi-squared, windowed chi-squared, and CUSUM detectors to a target
false-alarm rate; synthesize zero-alarm sensor attacks against each; predict
and measure the worst-case steady-state deviation the attacks can induce.
"""

from .attacks import (
    AttackPlan,
    DeviationBound,
    compute_M,
    gamma_bound,
    plan_attack,
    predicted_deviation,
    synthesize_attack,
    worst_direction,
)
from .detectors import (
    AlarmEvent,
    ChiSqDetector,
    CusumDetector,
    WindowedChiSqDetector,
    estimate_arl,
    make_detector,
    measure_alarm_rate,
    tune_chi2,
    tune_cusum_tau,
    tune_windowed,
)
from .model import (
    ClosedLoopModel,
    LoopState,
    NoiseModel,
    PlantModel,
    advance,
    build_closed_loop,
    distance_measure,
    initial_state,
    simulate_distance_stream,
    step,
)
from .numerics import (
    inverse_regularized_lower_gamma,
    max_eigenpair,
    psd_sqrt,
    regularized_lower_gamma,
    solve_dare,
    solve_discrete_lyapunov,
    spectral_radius,
)
from .reactor import reactor_loop, reactor_plant, run_benchmark, tuned_thresholds
from .sim import (
    EnsembleResult,
    Scenario,
    SimulationTrace,
    measure_steady_deviation,
    moving_average,
    run,
    run_ensemble,
    stationarity_gap,
    steady_deviation_estimate,
    sweep_window_contours,
)

__version__ = "0.1.0"

__all__ = [
    "AlarmEvent",
    "AttackPlan",
    "ChiSqDetector",
    "ClosedLoopModel",
    "CusumDetector",
    "DeviationBound",
    "EnsembleResult",
    "LoopState",
    "NoiseModel",
    "PlantModel",
    "Scenario",
    "SimulationTrace",
    "WindowedChiSqDetector",
    "advance",
    "build_closed_loop",
    "compute_M",
    "distance_measure",
    "estimate_arl",
    "gamma_bound",
    "initial_state",
    "inverse_regularized_lower_gamma",
    "make_detector",
    "max_eigenpair",
    "measure_alarm_rate",
    "measure_steady_deviation",
    "moving_average",
    "plan_attack",
    "predicted_deviation",
    "psd_sqrt",
    "reactor_loop",
    "reactor_plant",
    "regularized_lower_gamma",
    "run",
    "run_benchmark",
    "run_ensemble",
    "simulate_distance_stream",
    "solve_dare",
    "solve_discrete_lyapunov",
    "spectral_radius",
    "stationarity_gap",
    "steady_deviation_estimate",
    "step",
    "sweep_window_contours",
    "synthesize_attack",
    "tune_chi2",
    "tune_cusum_tau",
    "tune_windowed",
    "tuned_thresholds",
    "worst_direction",
]
