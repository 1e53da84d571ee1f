"""Estimating a Gaussian random walk's first-passage time from noisy or delayed observations."""

from .errors import ParameterError
from .estimators import (
    DelayedThreshold,
    FixedTime,
    SequentialMmse,
    SingleObservation,
    StopDecision,
)
from .montecarlo import (
    ExperimentConfig,
    MomentEstimate,
    PrecisionSpec,
    TrialOutcome,
    required_samples,
    run_coupled_trial,
    run_divergence_demo,
    run_experiment,
)
from .process import FirstPassage, PathState, WalkParams

__version__ = "0.1.0"
