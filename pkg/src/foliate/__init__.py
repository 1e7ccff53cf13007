"""Stable and unstable foliations, inertial manifolds and exponential tracking."""

from __future__ import annotations

from .accel import aitken_scalar, aitken_sequence, aitken_vector, available_terms
from .errors import (ConfigError, DegenerateSequenceError, DivergenceError, FoliateError,
                     GapConditionError, InfeasibleTailError, IterationLimitError)
from .model import (Preparation, SpectralGap, SplitSystem, kse_aif, kse_eigenvalues,
                    kse_galerkin, toy_inverse, toy_system, toy_transform)
from .oracle import ToyOracle
from .stable import (StableLeafResult, StableSolveConfig, pwconst_schedule, solve_stable_leaf,
                     t_map_apply)
from .timegrid import BaseTrajectory, TimeGrid, TimeGridFunction, rk4_trajectory
from .tracking import (TrackingConfig, TrackingResult, cone_classify,
                       leaf_equivalence_experiment, rate_sweep, sigma_step, solve_tracking,
                       tracking_rate)
from .unstable import (UnstableLeafResult, count_multiplications, solve_inertial_manifold,
                       solve_unstable_leaf, u_map_apply)

__version__ = "0.1.0"

__all__ = [
    "BaseTrajectory", "ConfigError", "DegenerateSequenceError", "DivergenceError",
    "FoliateError", "GapConditionError", "InfeasibleTailError", "IterationLimitError",
    "Preparation", "SpectralGap", "SplitSystem", "StableLeafResult", "StableSolveConfig",
    "TimeGrid", "TimeGridFunction", "ToyOracle", "TrackingConfig", "TrackingResult",
    "UnstableLeafResult", "aitken_scalar", "aitken_sequence", "aitken_vector",
    "available_terms", "cone_classify", "count_multiplications", "kse_aif",
    "kse_eigenvalues", "kse_galerkin", "leaf_equivalence_experiment", "pwconst_schedule",
    "rate_sweep", "rk4_trajectory", "sigma_step", "solve_inertial_manifold",
    "solve_stable_leaf", "solve_tracking", "solve_unstable_leaf", "t_map_apply",
    "toy_inverse", "toy_system", "toy_transform", "tracking_rate", "u_map_apply",
]
