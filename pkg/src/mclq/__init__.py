"""MCLQ: zero-sum game safety filtering via LQ seeding + Monte Carlo refinement."""

from .game import (
    DimensionError,
    GameDefinition,
    GameError,
    JointTrajectory,
    NumericError,
    clamp,
    cumulative_cost,
    rollout,
    step,
)
from .lq import (
    GainSchedule,
    LqApproximation,
    augment_affine,
    gains_to_trajectory,
    linearize_quadraticize,
    solve_coupled_riccati,
)
from .refine import (
    RefineResult,
    SamplerConfig,
    inner_accept,
    outer_accept,
    perturb,
    refine,
    within_margin,
)
from .filter import FilterConfig, PlanRecord, filter_step, plan
from .envs import (
    BoltzmannHuman,
    DrivingParams,
    NominalHumanModel,
    PointMassParams,
    boltzmann_sample,
    driving_game,
    make_driving_env,
    make_point_mass_env,
    multi_human_game,
    nominal_trajectory,
    point_mass_game,
)
from .oracles import DiscretizedGame, BudgetError, brute_force_ne, ilq_solve, snap_to_grid

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
