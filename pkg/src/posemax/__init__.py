"""Globally-optimal camera pose and 2D-3D correspondence estimation by
inlier-set cardinality maximisation with nested branch-and-bound."""

from .bounds import (
    BoundMode,
    ProblemInstance,
    lower_bound,
    objective,
    psi_r_tight,
    psi_r_weak,
    psi_t,
    psi_t_weak,
    rbb_bounds,
    upper_bound,
)
from .domain import Cuboid, TranslationDomain, rotation_domain
from .estimators import Correspondence, extract_correspondences, ransac_baseline, refine_pnp
from .geometry import Intrinsics, Pose
from .oracle import grid_search, sample_max_rotation_angle, sample_max_translation_angle
from .solver import (
    QueueEntry,
    Solution,
    SolverConfig,
    TraceSample,
    gopac_solve,
    guess_and_verify,
    pnp_trigger,
    precompute_rotation_cache,
    rbb,
)
from .synth import GroundTruth, SynthConfig, TorusPrior, generate, pose_success, torus_domain

__all__ = [
    "BoundMode",
    "Correspondence",
    "Cuboid",
    "GroundTruth",
    "Intrinsics",
    "Pose",
    "ProblemInstance",
    "QueueEntry",
    "Solution",
    "SolverConfig",
    "SynthConfig",
    "TorusPrior",
    "TraceSample",
    "TranslationDomain",
    "extract_correspondences",
    "generate",
    "gopac_solve",
    "grid_search",
    "guess_and_verify",
    "lower_bound",
    "objective",
    "pnp_trigger",
    "pose_success",
    "precompute_rotation_cache",
    "psi_r_tight",
    "psi_r_weak",
    "psi_t",
    "psi_t_weak",
    "ransac_baseline",
    "rbb",
    "rbb_bounds",
    "refine_pnp",
    "rotation_domain",
    "sample_max_rotation_angle",
    "sample_max_translation_angle",
    "torus_domain",
    "upper_bound",
]
