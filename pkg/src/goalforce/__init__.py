"""Goal-conditioned social-force toolkit for pedestrian trajectory prediction.

Ingestion of ETH/UCY-style tracks, driving and elliptical repulsive forces,
DBSCAN group detection, a goal-driven stochastic simulator and the usual
best-of-K evaluation metrics.
"""

from goalforce.data import (
    AgentState,
    FormatConfig,
    Frame,
    IntegrityError,
    ParseError,
    Scene,
    TrajectoryWindow,
    load_scene,
    parse_scene,
    validate_counts,
    window_scene,
    write_scene,
)
from goalforce.forces import (
    ForceParams,
    ForceSample,
    desired_direction,
    driving_force,
    force_sequences,
    fov_weight,
    repulsive_force_pair,
    repulsive_potential,
    semi_minor_axis,
    total_forces,
)
from goalforce.grouping import GroupAssignment, dbscan, dbscan_frame, detect_groups, group_mask
from goalforce.metrics import MetricsReport, ade, best_of_k, collision_count, evaluate, fde
from goalforce.sim import (
    ConstantVelocityPredictor,
    GoalMode,
    GoalSource,
    PredictionSet,
    SocialForcePredictor,
    estimate_goal,
    rollout,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "AgentState",
    "ConstantVelocityPredictor",
    "ForceParams",
    "ForceSample",
    "FormatConfig",
    "Frame",
    "GoalMode",
    "GoalSource",
    "GroupAssignment",
    "IntegrityError",
    "MetricsReport",
    "ParseError",
    "PredictionSet",
    "Scene",
    "SocialForcePredictor",
    "TrajectoryWindow",
    "ade",
    "best_of_k",
    "collision_count",
    "dbscan",
    "dbscan_frame",
    "desired_direction",
    "detect_groups",
    "driving_force",
    "estimate_goal",
    "evaluate",
    "fde",
    "force_sequences",
    "fov_weight",
    "group_mask",
    "load_scene",
    "parse_scene",
    "repulsive_force_pair",
    "repulsive_potential",
    "rollout",
    "semi_minor_axis",
    "step",
    "total_forces",
    "validate_counts",
    "window_scene",
    "write_scene",
]
