"""Continual GUI-grounding simulator with diversity-shaped group-relative
policy optimization."""

from .geometry import BBox, DiagGaussian2, Point, center, contains, iou, to_gaussian
from .harness import (
    AccuracyMatrix,
    RunConfig,
    TrainRecord,
    ablate,
    evaluate,
    forgetting,
    forward_transfer,
    reward_trend,
    run_continual,
    train_task,
)
from .policy import (
    GroundingPolicy,
    GroupRollout,
    NumericalAbort,
    OptimConfig,
    action_to_bbox,
    grad_objective,
    grpo_advantage,
    kl_ref_theta,
    objective,
    sample_group,
    step,
)
from .rewards import (
    PredictionGroup,
    RewardConfig,
    bhattacharyya,
    center_spread,
    correctness,
    correctness_gaussian,
    correctness_iou,
    correctness_point,
    diversity_reward,
    region_separation,
)
from .simulator import EpisodeInstance, TaskSpec, make_sequence, sample_instance, sample_instances

__version__ = "0.1.0"
