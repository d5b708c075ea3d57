"""Reward functions over groups of sampled boxes.

Two families live here: the diversity bonus shared by a whole prediction
group (spatial spread of box centers plus pairwise separation of the boxes'
Gaussian region models), and the per-sample correctness rewards that score
a prediction against its ground-truth box (IoU, center-distance, and a
dense Gaussian point+coverage variant).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import BBox, DiagGaussian2, center, contains, iou, to_gaussian

CORRECTNESS_KINDS = ("iou", "point_distance", "gaussian_dense")


@dataclass(frozen=True)
class PredictionGroup:
    """The N boxes sampled for one instruction; group rewards are defined on it."""

    preds: tuple[BBox, ...]

    def __init__(self, preds):
        object.__setattr__(self, "preds", tuple(preds))
        if len(self.preds) < 1:
            raise ValueError("prediction group must hold at least one box")
        for p in self.preds:
            if not isinstance(p, BBox):
                raise TypeError(f"expected BBox, got {type(p).__name__}")

    def __len__(self) -> int:
        return len(self.preds)


@dataclass(frozen=True)
class RewardConfig:
    """Weights and shape parameters for the reward stack.

    alpha weights the center-spread term, gamma the region-separation term.
    kappa/eps_min control the box->Gaussian transform, tau the distance
    shaping of the point correctness reward.
    """

    alpha: float = 15.0
    gamma: float = 0.5
    kappa: float = 1.0
    eps_min: float = 1e-8
    correctness_kind: str = "gaussian_dense"
    tau: float = 0.1
    literal_variance: bool = False

    def __post_init__(self):
        if self.alpha < 0.0 or self.gamma < 0.0:
            raise ValueError("alpha and gamma must be non-negative")
        if self.kappa <= 0.0 or self.eps_min <= 0.0 or self.tau <= 0.0:
            raise ValueError("kappa, eps_min and tau must be positive")
        if self.correctness_kind not in CORRECTNESS_KINDS:
            raise ValueError(
                f"correctness_kind must be one of {CORRECTNESS_KINDS}, "
                f"got {self.correctness_kind!r}"
            )


def center_spread(g: PredictionGroup) -> float:
    """Mean squared distance of the group's box centers from their centroid.

    Zero iff all centers coincide; a single-box group has zero spread by
    definition.
    """
    n = len(g)
    if n == 1:
        return 0.0
    cs = [center(b) for b in g.preds]
    mx = sum(c.x for c in cs) / n
    my = sum(c.y for c in cs) / n
    return sum((c.x - mx) ** 2 + (c.y - my) ** 2 for c in cs) / n


def bhattacharyya(a: DiagGaussian2, b: DiagGaussian2) -> float:
    """Bhattacharyya distance between two diagonal 2-D Gaussians.

    Closed form: a Mahalanobis term under the average covariance plus a
    log-determinant term penalising covariance mismatch. Symmetric,
    non-negative, zero iff the Gaussians coincide.
    """
    avg_x = (a.var_x + b.var_x) / 2.0
    avg_y = (a.var_y + b.var_y) / 2.0
    dx = a.mean.x - b.mean.x
    dy = a.mean.y - b.mean.y
    maha = (dx * dx / avg_x + dy * dy / avg_y) / 8.0
    # product grouped per-axis so the result is bit-exact under argument swap
    log_det = 0.5 * math.log(
        (avg_x * avg_y) / math.sqrt((a.var_x * b.var_x) * (a.var_y * b.var_y))
    )
    return maha + log_det


def region_separation(
    g: PredictionGroup,
    kappa: float,
    eps_min: float,
    literal_variance: bool = False,
) -> float:
    """Mean pairwise Bhattacharyya distance between the boxes' Gaussian models.

    Averages over all N(N-1)/2 unordered pairs; a single-box group has no
    pairs and returns zero.
    """
    n = len(g)
    if n == 1:
        return 0.0
    gaussians = [to_gaussian(b, kappa, eps_min, literal_variance) for b in g.preds]
    total = 0.0
    for i in range(n - 1):
        for j in range(i + 1, n):
            total += bhattacharyya(gaussians[i], gaussians[j])
    return 2.0 * total / (n * (n - 1))


def diversity_reward(g: PredictionGroup, cfg: RewardConfig) -> float:
    """Weighted sum of center spread and region separation for one group."""
    return cfg.alpha * center_spread(g) + cfg.gamma * region_separation(
        g, cfg.kappa, cfg.eps_min, cfg.literal_variance
    )


def correctness_iou(pred: BBox, gt: BBox) -> float:
    """IoU-only correctness, in [0,1]."""
    return iou(pred, gt)


def correctness_point(pred: BBox, gt: BBox, tau: float) -> float:
    """Center-distance correctness: exponential decay plus a hit bonus.

    exp(-dist/tau) for the distance between the two centers, plus 1 when the
    predicted center lands inside the ground-truth box. Range (0, 2].
    """
    if tau <= 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    cp = center(pred)
    cg = center(gt)
    dist = math.hypot(cp.x - cg.x, cp.y - cg.y)
    hit = 1.0 if contains(gt, cp) else 0.0
    return hit + math.exp(-dist / tau)


def correctness_gaussian(
    pred: BBox,
    gt: BBox,
    kappa: float,
    eps_min: float,
    literal_variance: bool = False,
) -> float:
    """Dense correctness: Gaussian point score plus region-coverage score.

    The point term evaluates the predicted center under the ground-truth
    box's Gaussian (normalized to 1 at the center); the coverage term is the
    Bhattacharyya coefficient between the two boxes' Gaussians. Range (0, 2],
    maximized when pred == gt.
    """
    ggt = to_gaussian(gt, kappa, eps_min, literal_variance)
    cp = center(pred)
    dx = cp.x - ggt.mean.x
    dy = cp.y - ggt.mean.y
    point = math.exp(-0.5 * (dx * dx / ggt.var_x + dy * dy / ggt.var_y))
    gp = to_gaussian(pred, kappa, eps_min, literal_variance)
    coverage = math.exp(-bhattacharyya(gp, ggt))
    return point + coverage


def correctness(pred: BBox, gt: BBox, cfg: RewardConfig) -> float:
    """Dispatch on cfg.correctness_kind."""
    if cfg.correctness_kind == "iou":
        return correctness_iou(pred, gt)
    if cfg.correctness_kind == "point_distance":
        return correctness_point(pred, gt, cfg.tau)
    return correctness_gaussian(
        pred, gt, cfg.kappa, cfg.eps_min, cfg.literal_variance
    )
