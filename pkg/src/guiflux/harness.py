"""Sequential training, evaluation, continual-learning metrics, ablation grid.

A run trains the policy on each task of a scenario in order, snapshotting
the reference policy at task boundaries, and evaluates on every task after
every stage (plus once untrained), producing a (stages+1) x tasks accuracy
matrix with text/icon splits. All randomness flows through named child
streams of the master seed, so paired runs that differ only in method flags
see identical instance streams.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import rewards as rw
from .policy import (
    GroundingPolicy,
    GroupRollout,
    OptimConfig,
    grad_objective,
    grpo_advantage,
    kl_ref_theta,
    objective,
    sample_group,
    step,
)
from .rewards import PredictionGroup, RewardConfig
from .simulator import TaskSpec, make_sequence, sample_instances

log = logging.getLogger(__name__)

# Child-stream ids under the master seed.
STREAM_TRAIN_INSTANCES = 0
STREAM_ACTIONS = 1
STREAM_EVAL = 2
STREAM_TASK_CHOICE = 3

# Fixed sweep pattern for the ablation grid: scale one weight at a time.
DEFAULT_SCALE_POINTS = ((1.0, 1.0), (2.0, 1.0), (0.5, 1.0), (1.0, 2.0), (1.0, 0.5))

ABLATION_VARIANTS = (
    ("full", True, True),
    ("apr_only", True, False),
    ("arr_only", False, True),
    ("neither", False, False),
)


def variant_flags(variant: str) -> tuple[bool, bool]:
    """(use_apr, use_arr) for an ablation variant name."""
    for name, use_apr, use_arr in ABLATION_VARIANTS:
        if name == variant:
            return use_apr, use_arr
    raise ValueError(f"unknown ablation variant {variant!r}")


def child_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Independent deterministic stream derived from the master seed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([master_seed, *key])))


@dataclass(frozen=True)
class RunConfig:
    """Everything one continual run needs; parsed from the config file."""

    scenario: str = "domain_flux"
    steps_per_task: int = 500
    eval_episodes: int = 2000
    optim: OptimConfig = field(default_factory=OptimConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    use_apr: bool = True
    use_arr: bool = True
    use_kl: bool = True
    alpha_scale: float = 1.0
    gamma_scale: float = 1.0
    seeds: tuple[int, ...] = (0,)
    scale_points: tuple[tuple[float, float], ...] = DEFAULT_SCALE_POINTS
    sim_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.steps_per_task < 0:
            raise ValueError("steps_per_task must be >= 0")
        if self.eval_episodes < 1:
            raise ValueError("eval_episodes must be >= 1")
        if self.alpha_scale <= 0.0 or self.gamma_scale <= 0.0:
            raise ValueError("scales must be positive")
        if len(self.seeds) < 1 or any(s < 0 for s in self.seeds):
            raise ValueError("seeds must be a non-empty list of non-negative ints")


@dataclass(frozen=True)
class TrainRecord:
    """One training step's scalars; field order matches the trainlog.csv columns."""

    step: int
    task: int
    correctness: float
    apr: float
    arr: float
    r_aif: float
    kl: float
    objective: float


@dataclass
class AccuracyMatrix:
    """(stages+1) x tasks success rates with text/icon splits; row 0 untrained."""

    overall: np.ndarray
    text: np.ndarray
    icon: np.ndarray
    task_names: list[str]
    stage_labels: list[str]

    def __post_init__(self):
        shape = self.overall.shape
        if self.text.shape != shape or self.icon.shape != shape:
            raise ValueError("split matrices must share the overall shape")
        if shape != (len(self.stage_labels), len(self.task_names)):
            raise ValueError("matrix shape disagrees with labels")

    @property
    def n_stages(self) -> int:
        return self.overall.shape[0] - 1

    @property
    def n_tasks(self) -> int:
        return self.overall.shape[1]

    def stage_average(self, row: int) -> float:
        return float(self.overall[row].mean())

    def final_average(self) -> float:
        return self.stage_average(-1)


def evaluate(
    policy: GroundingPolicy,
    tasks: list[TaskSpec],
    episodes: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One accuracy-matrix row: per-task overall/text/icon success rates.

    Evaluation is deterministic given the rng: the policy predicts its mean
    box (no sampling noise) and a prediction succeeds when its center lands
    inside the ground-truth box.
    """
    overall = np.zeros(len(tasks))
    text = np.zeros(len(tasks))
    icon = np.zeros(len(tasks))
    for t_idx, task in enumerate(tasks):
        instances = sample_instances(task, episodes, rng)
        states = np.stack([inst.state for inst in instances])
        u = states @ policy.W + policy.b
        cx = 1.0 / (1.0 + np.exp(-u[:, 0]))
        cy = 1.0 / (1.0 + np.exp(-u[:, 1]))
        gt = np.array([[i.gt.x1, i.gt.y1, i.gt.x2, i.gt.y2] for i in instances])
        hit = (
            (gt[:, 0] <= cx) & (cx <= gt[:, 2])
            & (gt[:, 1] <= cy) & (cy <= gt[:, 3])
        )
        is_text = np.array([i.kind == "text" for i in instances])
        overall[t_idx] = hit.mean()
        text[t_idx] = hit[is_text].mean() if is_text.any() else 0.0
        icon[t_idx] = hit[~is_text].mean() if (~is_text).any() else 0.0
    return overall, text, icon


def _score_group(
    rollout: GroupRollout, gt, cfg: RunConfig
) -> tuple[np.ndarray, float, float, float]:
    """Correctness rewards plus the gated diversity components for one group."""
    reward_cfg = cfg.reward
    scores = np.array([rw.correctness(box, gt, reward_cfg) for box in rollout.boxes])
    group = PredictionGroup(rollout.boxes)
    spread = rw.center_spread(group) if cfg.use_apr else 0.0
    separation = (
        rw.region_separation(
            group, reward_cfg.kappa, reward_cfg.eps_min, reward_cfg.literal_variance
        )
        if cfg.use_arr
        else 0.0
    )
    r_div = (
        reward_cfg.alpha * cfg.alpha_scale * spread
        + reward_cfg.gamma * cfg.gamma_scale * separation
    )
    return scores, spread, separation, r_div


def train_task(
    policy: GroundingPolicy,
    ref: GroundingPolicy,
    task: TaskSpec,
    cfg: RunConfig,
    records: list[TrainRecord],
    rng_instances: np.random.Generator,
    rng_actions: np.random.Generator,
    step_offset: int = 0,
) -> GroundingPolicy:
    """Run cfg.steps_per_task optimization steps on one task.

    `ref` is the frozen snapshot anchoring the KL penalty; with
    optim.ref_refresh == "per_step" it is re-snapshotted to the current
    policy before every step instead. The likelihood ratio is anchored to
    the behavior policy at rollout time (so it is 1 on the first inner
    epoch); anchoring it to the task-start snapshot as well would make the
    ratio overflow once the policy has genuinely moved during the task.
    """
    beta = cfg.optim.beta if cfg.use_kl else 0.0
    for i in range(cfg.steps_per_task):
        if cfg.optim.ref_refresh == "per_step":
            ref = policy
        inst = sample_instances(task, 1, rng_instances)[0]
        policy = _train_step(
            policy, ref, inst, task.index, cfg, beta, records,
            step_offset + i, rng_actions,
        )
    return policy


def _train_step(
    policy: GroundingPolicy,
    ref: GroundingPolicy,
    inst,
    task_index: int,
    cfg: RunConfig,
    beta: float,
    records: list[TrainRecord],
    step_idx: int,
    rng_actions: np.random.Generator,
) -> GroundingPolicy:
    # Ratio anchor = behavior policy; `ref` only anchors the KL penalty.
    rollout = sample_group(policy, policy, inst.state, cfg.optim.n_samples, rng_actions)
    scores, spread, separation, r_div = _score_group(rollout, inst.gt, cfg)
    rollout.rewards = scores
    rollout.advantages = grpo_advantage(scores)
    rollout.r_div = r_div

    kl_val = kl_ref_theta(ref, policy, inst.state)
    for _ in range(cfg.optim.inner_epochs):
        grad = grad_objective(rollout, policy, ref, beta)
        policy = step(policy, grad, cfg.optim.lr)
    # logged post-update: at the behavior policy the ratios are identically 1
    # and the surrogate reduces to the diversity bonus, which carries no
    # step-level information
    j_val = objective(rollout, policy, ref, beta)

    records.append(
        TrainRecord(
            step=step_idx,
            task=task_index,
            correctness=float(scores.mean()),
            apr=spread,
            arr=separation,
            r_aif=r_div,
            kl=kl_val,
            objective=j_val,
        )
    )
    return policy


def run_continual(
    cfg: RunConfig, seed: int | None = None
) -> tuple[AccuracyMatrix, list[TrainRecord], list[TaskSpec]]:
    """Full continual run for one master seed.

    Row 0 of the matrix is the untrained policy; row k evaluates on every
    task after training stage k. The "joint" scenario trains all tasks
    simultaneously in a single stage (steps_per_task per task, interleaved).
    """
    master = int(cfg.seeds[0] if seed is None else seed)
    tasks = make_sequence(cfg.scenario, master, cfg.sim_overrides)
    state_dim = tasks[0].state_dim
    policy = GroundingPolicy.zeros(
        state_dim, cfg.optim.init_log_std, cfg.optim.init_log_std_size, cfg.optim.init_size
    )

    rows = [evaluate(policy, tasks, cfg.eval_episodes, child_rng(master, STREAM_EVAL, 0))]
    records: list[TrainRecord] = []
    stage_labels = ["untrained"]

    if cfg.scenario == "joint":
        policy = _train_joint(policy, tasks, cfg, records, master)
        rows.append(
            evaluate(policy, tasks, cfg.eval_episodes, child_rng(master, STREAM_EVAL, 1))
        )
        stage_labels.append("joint")
    else:
        for k, task in enumerate(tasks):
            ref = policy
            policy = train_task(
                policy, ref, task, cfg, records,
                child_rng(master, STREAM_TRAIN_INSTANCES, k),
                child_rng(master, STREAM_ACTIONS, k),
                step_offset=k * cfg.steps_per_task,
            )
            rows.append(
                evaluate(
                    policy, tasks, cfg.eval_episodes,
                    child_rng(master, STREAM_EVAL, k + 1),
                )
            )
            prev = stage_labels[-1]
            stage_labels.append(task.name if prev == "untrained" else f"{prev}->{task.name}")

    matrix = AccuracyMatrix(
        overall=np.stack([r[0] for r in rows]),
        text=np.stack([r[1] for r in rows]),
        icon=np.stack([r[2] for r in rows]),
        task_names=[t.name for t in tasks],
        stage_labels=stage_labels,
    )
    return matrix, records, tasks


def _train_joint(
    policy: GroundingPolicy,
    tasks: list[TaskSpec],
    cfg: RunConfig,
    records: list[TrainRecord],
    master: int,
) -> GroundingPolicy:
    beta = cfg.optim.beta if cfg.use_kl else 0.0
    rng_choice = child_rng(master, STREAM_TASK_CHOICE)
    rngs_inst = [child_rng(master, STREAM_TRAIN_INSTANCES, k) for k in range(len(tasks))]
    rng_actions = child_rng(master, STREAM_ACTIONS, 0)
    ref = policy
    total = cfg.steps_per_task * len(tasks)
    for i in range(total):
        if cfg.optim.ref_refresh == "per_step":
            ref = policy
        k = int(rng_choice.integers(len(tasks)))
        inst = sample_instances(tasks[k], 1, rngs_inst[k])[0]
        policy = _train_step(
            policy, ref, inst, tasks[k].index, cfg, beta, records, i, rng_actions
        )
    return policy


def forward_transfer(m: AccuracyMatrix) -> list[dict]:
    """Accuracy gained on not-yet-trained tasks, relative to the untrained row.

    One record per (stage, future task): after stage s (1-based row), tasks
    with index >= s have not been trained yet; delta = A[s][j] - A[0][j].
    """
    out = []
    for s in range(1, m.n_stages + 1):
        for j in range(s, m.n_tasks):
            out.append(
                {
                    "stage": s,
                    "task": m.task_names[j],
                    "delta": float(m.overall[s, j] - m.overall[0, j]),
                }
            )
    return out


def forgetting(m: AccuracyMatrix) -> list[dict]:
    """Per-task drop from its post-training peak to the final row.

    Task j is first trained at stage j+1; the drop is max over rows >= j+1
    minus the final row (0 when the task was never trained, e.g. joint runs).
    """
    out = []
    last = m.n_stages
    for j in range(m.n_tasks):
        first = j + 1
        if first > last:
            drop = 0.0
        else:
            peak = float(m.overall[first : last + 1, j].max())
            drop = peak - float(m.overall[last, j])
        out.append({"task": m.task_names[j], "drop": drop})
    return out


def reward_trend(records: list[TrainRecord], task: int | None = None) -> float | None:
    """Pearson correlation between the weighted diversity bonus and the
    correctness reward over training steps (optionally one task's steps).

    Returns None (with a diagnostic) when fewer than 3 records exist or
    either series is constant.
    """
    rows = [r for r in records if task is None or r.task == task]
    if len(rows) < 3:
        log.warning("reward_trend undefined: only %d records", len(rows))
        return None
    x = np.array([r.r_aif for r in rows])
    y = np.array([r.correctness for r in rows])
    sx = x.std()
    sy = y.std()
    if sx < 1e-15 or sy < 1e-15:
        log.warning("reward_trend undefined: constant series (std %g, %g)", sx, sy)
        return None
    return float(((x - x.mean()) * (y - y.mean())).mean() / (sx * sy))


@dataclass(frozen=True)
class AblationRun:
    """One (variant, kl, scales, seed) cell run of the ablation grid."""

    variant: str
    use_kl: bool
    alpha_scale: float
    gamma_scale: float
    seed: int
    matrix: AccuracyMatrix
    records: list[TrainRecord]

    @property
    def cell_id(self) -> str:
        kl = 1 if self.use_kl else 0
        return (
            f"{self.variant}_kl{kl}_a{self.alpha_scale:g}_g{self.gamma_scale:g}"
        )

    @property
    def run_id(self) -> str:
        return f"{self.cell_id}_s{self.seed}"


def ablate(base: RunConfig) -> list[AblationRun]:
    """Execute the full ablation grid, seed-paired.

    Grid: 4 reward variants x KL on/off x the scale points x seeds. Cells
    sharing a seed see identical instance streams, so differences are
    attributable to the flags alone.
    """
    runs = []
    for variant, use_apr, use_arr in ABLATION_VARIANTS:
        for use_kl in (True, False):
            for a_scale, g_scale in base.scale_points:
                cell_cfg = replace(
                    base,
                    use_apr=use_apr,
                    use_arr=use_arr,
                    use_kl=use_kl,
                    alpha_scale=a_scale,
                    gamma_scale=g_scale,
                )
                for s in base.seeds:
                    matrix, records, _ = run_continual(cell_cfg, seed=s)
                    runs.append(
                        AblationRun(
                            variant, use_kl, a_scale, g_scale, s, matrix, records
                        )
                    )
                    log.info("ablation cell %s done", runs[-1].run_id)
    return runs
