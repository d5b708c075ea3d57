"""Synthetic continual GUI-grounding environment.

Each task draws ground-truth boxes from its own element-size statistics and
text/icon mix, then exposes them through a task-specific affine transform of
the target's pre-squash representation (logit of the center, log of the
sides) plus observation noise. Distinct affines mean a linear policy fit to
one task is measurably wrong on the next, which is what makes a task
sequence a genuine continual-learning problem rather than a re-labelling.

All statistics here are fixtures of this artifact; they are dumped into the
run manifest and overridable from the run configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .geometry import BBox

SCENARIOS = ("domain_flux", "domain_flux_reversed", "resolution_flux", "joint")

SIZE_CLIP = (0.01, 0.5)

# Per-task fixture constants. The affine matrices share a common core with
# small per-task perturbations, and the offsets are distinct: a single
# linear policy can jointly serve all tasks (offsets are absorbable through
# the one-hot block), yet the per-task optimum remains distinct enough that
# greedy single-task fits measurably hurt the siblings.
DOMAIN_FIXTURES = (
    {
        "name": "mobile",
        "kind": "domain",
        "matrix": ((1.0, 0.0), (0.0, 1.0)),
        "offset": (0.0, 0.0),
        "size_mean": 0.12,
        "size_spread": 0.03,
        "text_fraction": 0.7,
        "noise_sigma": 0.02,
    },
    {
        "name": "desktop",
        "kind": "domain",
        "matrix": ((1.06, 0.05), (-0.04, 0.95)),
        "offset": (0.15, -0.12),
        "size_mean": 0.08,
        "size_spread": 0.02,
        "text_fraction": 0.5,
        "noise_sigma": 0.02,
    },
    {
        "name": "web",
        "kind": "domain",
        "matrix": ((0.94, -0.06), (0.05, 1.06)),
        "offset": (-0.12, 0.15),
        "size_mean": 0.06,
        "size_spread": 0.015,
        "text_fraction": 0.3,
        "noise_sigma": 0.02,
    },
)

# High resolution halves the element-size statistics and doubles the affine
# scale relative to normal.
RESOLUTION_FIXTURES = (
    {
        "name": "normal",
        "kind": "resolution",
        "matrix": ((1.0, 0.1), (-0.1, 1.0)),
        "offset": (0.0, 0.0),
        "size_mean": 0.10,
        "size_spread": 0.025,
        "text_fraction": 0.5,
        "noise_sigma": 0.02,
    },
    {
        "name": "high",
        "kind": "resolution",
        "matrix": ((2.0, 0.2), (-0.2, 2.0)),
        "offset": (0.0, 0.0),
        "size_mean": 0.05,
        "size_spread": 0.0125,
        "text_fraction": 0.5,
        "noise_sigma": 0.02,
    },
)

# Icons are drawn smaller than text elements by this factor.
ICON_SIZE_FACTOR = 0.7


@dataclass(frozen=True)
class TaskSpec:
    """One task in a continual sequence.

    `matrix`/`offset` parameterize the observation transform applied to the
    target's (logit-center, log-size) representation; `index`/`n_tasks`
    place the task inside its scenario (used for the one-hot state block).
    """

    name: str
    kind: str
    matrix: tuple[tuple[float, float], tuple[float, float]]
    offset: tuple[float, float]
    size_mean: float
    size_spread: float
    text_fraction: float
    noise_sigma: float
    index: int
    n_tasks: int
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.text_fraction <= 1.0:
            raise ValueError(f"text_fraction {self.text_fraction} outside [0,1]")
        if not 0.0 < self.size_mean <= 0.5:
            raise ValueError(f"size_mean {self.size_mean} outside (0, 0.5]")
        if self.size_spread < 0.0 or self.noise_sigma < 0.0:
            raise ValueError("size_spread and noise_sigma must be non-negative")
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (2, 2) or abs(np.linalg.det(m)) < 1e-6:
            raise ValueError(f"affine matrix must be invertible 2x2, got {self.matrix}")

    @property
    def state_dim(self) -> int:
        return 4 + self.n_tasks + 1


@dataclass(frozen=True)
class EpisodeInstance:
    """A single grounding episode: state features, ground-truth box, element kind."""

    state: np.ndarray
    gt: BBox
    kind: str  # "text" | "icon"


def make_sequence(
    scenario: str,
    master_seed: int,
    overrides: dict[str, dict] | None = None,
) -> list[TaskSpec]:
    """Build the ordered task list for a scenario.

    `overrides` maps task name to fixture fields to replace (the hook the
    run configuration uses to re-parameterize the simulator).
    """
    if scenario == "domain_flux":
        fixtures = list(DOMAIN_FIXTURES)
    elif scenario == "domain_flux_reversed":
        fixtures = list(reversed(DOMAIN_FIXTURES))
    elif scenario == "resolution_flux":
        fixtures = list(RESOLUTION_FIXTURES)
    elif scenario == "joint":
        # Same tasks as domain_flux; the harness trains them simultaneously.
        fixtures = list(DOMAIN_FIXTURES)
    else:
        raise ConfigError(
            f"unknown scenario {scenario!r}; expected one of {SCENARIOS}"
        )

    overrides = dict(overrides or {})
    known = {f["name"] for f in fixtures}
    unknown = set(overrides) - known
    if unknown:
        raise ConfigError(
            f"simulator overrides for unknown tasks {sorted(unknown)}; "
            f"scenario {scenario!r} has {sorted(known)}"
        )

    tasks = []
    n = len(fixtures)
    for idx, fixture in enumerate(fixtures):
        merged = dict(fixture)
        extra = overrides.get(merged["name"], {})
        bad = set(extra) - (set(fixture) - {"name", "kind"})
        if bad:
            raise ConfigError(
                f"unknown simulator override fields {sorted(bad)} "
                f"for task {merged['name']!r}"
            )
        merged.update(extra)
        if "matrix" in extra:
            merged["matrix"] = tuple(tuple(float(v) for v in row) for row in extra["matrix"])
        if "offset" in extra:
            merged["offset"] = tuple(float(v) for v in extra["offset"])
        seed = int(np.random.SeedSequence([master_seed, idx]).generate_state(1)[0])
        tasks.append(TaskSpec(index=idx, n_tasks=n, seed=seed, **merged))
    return tasks


def target_latent(gt: BBox) -> np.ndarray:
    """Pre-squash representation of a box: (logit cx, logit cy, log w, log h)."""
    cx = (gt.x1 + gt.x2) / 2.0
    cy = (gt.y1 + gt.y2) / 2.0
    return np.array([
        math.log(cx / (1.0 - cx)),
        math.log(cy / (1.0 - cy)),
        math.log(gt.x2 - gt.x1),
        math.log(gt.y2 - gt.y1),
    ])


def sample_instances(
    task: TaskSpec, n: int, rng: np.random.Generator
) -> list[EpisodeInstance]:
    """Draw `n` episodes from a task; deterministic given the rng state."""
    if n < 1:
        raise ValueError("n must be >= 1")
    is_text = rng.random(n) < task.text_fraction
    w = rng.normal(task.size_mean, task.size_spread, n)
    h = rng.normal(task.size_mean, task.size_spread, n)
    factor = np.where(is_text, 1.0, ICON_SIZE_FACTOR)
    w = np.clip(w * factor, *SIZE_CLIP)
    h = np.clip(h * factor, *SIZE_CLIP)
    cx = w / 2.0 + rng.random(n) * (1.0 - w)
    cy = h / 2.0 + rng.random(n) * (1.0 - h)
    noise = task.noise_sigma * rng.standard_normal((n, 4))

    matrix = np.asarray(task.matrix)
    offset = np.asarray(task.offset)
    latent = np.column_stack([
        np.log(cx / (1.0 - cx)),
        np.log(cy / (1.0 - cy)),
        np.log(w),
        np.log(h),
    ])
    obs = np.empty_like(latent)
    obs[:, :2] = latent[:, :2] @ matrix.T + offset
    obs[:, 2:] = latent[:, 2:] @ matrix.T
    obs += noise

    one_hot = np.zeros(task.n_tasks)
    one_hot[task.index] = 1.0

    instances = []
    for i in range(n):
        # Sizes are clipped to keep the box inside [0,1]; tiny float drift at
        # the borders is snapped back so BBox invariants always hold.
        x1 = min(max(cx[i] - w[i] / 2.0, 0.0), 1.0)
        x2 = min(max(cx[i] + w[i] / 2.0, 0.0), 1.0)
        y1 = min(max(cy[i] - h[i] / 2.0, 0.0), 1.0)
        y2 = min(max(cy[i] + h[i] / 2.0, 0.0), 1.0)
        gt = BBox(x1, y1, x2, y2)
        state = np.concatenate([obs[i], one_hot, [1.0 if is_text[i] else 0.0]])
        instances.append(
            EpisodeInstance(state, gt, "text" if is_text[i] else "icon")
        )
    return instances


def sample_instance(task: TaskSpec, rng: np.random.Generator) -> EpisodeInstance:
    """Single-episode convenience wrapper around `sample_instances`."""
    return sample_instances(task, 1, rng)[0]
