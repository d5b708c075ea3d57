"""Acceptance suite: every release gate runs here at its stated tolerance.

The numerical gates (1-5, 12, 13) are exact-tolerance oracle checks. The
behavioral gates (6-11) run the full continual experiment on the default
configuration over ten paired seeds and check the directional findings the
stack is built to reproduce. One PASS line is printed per criterion.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

import guiflux.rewards as rewards_mod
from guiflux.cli import main
from guiflux.geometry import BBox, DiagGaussian2, Point, to_gaussian
from guiflux.harness import RunConfig, forward_transfer, reward_trend, run_continual
from guiflux.persistence import compute_metrics, read_matrix, read_trainlog
from guiflux.policy import GroundingPolicy, grad_objective, grpo_advantage, objective, sample_group
from guiflux.rewards import PredictionGroup, bhattacharyya, center_spread, region_separation
from guiflux.verify import VERIFY_SEED, check_bhattacharyya

from conftest import random_bbox

SEEDS = tuple(range(10))


def ok(criterion: int, text: str):
    print(f"ACCEPT-{criterion:02d} PASS  {text}")


# ---------------------------------------------------------------- experiment

ARMS = ("full", "base", "apr", "arr", "nokl")


def arm_config(arm: str) -> RunConfig:
    cfg = RunConfig(seeds=SEEDS)
    if arm == "base":
        return replace(cfg, use_apr=False, use_arr=False)
    if arm == "apr":
        return replace(cfg, use_arr=False)
    if arm == "arr":
        return replace(cfg, use_apr=False)
    if arm == "nokl":
        return replace(cfg, use_kl=False)
    return cfg


@pytest.fixture(scope="module")
def experiment():
    """All arms on domain_flux over the paired seeds, plus wall-clock times."""
    out = {arm: {"final": [], "matrix": [], "trend": []} for arm in ARMS}
    times = {}
    for arm in ARMS:
        cfg = arm_config(arm)
        t0 = time.perf_counter()
        for seed in SEEDS:
            matrix, records, _ = run_continual(cfg, seed=seed)
            out[arm]["final"].append(matrix.final_average())
            out[arm]["matrix"].append(matrix)
            out[arm]["trend"].append(reward_trend(records, task=0))
        times[arm] = time.perf_counter() - t0
    out["times"] = times
    return out


@pytest.fixture(scope="module")
def reversed_experiment():
    out = {}
    for arm in ("full", "base"):
        cfg = replace(arm_config(arm), scenario="domain_flux_reversed")
        out[arm] = [run_continual(cfg, seed=s)[0].final_average() for s in SEEDS]
    return out


# ------------------------------------------------------------ oracle gates


def test_criterion_01_center_spread_oracle():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 9))
        boxes = [random_bbox(rng) for _ in range(n)]
        cs = [((b.x1 + b.x2) / 2, (b.y1 + b.y2) / 2) for b in boxes]
        mx = sum(c[0] for c in cs) / n
        my = sum(c[1] for c in cs) / n
        expected = sum((c[0] - mx) ** 2 + (c[1] - my) ** 2 for c in cs) / n
        worst = max(worst, abs(center_spread(PredictionGroup(boxes)) - expected))
    elapsed = time.perf_counter() - t0
    assert worst < 1e-9
    assert elapsed < 1.0
    ok(1, f"center-spread matches brute force, max diff {worst:.2e} in {elapsed:.2f}s")


def test_criterion_02_bhattacharyya_monte_carlo():
    a = DiagGaussian2(Point(0.31, 0.62), 0.004, 0.009)
    assert abs(bhattacharyya(a, a)) <= 1e-12
    b = DiagGaussian2(Point(0.41, 0.42), 0.004, 0.009)
    maha8 = ((0.1 ** 2) / 0.004 + (0.2 ** 2) / 0.009) / 8.0
    assert abs(bhattacharyya(a, b) - maha8) <= 1e-12

    t0 = time.perf_counter()
    result = check_bhattacharyya(np.random.default_rng(VERIFY_SEED + 1), n_pairs=20, n_samples=1_000_000)
    elapsed = time.perf_counter() - t0
    assert result.passed, result.detail
    assert elapsed < 30.0
    ok(2, f"{result.detail} in {elapsed:.1f}s; exact identities at 1e-12")


def test_criterion_03_region_separation_oracle():
    rng = np.random.default_rng(103)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 9))
        boxes = [random_bbox(rng) for _ in range(n)]
        gs = [to_gaussian(bx, 0.5, 1e-8) for bx in boxes]
        total, pairs = 0.0, 0
        for i in range(n - 1):
            for j in range(i + 1, n):
                total += bhattacharyya(gs[i], gs[j])
                pairs += 1
        got = region_separation(PredictionGroup(boxes), 0.5, 1e-8)
        worst = max(worst, abs(got - total / pairs))
    assert worst < 1e-9
    ok(3, f"pairwise double-loop oracle max diff {worst:.2e} over 1000 groups")


def test_criterion_04_advantage_contract():
    rng = np.random.default_rng(104)
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        r = rng.random(n) * rng.choice([1.0, 10.0])
        a = grpo_advantage(r)
        if n == 1 or r.std() < 1e-12:
            assert (a == 0.0).all()
        else:
            assert abs(a.mean()) <= 1e-9
            assert abs(a.std() - 1.0) <= 1e-9
    assert (grpo_advantage(np.full(6, 3.3)) == 0.0).all()
    ok(4, "advantages have mean 0 +/- 1e-9, population std 1 +/- 1e-9, zeros when degenerate")


def test_criterion_05_gradient_check():
    rng = np.random.default_rng(105)
    h = 1e-5
    worst = 0.0
    for k in range(10):
        beta = 0.0 if k % 2 == 0 else 0.04
        state = rng.normal(0, 1.5, 8)
        theta = GroundingPolicy(
            rng.normal(0, 0.4, (8, 4)), rng.normal(0, 0.3, 4), rng.uniform(-3, 0, 4)
        )
        ref = GroundingPolicy(
            theta.W + rng.normal(0, 0.08, (8, 4)),
            theta.b + rng.normal(0, 0.08, 4),
            np.clip(theta.log_std + rng.uniform(-0.2, 0.2, 4), -6, 1),
        )
        rollout = sample_group(theta, ref, state, 4, rng)
        rollout.rewards = rng.random(4) * 2
        rollout.advantages = grpo_advantage(rollout.rewards)
        rollout.r_div = float(rng.random())

        grad = grad_objective(rollout, theta, ref, beta)
        analytic = np.concatenate([grad.dW.ravel(), grad.db, grad.dlog_std])
        flat = np.concatenate([theta.W.ravel(), theta.b, theta.log_std])
        fd = np.zeros_like(flat)
        nw = theta.W.size
        for i in range(flat.size):
            up, dn = flat.copy(), flat.copy()
            up[i] += h
            dn[i] -= h
            pu = GroundingPolicy(up[:nw].reshape(8, 4), up[nw:nw + 4], up[nw + 4:])
            pd = GroundingPolicy(dn[:nw].reshape(8, 4), dn[nw:nw + 4], dn[nw + 4:])
            fd[i] = (objective(rollout, pu, ref, beta) - objective(rollout, pd, ref, beta)) / (2 * h)
        rel = np.linalg.norm(analytic - fd) / max(np.linalg.norm(fd), 1e-12)
        worst = max(worst, rel)
    assert worst < 1e-4
    ok(5, f"analytic gradient vs central differences, max rel err {worst:.2e} over 10 fixtures")


# -------------------------------------------------------- behavioral gates


def test_criterion_06_continual_benefit(experiment):
    full = np.array(experiment["full"]["final"])
    base = np.array(experiment["base"]["final"])
    wins = int((full >= base).sum())
    delta = float((full - base).mean())
    runtime = experiment["times"]["full"] + experiment["times"]["base"]
    assert wins >= 7, f"full >= base in only {wins}/10 seeds"
    assert delta > 0.0, f"mean improvement {delta:+.4f}"
    assert runtime < 300.0, f"20 paired runs took {runtime:.0f}s"
    ok(6, f"full >= baseline in {wins}/10 seeds, mean delta {delta:+.4f}, {runtime:.0f}s")


def test_criterion_07_component_ablation(experiment):
    full = float(np.mean(experiment["full"]["final"]))
    apr = float(np.mean(experiment["apr"]["final"]))
    arr = float(np.mean(experiment["arr"]["final"]))
    assert full >= apr, f"full {full:.4f} < point-reward-only {apr:.4f}"
    assert full >= arr, f"full {full:.4f} < region-reward-only {arr:.4f}"
    ok(7, f"full {full:.4f} >= apr-only {apr:.4f} and >= arr-only {arr:.4f}")


def test_criterion_08_kl_ablation(experiment):
    kl_on = float(np.mean(experiment["full"]["final"]))
    kl_off = float(np.mean(experiment["nokl"]["final"]))
    assert kl_on > kl_off, f"KL on {kl_on:.4f} vs off {kl_off:.4f}"
    ok(8, f"beta=0.04 beats beta=0 on seed means: {kl_on:.4f} > {kl_off:.4f}")


def test_criterion_09_reward_anticorrelation(experiment):
    trends = experiment["full"]["trend"]
    negatives = sum(1 for t in trends if t is not None and t < 0.0)
    assert negatives >= 7, f"negative trend in only {negatives}/10 seeds: {trends}"
    ok(9, f"diversity/correctness Pearson r negative in {negatives}/10 seeds")


def test_criterion_10_forward_transfer():
    # Train ONLY task 1, to convergence, then compare zero-shot accuracy on
    # the two not-yet-trained tasks between the full and correctness-only
    # arms on seed means (paired seeds, aggregated over the future tasks).
    from guiflux.harness import (
        STREAM_ACTIONS,
        STREAM_EVAL,
        STREAM_TRAIN_INSTANCES,
        child_rng,
        evaluate,
        train_task,
    )
    from guiflux.simulator import make_sequence

    def stage1_future_accuracy(cfg: RunConfig, seed: int) -> float:
        tasks = make_sequence(cfg.scenario, seed, cfg.sim_overrides)
        policy = GroundingPolicy.zeros(
            tasks[0].state_dim, cfg.optim.init_log_std,
            cfg.optim.init_log_std_size, cfg.optim.init_size,
        )
        policy = train_task(
            policy, policy, tasks[0], cfg, [],
            child_rng(seed, STREAM_TRAIN_INSTANCES, 0),
            child_rng(seed, STREAM_ACTIONS, 0),
        )
        row, _, _ = evaluate(policy, tasks, cfg.eval_episodes, child_rng(seed, STREAM_EVAL, 1))
        return float(row[1:].mean())

    steps = 1300  # task 1 trained to convergence for the transfer snapshot
    full_cfg = replace(arm_config("full"), steps_per_task=steps)
    base_cfg = replace(arm_config("base"), steps_per_task=steps)
    full = np.array([stage1_future_accuracy(full_cfg, s) for s in SEEDS])
    base = np.array([stage1_future_accuracy(base_cfg, s) for s in SEEDS])
    assert full.mean() > base.mean(), (
        f"stage-1 zero-shot on future tasks: full {full.mean():.4f} vs base {base.mean():.4f}"
    )
    ok(10, f"stage-1 zero-shot future-task accuracy {full.mean():.4f} > baseline {base.mean():.4f}")


def test_criterion_11_reversed_sequence(reversed_experiment):
    full = float(np.mean(reversed_experiment["full"]))
    base = float(np.mean(reversed_experiment["base"]))
    assert full >= base, f"reversed order: full {full:.4f} < base {base:.4f}"
    ok(11, f"reversed task order keeps full >= baseline: {full:.4f} vs {base:.4f}")


# ------------------------------------------------------------ system gates


def test_criterion_12_determinism_and_round_trip(tmp_path):
    import json

    cfg_doc = {"steps_per_task": 40, "eval_episodes": 200, "seeds": [3]}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg_doc))
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(cfg_path), str(a)]) == 0
    assert main(["run", str(cfg_path), str(b)]) == 0
    assert (a / "matrix.csv").read_bytes() == (b / "matrix.csv").read_bytes()

    stored = json.loads((a / "metrics.json").read_text())
    again = compute_metrics(read_matrix(a / "matrix.csv"), read_trainlog(a / "trainlog.csv"))
    assert math.isclose(stored["final_average"], again["final_average"], abs_tol=1e-12)
    for x, y in zip(stored["stage_averages"], again["stage_averages"]):
        assert math.isclose(x, y, abs_tol=1e-12)
    for dx, dy in zip(stored["forward_transfer"], again["forward_transfer"]):
        assert dx["stage"] == dy["stage"] and dx["task"] == dy["task"]
        assert math.isclose(dx["delta"], dy["delta"], abs_tol=1e-12)
    for dx, dy in zip(stored["forgetting"], again["forgetting"]):
        assert math.isclose(dx["drop"], dy["drop"], abs_tol=1e-12)
    ok(12, "identical config+seed gives byte-identical matrix.csv; metrics recompute at 1e-12")


def test_criterion_13_verify_negative_controls(monkeypatch, capsys):
    assert main(["verify"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 5

    orig_spread = rewards_mod.center_spread
    monkeypatch.setattr(rewards_mod, "center_spread", lambda g: 1.000001 * orig_spread(g))
    assert main(["verify"]) == 1
    assert "center-spread" in capsys.readouterr().out.splitlines()[-1]
    monkeypatch.setattr(rewards_mod, "center_spread", orig_spread)

    orig_bhat = rewards_mod.bhattacharyya
    monkeypatch.setattr(rewards_mod, "bhattacharyya", lambda a, b: 1.1 * orig_bhat(a, b))
    assert main(["verify"]) == 1
    assert "bhattacharyya" in capsys.readouterr().out.splitlines()[-1]
    monkeypatch.setattr(rewards_mod, "bhattacharyya", orig_bhat)

    orig_sep = rewards_mod.region_separation
    monkeypatch.setattr(
        rewards_mod, "region_separation",
        lambda g, k, e, lit=False: orig_sep(g, k, e, lit) + 1e-6,
    )
    assert main(["verify"]) == 1
    assert "region-separation" in capsys.readouterr().out.splitlines()[-1]
    ok(13, "verify exits 0 clean and 1 under each injected reward-constant mutation")
