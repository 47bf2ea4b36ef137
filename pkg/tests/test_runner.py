import csv
import math

import numpy as np
import pytest

from adaptive_sci.fixtures import (
    canonical_masks,
    fast_scene,
    moving_scene,
    static_scene,
    three_segment_scene,
    train_policy,
)
from adaptive_sci.rl_agent import greedy_policy
from adaptive_sci.rl_env import Action, reward
from adaptive_sci.runner import (
    LOG_FIELDS,
    EpisodeLog,
    RunConfig,
    RunError,
    StepRecord,
    compare,
    emit_csv,
    nearest_state,
    read_log_csv,
    run_adaptive,
    run_fixed,
    summarize,
)
from adaptive_sci.sci_forward import generate_masks


def _cycle(o):
    # deterministic non-trivial policy for plumbing tests
    return Action((o.state + o.rate_bucket) % 3)


@pytest.fixture(scope="module")
def policy():
    q, _ = train_policy(0)
    return greedy_policy(q)


@pytest.fixture(scope="module")
def moving():
    return moving_scene(4, duration=200), canonical_masks(4)


# --- config and input checks -------------------------------------------------------

def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(batch_size=0)
    with pytest.raises(ValueError):
        RunConfig(initial_b=7)
    with pytest.raises(ValueError):
        RunConfig(with_psnr_shaping=True)
    with pytest.raises(ValueError):
        RunConfig(sigma=-0.1)


def test_rejects_mismatched_masks_and_short_video(moving):
    (seq, track), _ = moving
    with pytest.raises(RunError):
        run_fixed(seq, track, generate_masks(32, 32, 20, seed=0), 6)
    with pytest.raises(RunError):
        run_fixed(seq, track, generate_masks(64, 64, 15, seed=0), 6)
    short, st = moving_scene(0, duration=30)
    with pytest.raises(RunError):
        run_fixed(short, st, canonical_masks(0), 10)


# --- loop accounting ------------------------------------------------------------------

def test_frame_accounting(moving):
    (seq, track), c = moving
    cfg = RunConfig(seed=3)
    log = run_adaptive(seq, track, c, _cycle, cfg)
    steps = log.steps
    assert steps[0].first_frame == 0
    assert all(b.first_frame == a.last_frame + 1 for a, b in zip(steps, steps[1:]))
    assert all(s.frames == cfg.batch_size * s.B for s in steps)
    assert all(a.next_B == b.B for a, b in zip(steps, steps[1:]))
    total = sum(s.frames for s in steps)
    summ = log.summary()
    assert summ["total_frames"] == total
    assert summ["total_frames"] + summ["dropped_frames"] == len(seq)
    assert summ["dropped_frames"] < cfg.batch_size * steps[-1].next_B
    assert summ["mean_B"] == total / summ["measurements"]


def test_fixed_run_mean_b_is_exact(moving):
    (seq, track), c = moving
    for B in (6, 15):
        assert run_fixed(seq, track, c, B).summary()["mean_B"] == B


def test_keep_policy_matches_fixed_run(moving):
    (seq, track), c = moving
    cfg = RunConfig(initial_b=12, seed=5, sigma=0.01)
    a = run_adaptive(seq, track, c, lambda o: Action.KEEP, cfg)
    b = run_fixed(seq, track, c, 12, RunConfig(seed=5, sigma=0.01))
    strip = lambda log: [(s.first_frame, s.B, s.action, s.next_B, s.reward, s.detection_rate)  # noqa: E731
                         for s in log.steps]
    assert strip(a) == strip(b)


def test_logged_rewards_match_reward_table(moving):
    (seq, track), c = moving
    cfg = RunConfig(seed=1, with_reconstruction=True, with_psnr_shaping=True,
                    initial_b=20, batch_size=2)
    log = run_adaptive(seq, track, c, _cycle, cfg)
    for s in log.steps:
        expected = reward(Action.parse(s.action), cfg.states.index(s.B), s.detection_rate, s.psnr,
                          cfg.reward, len(cfg.states))
        assert s.reward == expected
        assert s.psnr is not None


def test_runs_are_deterministic(moving):
    (seq, track), c = moving
    cfg = RunConfig(seed=11, sigma=0.02)
    a = run_adaptive(seq, track, c, _cycle, cfg)
    b = run_adaptive(seq, track, c, _cycle, cfg)
    assert [(s.B, s.reward, s.detection_rate) for s in a.steps] == \
           [(s.B, s.reward, s.detection_rate) for s in b.steps]


def test_summary_of_nothing():
    summ = summarize([])
    assert summ["total_frames"] == 0 and math.isnan(summ["mean_B"])


def test_summary_is_frame_weighted():
    steps = [StepRecord(0, 23, 6, "keep", 20, 1.0, 1.0, 30.0),
             StepRecord(24, 103, 20, "keep", 20, 1.0, 0.0, 20.0)]
    summ = summarize(steps)
    assert summ["mean_B"] == 104 / 8
    assert summ["mean_detection_rate"] == pytest.approx(24 / 104)
    assert summ["mean_psnr"] == pytest.approx((24 * 30 + 80 * 20) / 104)


# --- compare -----------------------------------------------------------------------

@pytest.mark.parametrize("mean_b,nearest", [(6.0, 6), (9.0, 8), (9.3, 10), (13.5, 12), (17.5, 15), (30, 20)])
def test_nearest_state(mean_b, nearest):
    assert nearest_state(mean_b, (6, 8, 10, 12, 15, 20)) == nearest


def test_compare_against_itself_and_all_baselines(moving):
    (seq, track), c = moving
    cfg = RunConfig(with_reconstruction=True, batch_size=1)
    fixed = [run_fixed(seq, track, c, B, cfg) for B in cfg.states.values]
    rep = compare(fixed[2], fixed)
    assert sorted(rep.fixed) == [6, 8, 10, 12, 15, 20]
    assert rep.nearest_B == 10
    assert rep.nearest_delta == (0.0, 0.0)


def test_compare_rejects_other_video(moving):
    (seq, track), c = moving
    other, ot = moving_scene(5, duration=200)
    a = run_fixed(seq, track, c, 6)
    with pytest.raises(RunError):
        compare(a, [run_fixed(other, ot, c, 6)])
    with pytest.raises(RunError):
        compare(a, [])


# --- CSV -----------------------------------------------------------------------------

def test_empty_log_is_header_only(tmp_path):
    emit_csv(EpisodeLog(), tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text() == ",".join(f for f in LOG_FIELDS if f != "wall_clock") + "\n"


def test_csv_rows_and_round_trip(moving, tmp_path):
    (seq, track), c = moving
    log = run_adaptive(seq, track, c, _cycle, RunConfig(seed=2, with_reconstruction=True))
    emit_csv(log, tmp_path / "log.csv")
    text = (tmp_path / "log.csv").read_text()
    assert text.endswith("\n")
    assert len(text.splitlines()) == len(log.steps) + 1
    back = summarize(read_log_csv(tmp_path / "log.csv"), log.dropped_frames)
    for k, v in log.summary().items():
        assert back[k] == pytest.approx(v, rel=1e-5)


def test_timing_column_is_optional(moving, tmp_path):
    (seq, track), c = moving
    log = run_fixed(seq, track, c, 20)
    emit_csv(log, tmp_path / "t.csv", include_timing=True)
    with open(tmp_path / "t.csv") as f:
        header = next(csv.reader(f))
    assert header == LOG_FIELDS


def test_report_csv(moving, tmp_path):
    (seq, track), c = moving
    fixed = [run_fixed(seq, track, c, B) for B in (6, 8, 10, 12, 15, 20)]
    emit_csv(compare(fixed[0], fixed), tmp_path / "r.csv")
    rows = list(csv.DictReader(open(tmp_path / "r.csv")))
    assert [r["run"] for r in rows] == ["adaptive"] + [f"fixed_{B}" for B in (6, 8, 10, 12, 15, 20)]
    assert [r["nearest"] for r in rows[1:]] == ["1", "0", "0", "0", "0", "0"]


# --- fixture behaviour -------------------------------------------------------------------

def test_fixed_b_min_has_best_psnr_on_static_scene():
    seq, track = static_scene(0, duration=240)
    c = canonical_masks(0)
    cfg = RunConfig(with_reconstruction=True, batch_size=1)
    scores = {B: run_fixed(seq, track, c, B, cfg).summary()["mean_psnr"] for B in (6, 10, 20)}
    assert scores[6] == max(scores.values())


def test_large_fixed_b_fails_on_fast_scene():
    seq, track = fast_scene(0, duration=240)
    rate = run_fixed(seq, track, canonical_masks(0), 20).summary()["mean_detection_rate"]
    assert rate < RunConfig().reward.drth


@pytest.mark.parametrize("start", [6, 8, 10, 12, 15, 20])
def test_policy_settles_on_static_and_fast(policy, start):
    seq, track = static_scene(200, duration=400)
    trace = run_adaptive(seq, track, canonical_masks(200), policy,
                         RunConfig(initial_b=start, seed=200)).b_trace()
    assert 20 in trace[:6] and set(trace[trace.index(20):]) == {20}
    seq, track = fast_scene(200, duration=400)
    trace = run_adaptive(seq, track, canonical_masks(200), policy,
                         RunConfig(initial_b=start, seed=200)).b_trace()
    assert 6 in trace[:6]


def test_three_segment_trace_rises_then_falls(policy):
    seq, track = three_segment_scene(100)
    log = run_adaptive(seq, track, canonical_masks(100), policy, RunConfig(seed=100))
    normal_end, frozen_end = 240, 240 + 480
    frozen = [s.next_B for s in log.steps if normal_end <= s.first_frame < frozen_end]
    fast = [s.next_B for s in log.steps if s.first_frame >= frozen_end]
    assert max(frozen) == 20
    assert fast[-1] == 6 and np.mean(fast) < np.mean(frozen)
