"""Canonical synthetic scenes used by the tests, scripts and the training env.

All scenes are 64x64 with one 10x10 object of intensity 0.8 on a flat 0.2
background; the seed picks the start position and heading.
"""

from __future__ import annotations

import math

import numpy as np

from .rl_agent import TrainConfig, train
from .runner import RunConfig, SceneEnv, q_value_bound
from .sci_forward import MaskStack, generate_masks
from .video_io import ObjectSpec, RetimePlan, RetimeSegment, SceneSpec, generate_scene, retime

SIZE = 64
OBJECT = 10
BACKGROUND = 0.2
INTENSITY = 0.8

STATIC_SPEED = 0.0
MOVING_SPEED = 1.0
NORMAL_SPEED = 3.0
FAST_SPEED = 6.0

# sensor noise for the adaptive-vs-fixed comparison on the three-segment scene
COMPARISON_SIGMA = 0.05


def scene_spec(seed: int, duration: int, speed: float, name: str = "scene") -> SceneSpec:
    rng = np.random.default_rng([seed, 7])
    x0, y0 = rng.uniform(0, SIZE - OBJECT, size=2)
    angle = rng.uniform(0, 2 * math.pi)
    v = (speed * math.cos(angle), speed * math.sin(angle))
    obj = ObjectSpec("rectangle", OBJECT, INTENSITY, (float(x0), float(y0)), ((1, v[0], v[1]),))
    return SceneSpec(width=SIZE, height=SIZE, duration=duration, seed=seed, background=BACKGROUND,
                     objects=(obj,), boundary="bounce", name=name)


def moving_scene(seed: int, duration: int = 80, speed: float = MOVING_SPEED):
    return generate_scene(scene_spec(seed, duration, speed, name=f"moving_{seed}"))


def static_scene(seed: int, duration: int = 80):
    return generate_scene(scene_spec(seed, duration, STATIC_SPEED, name=f"static_{seed}"))


def fast_scene(seed: int, duration: int = 80, speed: float = FAST_SPEED):
    return generate_scene(scene_spec(seed, duration, speed, name=f"fast_{seed}"))


def three_segment_scene(seed: int, normal: int = 240, frozen_src: int = 1, freeze: int = 480,
                        fast_src: int = 960, skip: int = 2):
    """Normal motion, then a frozen stretch, then a sped-up stretch.

    A single trajectory at ``NORMAL_SPEED`` is retimed: after ``normal``
    frames, the next ``frozen_src`` frames are each held for ``freeze``
    frames, and of the last ``fast_src`` frames every ``skip``-th is kept.
    The defaults give 240 + 480 + 480 = 1200 frames.
    """
    total = normal + frozen_src + fast_src
    seq, track = generate_scene(scene_spec(seed, total, NORMAL_SPEED, name=f"three_segment_{seed}"))
    plan = RetimePlan((
        RetimeSegment(0, normal),
        RetimeSegment(normal, normal + frozen_src, "freeze", freeze),
        RetimeSegment(normal + frozen_src, total, "skip", skip),
    ))
    return retime(seq, track, plan)


def canonical_masks(seed: int, bmax: int = 20) -> MaskStack:
    return generate_masks(SIZE, SIZE, bmax, seed)


def two_regime_env(seed: int = 0, cfg: RunConfig = RunConfig(), duration: int = 160,
                   switch_prob: float = 0.1) -> SceneEnv:
    """Training environment alternating between a still and a fast scene."""
    regimes = {
        "static": static_scene(seed, duration),
        "fast": fast_scene(seed, duration),
    }
    return SceneEnv(regimes, canonical_masks(seed), cfg, switch_prob=switch_prob)


def train_policy(seed: int = 0, tcfg: TrainConfig = TrainConfig(), cfg: RunConfig = RunConfig()):
    env = two_regime_env(seed, cfg)
    return train(env, tcfg, q_bound=q_value_bound(cfg, tcfg.discount))


