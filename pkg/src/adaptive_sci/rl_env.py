"""The compression-ratio MDP: states, actions, stochastic transitions, rewards."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .sci_forward import DEFAULT_STATES


class Action(enum.IntEnum):
    # the integer order doubles as the greedy tie-break order
    DECREASE = 0
    KEEP = 1
    INCREASE = 2

    @classmethod
    def parse(cls, name: str) -> "Action":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown action {name!r}") from None


ACTIONS = tuple(Action)


@dataclass(frozen=True)
class StateSpace:
    values: Tuple[int, ...] = DEFAULT_STATES

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        if len(vals) < 2:
            raise ValueError("state space needs at least two compression ratios")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError(f"state values must be strictly increasing, got {vals}")
        if vals[0] < 1:
            raise ValueError("compression ratios must be >= 1")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, i: int) -> int:
        return self.values[i]

    def index(self, B: int) -> int:
        try:
            return self.values.index(B)
        except ValueError:
            raise ValueError(f"B={B} is not in the state space {self.values}") from None

    @property
    def bmin(self) -> int:
        return self.values[0]

    @property
    def bmax(self) -> int:
        return self.values[-1]

    @property
    def last(self) -> int:
        return len(self.values) - 1


@dataclass(frozen=True)
class TransitionModel:
    """``alpha``: P(Increase moves one state up) where a two-state jump exists.
    ``beta``: P(Decrease skips two states down) where a two-state jump exists.
    """

    alpha: float = 0.7
    beta: float = 0.7

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")


@dataclass(frozen=True)
class RewardConfig:
    drth: float = 0.75
    psnrth: float = 26.0
    r1: float = 1.0
    r2: float = -1.0
    lambda1: float = 1.5
    lambda2: float = 0.5
    psnr_low: float = 24.0
    psnr_high: float = 28.0

    def __post_init__(self):
        if not self.r1 > 0 > self.r2:
            raise ValueError(f"need r1 > 0 > r2, got r1={self.r1} r2={self.r2}")
        if not 1.0 < self.lambda1 < 2.0:
            raise ValueError(f"lambda1 must be in (1, 2), got {self.lambda1}")
        if not 0.0 < self.lambda2 < 1.0:
            raise ValueError(f"lambda2 must be in (0, 1), got {self.lambda2}")
        if not self.psnr_low < self.psnr_high:
            raise ValueError("psnr_low must be below psnr_high")
        if not 0.0 < self.drth < 1.0:
            raise ValueError(f"drth must be in (0, 1), got {self.drth}")


def transition_distribution(s: int, a: Action, t: TransitionModel,
                            n_states: int = len(DEFAULT_STATES)) -> List[Tuple[int, float]]:
    """Next-state distribution as ``[(index, probability), ...]``.

    Moving toward a boundary that is one state away is certain; from further
    away the move covers one or two states. At the boundary itself the
    infeasible direction leaves the state unchanged.
    """
    if not 0 <= s < n_states:
        raise ValueError(f"state index {s} outside 0..{n_states - 1}")
    a = Action(a)
    last = n_states - 1
    if a is Action.KEEP:
        return [(s, 1.0)]
    if a is Action.INCREASE:
        if s == last:
            return [(s, 1.0)]
        if s == last - 1:
            return [(last, 1.0)]
        return [(s + 1, t.alpha), (s + 2, 1.0 - t.alpha)]
    if s == 0:
        return [(s, 1.0)]
    if s == 1:
        return [(0, 1.0)]
    return [(s - 2, t.beta), (s - 1, 1.0 - t.beta)]


def step(s: int, a: Action, t: TransitionModel, rng: np.random.Generator,
         n_states: int = len(DEFAULT_STATES)) -> int:
    """Sample the next state index.

    Exactly one uniform draw is consumed per call, whatever the action, so
    parallel runs stay aligned on the same generator stream.
    """
    dist = transition_distribution(s, a, t, n_states)
    u = rng.random()
    if len(dist) == 1:
        return dist[0][0]
    return dist[0][0] if u < dist[0][1] else dist[1][0]


def base_reward(a: Action, s: int, detect_rate: float, cfg: RewardConfig, n_states: int) -> float:
    if detect_rate < cfg.drth:
        good = a is Action.DECREASE or (a is Action.KEEP and s == 0)
    else:
        good = a is Action.INCREASE or (a is Action.KEEP and s == n_states - 1)
    return cfg.r1 if good else cfg.r2


def reward(a: Action, s: int, detect_rate: float, psnr: Optional[float] = None,
           cfg: RewardConfig = RewardConfig(), n_states: int = len(DEFAULT_STATES)) -> float:
    """Detection-rate reward, optionally strengthened or weakened by PSNR."""
    if not 0.0 <= detect_rate <= 1.0:
        raise ValueError(f"detect_rate must be in [0, 1], got {detect_rate}")
    a = Action(a)
    r = base_reward(a, s, detect_rate, cfg, n_states)
    if psnr is None:
        return r
    if psnr > cfg.psnrth:
        return r * cfg.lambda1 if r > 0 else r * cfg.lambda2
    return r * cfg.lambda2 if r > 0 else r * cfg.lambda1


def psnr_band_reward(psnr: float, B: int, cfg: RewardConfig = RewardConfig()) -> float:
    """``(psnr - psnr_low) * B``: zero at the low edge, negative below it,
    positive within and above the good band."""
    return (psnr - cfg.psnr_low) * B


def reward_set(cfg: RewardConfig) -> Sequence[float]:
    """Every value :func:`reward` can return."""
    return (cfg.r1, cfg.r2, cfg.r1 * cfg.lambda1, cfg.r1 * cfg.lambda2,
            cfg.r2 * cfg.lambda1, cfg.r2 * cfg.lambda2)
