"""Tabular Q-learning with epsilon-greedy exploration over the B-adaptation MDP."""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, NamedTuple, Optional, Tuple

import numpy as np

from .rl_env import ACTIONS, Action

PSNR_BANDS = ("low", "mid", "high")


class Observation(NamedTuple):
    state: int
    rate_bucket: int
    psnr_band: Optional[int] = None  # index into PSNR_BANDS, None when PSNR is not observed


def rate_bucket(rate: float) -> int:
    return min(9, max(0, int(math.floor(rate * 10.0))))


def psnr_band(psnr: Optional[float], low: float = 24.0, high: float = 28.0) -> Optional[int]:
    if psnr is None:
        return None
    if psnr < low:
        return 0
    return 1 if psnr <= high else 2


def observe(state: int, rate: float, psnr: Optional[float] = None, low: float = 24.0,
            high: float = 28.0) -> Observation:
    return Observation(state, rate_bucket(rate), psnr_band(psnr, low, high))


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 500
    steps_per_episode: int = 50
    learning_rate: float = 0.1
    discount: float = 0.9
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.episodes < 0 or self.steps_per_episode < 1:
            raise ValueError("episodes must be >= 0 and steps_per_episode >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError(f"learning_rate must be in (0, 1], got {self.learning_rate}")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(f"discount must be in [0, 1), got {self.discount}")
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ValueError("need 0 <= epsilon_end <= epsilon_start <= 1")

    def epsilon(self, episode: int) -> float:
        """Linear decay from ``epsilon_start`` (first episode) to ``epsilon_end`` (last)."""
        if self.episodes <= 1:
            return self.epsilon_start
        frac = episode / (self.episodes - 1)
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)


class QTable:
    """Action values keyed by observation; unseen entries read as zero."""

    def __init__(self):
        self._q: Dict[Observation, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._q)

    def __contains__(self, o) -> bool:
        return o in self._q

    def observations(self) -> List[Observation]:
        return sorted(self._q, key=_obs_key)

    def values(self, o: Observation) -> np.ndarray:
        v = self._q.get(o)
        return v.copy() if v is not None else np.zeros(len(ACTIONS))

    def get(self, o: Observation, a: Action) -> float:
        v = self._q.get(o)
        return 0.0 if v is None else float(v[int(a)])

    def set(self, o: Observation, a: Action, value: float) -> None:
        if not math.isfinite(value):
            raise ValueError(f"non-finite Q-value {value} for {o}, {a!r}")
        self._q.setdefault(o, np.zeros(len(ACTIONS)))[int(a)] = value

    def max_abs(self) -> float:
        return max((float(np.abs(v).max()) for v in self._q.values()), default=0.0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, QTable) or self._q.keys() != other._q.keys():
            return False
        return all(np.array_equal(v, other._q[k]) for k, v in self._q.items())

    def save(self, path) -> None:
        """Rows ``state_idx rate_bucket psnr_band action value``."""
        with open(path, "w") as f:
            for o in self.observations():
                band = "none" if o.psnr_band is None else PSNR_BANDS[o.psnr_band]
                for a in ACTIONS:
                    f.write(f"{o.state} {o.rate_bucket} {band} {a.name.lower()} "
                            f"{float(self._q[o][int(a)])!r}\n")

    @classmethod
    def load(cls, path) -> "QTable":
        q = cls()
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 5:
                raise ValueError(f"{path}:{lineno}: expected 5 fields, got {len(parts)}")
            s, b, band, a, v = parts
            band_idx = None if band == "none" else PSNR_BANDS.index(band)
            q.set(Observation(int(s), int(b), band_idx), Action.parse(a), float(v))
        return q


def _obs_key(o: Observation):
    return (o.state, o.rate_bucket, -1 if o.psnr_band is None else o.psnr_band)


def _argmax(values: np.ndarray) -> Action:
    # np.argmax returns the first maximum, i.e. the DECREASE < KEEP < INCREASE tie order
    return Action(int(np.argmax(values)))


def select_action(q: QTable, o: Observation, epsilon: float, rng: np.random.Generator) -> Action:
    """Epsilon-greedy. Draws one uniform number per call, plus one more to
    pick the random action when exploring."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    if rng.random() < epsilon:
        return Action(int(rng.integers(len(ACTIONS))))
    return _argmax(q.values(o))


def update(q: QTable, o: Observation, a: Action, r: float, o_next: Optional[Observation],
           cfg: TrainConfig) -> float:
    """One-step Q-learning backup; ``o_next=None`` marks a terminal transition."""
    if not math.isfinite(r):
        raise ValueError(f"reward must be finite, got {r}")
    bootstrap = 0.0 if o_next is None else float(q.values(o_next).max())
    old = q.get(o, a)
    new = old + cfg.learning_rate * (r + cfg.discount * bootstrap - old)
    q.set(o, a, new)
    return new


class GreedyPolicy(Mapping):
    """Materialized greedy policy. Total: unseen observations map to DECREASE."""

    def __init__(self, q: QTable):
        self._table = {o: _argmax(q.values(o)) for o in q.observations()}

    def __getitem__(self, o: Observation) -> Action:
        return self._table.get(o, Action.DECREASE)

    def __iter__(self) -> Iterator[Observation]:
        return iter(self._table)

    def __len__(self) -> int:
        return len(self._table)

    def __call__(self, o: Observation) -> Action:
        return self[o]


def greedy_policy(q: QTable) -> GreedyPolicy:
    return GreedyPolicy(q)


def train(env, cfg: TrainConfig, q_bound: Optional[float] = None) -> Tuple[QTable, List[float]]:
    """Run ``cfg.episodes`` episodes of epsilon-greedy Q-learning.

    ``env`` provides ``reset(rng) -> Observation`` and
    ``step(action, rng) -> (Observation, reward)``. Episodes are truncated at
    ``steps_per_episode`` (the last backup still bootstraps). When
    ``q_bound`` is given every stored value is checked against it.

    Returns the table and the total reward of each episode.
    """
    rng = np.random.default_rng(cfg.seed)
    q = QTable()
    returns: List[float] = []
    for ep in range(cfg.episodes):
        eps = cfg.epsilon(ep)
        o = env.reset(rng)
        total = 0.0
        for _ in range(cfg.steps_per_episode):
            a = select_action(q, o, eps, rng)
            o_next, r = env.step(a, rng)
            v = update(q, o, a, r, o_next, cfg)
            if q_bound is not None and abs(v) > q_bound:
                raise RuntimeError(f"Q-value {v} exceeds the contraction bound {q_bound}")
            total += r
            o = o_next
        returns.append(total)
    return q, returns
