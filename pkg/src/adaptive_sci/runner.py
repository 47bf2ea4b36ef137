"""The capture loop: sense at the current B, detect, score, reward, adapt."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, fields
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .detect import BoundingBox, DetectorConfig, detection_rate
from .reconstruct import ReconstructionConfig, gap_tv, psnr
from .rl_agent import Observation, observe
from .rl_env import Action, RewardConfig, StateSpace, TransitionModel, reward, step
from .sci_forward import MaskStack, Measurement, sense
from .video_io import FrameSequence, GroundTruthTrack

Policy = Callable[[Observation], Action]


class RunError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    states: StateSpace = StateSpace()
    transition: TransitionModel = TransitionModel()
    reward: RewardConfig = RewardConfig()
    detector: DetectorConfig = DetectorConfig()
    reconstruction: ReconstructionConfig = ReconstructionConfig()
    batch_size: int = 4
    initial_b: Optional[int] = None  # None: uniform over the state space
    with_reconstruction: bool = False
    with_psnr_shaping: bool = False
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.initial_b is not None:
            self.states.index(self.initial_b)
        if self.with_psnr_shaping and not self.with_reconstruction:
            raise ValueError("with_psnr_shaping requires with_reconstruction")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")

    def rngs(self):
        """Independent generators for (initial B, sensing noise, transitions)."""
        return [np.random.default_rng(s) for s in np.random.SeedSequence(self.seed).spawn(3)]


@dataclass
class StepRecord:
    first_frame: int
    last_frame: int
    B: int
    action: str
    next_B: int
    reward: float
    detection_rate: float
    psnr: Optional[float] = None
    wall_clock: float = 0.0

    @property
    def frames(self) -> int:
        return self.last_frame - self.first_frame + 1

    @property
    def measurements(self) -> int:
        return self.frames // self.B


LOG_FIELDS = [f.name for f in fields(StepRecord)]


@dataclass
class EpisodeLog:
    steps: List[StepRecord] = field(default_factory=list)
    video: str = ""
    mask_seed: int = 0
    label: str = "adaptive"
    dropped_frames: int = 0

    def summary(self) -> Dict[str, float]:
        return summarize(self.steps, self.dropped_frames)

    def b_trace(self) -> List[int]:
        """B before the first step followed by B after every step."""
        if not self.steps:
            return []
        return [self.steps[0].B] + [s.next_B for s in self.steps]


def summarize(steps: Sequence[StepRecord], dropped_frames: int = 0) -> Dict[str, float]:
    """Frame-weighted means: every source frame counts once."""
    total = sum(s.frames for s in steps)
    n_meas = sum(s.measurements for s in steps)
    out = {
        "total_frames": total,
        "measurements": n_meas,
        "dropped_frames": dropped_frames,
        "mean_B": total / n_meas if n_meas else math.nan,
        "mean_detection_rate": (sum(s.detection_rate * s.frames for s in steps) / total
                                if total else math.nan),
        "mean_psnr": math.nan,
    }
    out["frames_per_measurement"] = out["mean_B"]
    with_psnr = [s for s in steps if s.psnr is not None]
    if with_psnr:
        out["mean_psnr"] = sum(s.psnr * s.frames for s in with_psnr) / sum(s.frames for s in with_psnr)
    return out


def _check_inputs(video: FrameSequence, track: Optional[GroundTruthTrack], masks: MaskStack,
                  cfg: RunConfig):
    if masks.shape != (video.height, video.width):
        raise RunError(f"mask size {masks.shape} does not match video {(video.height, video.width)}")
    if masks.bmax < cfg.states.bmax:
        raise RunError(f"masks hold {masks.bmax} planes, state space needs {cfg.states.bmax}")
    if track is None or len(track) != len(video):
        raise RunError("a ground-truth track covering every frame is required")
    if cfg.with_psnr_shaping and not cfg.with_reconstruction:
        raise RunError("PSNR shaping requires reconstruction")


def run_adaptive(video: FrameSequence, track: GroundTruthTrack, masks: MaskStack,
                 policy: Union[Policy, Mapping], cfg: RunConfig = RunConfig(),
                 label: str = "adaptive") -> EpisodeLog:
    """Capture the whole video, adapting B once per batch of measurements.

    Each step consumes ``batch_size * B`` frames. Frames left over when the
    next batch no longer fits are dropped and counted in the summary.
    """
    _check_inputs(video, track, masks, cfg)
    if isinstance(policy, Mapping) and not callable(policy):
        table = policy
        policy = lambda o: table[o]  # noqa: E731
    states = cfg.states
    rng_init, rng_noise, rng_trans = cfg.rngs()
    if cfg.initial_b is None:
        s = int(rng_init.integers(len(states)))
    else:
        s = states.index(cfg.initial_b)
    if cfg.batch_size * states[s] > len(video):
        raise RunError(f"video of {len(video)} frames is shorter than one batch at B={states[s]}")

    log = EpisodeLog(video=video.name, mask_seed=masks.seed, label=label)
    pos = 0
    while pos + cfg.batch_size * states[s] <= len(video):
        t0 = time.perf_counter()
        B = states[s]
        ms: List[Measurement] = []
        gts: List[List[BoundingBox]] = []
        truth = []
        for k in range(cfg.batch_size):
            start = pos + k * B
            x = video.window(start, B)
            ms.append(sense(x, masks, B, cfg.sigma, rng_noise, frame_offset=start))
            gts.append([BoundingBox(*h) for h in track.hulls(start, B)])
            truth.append(x)
        rate = detection_rate(ms, gts, masks, cfg.detector)
        q = None
        if cfg.with_reconstruction:
            recon = [gap_tv(m, masks, cfg.reconstruction) for m in ms]
            q = psnr(np.stack(recon, axis=-1), np.stack(truth, axis=-1)).psnr_db
        shaped = q if cfg.with_psnr_shaping else None
        o = observe(s, rate, shaped, cfg.reward.psnr_low, cfg.reward.psnr_high)
        a = Action(policy(o))
        r = reward(a, s, rate, shaped, cfg.reward, len(states))
        s_next = step(s, a, cfg.transition, rng_trans, len(states))
        n = cfg.batch_size * B
        log.steps.append(StepRecord(pos, pos + n - 1, B, a.name.lower(), states[s_next], r, rate, q,
                                    time.perf_counter() - t0))
        pos += n
        s = s_next
    log.dropped_frames = len(video) - pos
    return log


def run_fixed(video: FrameSequence, track: GroundTruthTrack, masks: MaskStack, B: int,
              cfg: RunConfig = RunConfig()) -> EpisodeLog:
    """Non-adaptive baseline: the same loop with the action pinned to KEEP."""
    cfg.states.index(B)
    fixed = RunConfig(**{**{f.name: getattr(cfg, f.name) for f in fields(cfg)}, "initial_b": B})
    return run_adaptive(video, track, masks, lambda o: Action.KEEP, fixed, label=f"fixed_{B}")


@dataclass
class ComparisonReport:
    adaptive: Dict[str, float]
    fixed: Dict[int, Dict[str, float]]
    nearest_B: int
    deltas: Dict[int, Tuple[float, float]]  # B -> (psnr delta dB, detection-rate delta)

    @property
    def nearest_delta(self) -> Tuple[float, float]:
        return self.deltas[self.nearest_B]


def nearest_state(mean_b: float, states: Sequence[int]) -> int:
    # ties go to the smaller B
    return min(states, key=lambda b: (abs(b - mean_b), b))


def compare(adaptive: EpisodeLog, fixed: Sequence[EpisodeLog]) -> ComparisonReport:
    if not fixed:
        raise RunError("no fixed baselines to compare against")
    for f in fixed:
        if (f.video, f.mask_seed) != (adaptive.video, adaptive.mask_seed):
            raise RunError(f"baseline {f.label!r} ran on a different video or mask set")
    a = adaptive.summary()
    fixed_summ = {}
    for f in fixed:
        if not f.steps:
            raise RunError(f"baseline {f.label!r} has no steps")
        fixed_summ[f.steps[0].B] = f.summary()
    deltas = {B: (a["mean_psnr"] - fs["mean_psnr"], a["mean_detection_rate"] - fs["mean_detection_rate"])
              for B, fs in fixed_summ.items()}
    return ComparisonReport(a, fixed_summ, nearest_state(a["mean_B"], sorted(fixed_summ)), deltas)


# --- CSV -------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float) and math.isnan(v):
        return ""
    return f"{v:.6g}"


REPORT_FIELDS = ["run", "B", "mean_B", "mean_psnr", "mean_detection_rate", "total_frames",
                 "measurements", "delta_psnr", "delta_detection_rate", "nearest"]


def emit_csv(obj: Union[EpisodeLog, ComparisonReport], path, include_timing: bool = False) -> None:
    """Write a log (one row per step) or a comparison report as CSV.

    Wall-clock timings vary between runs, so they are written only when
    ``include_timing`` is set.
    """
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        if isinstance(obj, EpisodeLog):
            cols = LOG_FIELDS if include_timing else [c for c in LOG_FIELDS if c != "wall_clock"]
            w.writerow(cols)
            for s in obj.steps:
                w.writerow([_fmt(getattr(s, c)) for c in cols])
        else:
            w.writerow(REPORT_FIELDS)
            a = obj.adaptive
            w.writerow(["adaptive", "", _fmt(a["mean_B"]), _fmt(a["mean_psnr"]),
                        _fmt(a["mean_detection_rate"]), a["total_frames"], a["measurements"], "", "", ""])
            for B in sorted(obj.fixed):
                s = obj.fixed[B]
                dp, dr = obj.deltas[B]
                w.writerow([f"fixed_{B}", B, _fmt(s["mean_B"]), _fmt(s["mean_psnr"]),
                            _fmt(s["mean_detection_rate"]), s["total_frames"], s["measurements"],
                            _fmt(dp), _fmt(dr), int(B == obj.nearest_B)])


def read_log_csv(path) -> List[StepRecord]:
    out = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            out.append(StepRecord(
                first_frame=int(row["first_frame"]), last_frame=int(row["last_frame"]), B=int(row["B"]),
                action=row["action"], next_B=int(row["next_B"]), reward=float(row["reward"]),
                detection_rate=float(row["detection_rate"]),
                psnr=float(row["psnr"]) if row.get("psnr") else None,
                wall_clock=float(row["wall_clock"]) if row.get("wall_clock") else 0.0))
    return out


# --- training environment ---------------------------------------------------

class SceneEnv:
    """Episodic environment backed by real sensing and detection.

    Each regime is a (video, track) pair. An episode draws a regime and a
    start state; every step evaluates the batch detection rate of a randomly
    placed window at the current B. Rates are cached per (regime, B, window)
    so long training runs stay cheap. With ``switch_prob > 0`` the scene may
    change regime between steps.
    """

    def __init__(self, regimes: Dict[str, Tuple[FrameSequence, GroundTruthTrack]], masks: MaskStack,
                 cfg: RunConfig = RunConfig(), switch_prob: float = 0.1, n_windows: int = 8):
        if not regimes:
            raise ValueError("at least one regime is required")
        self.names = sorted(regimes)
        self.regimes = regimes
        self.masks = masks
        self.cfg = cfg
        self.switch_prob = switch_prob
        self.n_windows = n_windows
        self._cache: Dict[Tuple[str, int, int], Tuple[float, Optional[float]]] = {}
        span = cfg.batch_size * cfg.states.bmax
        for name, (video, track) in regimes.items():
            _check_inputs(video, track, masks, cfg)
            if len(video) < span:
                raise RunError(f"regime {name!r} is shorter than one batch at B_max")
        self.regime = self.names[0]
        self.state = 0
        self.rate = 0.0
        self.psnr: Optional[float] = None

    def _windows(self, name: str, B: int) -> List[int]:
        n = len(self.regimes[name][0]) - self.cfg.batch_size * B
        return sorted(set(np.linspace(0, n, self.n_windows).astype(int).tolist()))

    def evaluate(self, name: str, B: int, start: int) -> Tuple[float, Optional[float]]:
        key = (name, B, start)
        if key not in self._cache:
            video, track = self.regimes[name]
            cfg = self.cfg
            noise = np.random.default_rng([cfg.seed, B, start])
            ms, gts, truth = [], [], []
            for k in range(cfg.batch_size):
                t = start + k * B
                x = video.window(t, B)
                ms.append(sense(x, self.masks, B, cfg.sigma, noise, frame_offset=t))
                gts.append([BoundingBox(*h) for h in track.hulls(t, B)])
                truth.append(x)
            rate = detection_rate(ms, gts, self.masks, cfg.detector)
            q = None
            if cfg.with_psnr_shaping:
                recon = [gap_tv(m, self.masks, cfg.reconstruction) for m in ms]
                q = psnr(np.stack(recon, -1), np.stack(truth, -1)).psnr_db
            self._cache[key] = (rate, q)
        return self._cache[key]

    def _measure(self, rng) -> Observation:
        B = self.cfg.states[self.state]
        wins = self._windows(self.regime, B)
        self.rate, self.psnr = self.evaluate(self.regime, B, wins[int(rng.integers(len(wins)))])
        return observe(self.state, self.rate, self.psnr, self.cfg.reward.psnr_low, self.cfg.reward.psnr_high)

    def reset(self, rng) -> Observation:
        self.regime = self.names[int(rng.integers(len(self.names)))]
        self.state = int(rng.integers(len(self.cfg.states)))
        return self._measure(rng)

    def step(self, a: Action, rng) -> Tuple[Observation, float]:
        n = len(self.cfg.states)
        r = reward(a, self.state, self.rate, self.psnr, self.cfg.reward, n)
        self.state = step(self.state, a, self.cfg.transition, rng, n)
        if self.switch_prob > 0 and rng.random() < self.switch_prob:
            self.regime = self.names[int(rng.integers(len(self.names)))]
        return self._measure(rng), r


def q_value_bound(cfg: RunConfig, discount: float) -> float:
    rc = cfg.reward
    return max(abs(rc.r1 * rc.lambda1), abs(rc.r2 * rc.lambda1)) / (1.0 - discount)
