"""Plain-text run configuration: ``[section]`` headers and ``key = value`` lines.

Sections mirror the config dataclasses::

    [run]            batch_size, initial_b, with_reconstruction, with_psnr_shaping, sigma, seed
    [states]         values = 6, 8, 10, 12, 15, 20
    [transition]     alpha, beta
    [reward]         drth, psnrth, r1, r2, lambda1, lambda2, psnr_low, psnr_high
    [detector]       threshold, min_area, iou_thresh
    [reconstruction] max_iters, tv_weight, tv_inner_iters, tol
    [train]          episodes, steps_per_episode, learning_rate, discount, epsilon_start, epsilon_end, seed
    [paths]          video, masks, qtable
    [scene]          width, height, duration, seed, background, texture, boundary, fps, name
    [object.N]       shape, size, intensity, position = x, y, velocity = n:vx:vy; n:vx:vy
    [retime.N]       start, stop, mode, factor

Unknown sections or keys raise :class:`ConfigError`.
"""

from __future__ import annotations

import configparser
import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

from .detect import DetectorConfig
from .reconstruct import ReconstructionConfig
from .rl_agent import TrainConfig
from .rl_env import RewardConfig, StateSpace, TransitionModel
from .runner import RunConfig
from .video_io import ObjectSpec, RetimePlan, RetimeSegment, SceneSpec


class ConfigError(ValueError):
    pass


@dataclass
class Paths:
    video: Optional[str] = None
    masks: Optional[str] = None
    qtable: Optional[str] = None


@dataclass
class Config:
    run: RunConfig = field(default_factory=RunConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    paths: Paths = field(default_factory=Paths)
    scene: Optional[SceneSpec] = None
    retime: Optional[RetimePlan] = None


_RUN_SECTIONS = {
    "transition": TransitionModel,
    "reward": RewardConfig,
    "detector": DetectorConfig,
    "reconstruction": ReconstructionConfig,
}
_RUN_SCALARS = ("batch_size", "initial_b", "with_reconstruction", "with_psnr_shaping", "sigma", "seed")


def _coerce(raw: str, tp, where: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union and type(None) in args:
        if raw.strip().lower() in ("", "none", "random"):
            return None
        inner = [a for a in args if a is not type(None)][0]
        return _coerce(raw, inner, where)
    try:
        if tp is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if tp is int:
            return int(raw)
        if tp is float:
            return float(raw)
        if tp is str:
            return raw.strip()
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {tp.__name__}") from None
    raise ConfigError(f"{where}: unsupported field type {tp}")


def _build(cls, items: Dict[str, str], section: str, skip=()):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs: Dict[str, Any] = {}
    for key, raw in items.items():
        if key not in names or key in skip:
            raise ConfigError(f"[{section}] unknown key {key!r}")
        kwargs[key] = _coerce(raw, hints[key], f"[{section}] {key}")
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def _floats(raw: str, where: str):
    try:
        return tuple(float(p) for p in raw.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"{where}: expected numbers, got {raw!r}") from None


def _object(items: Dict[str, str], section: str) -> ObjectSpec:
    known = {"shape", "size", "intensity", "position", "velocity"}
    for key in items:
        if key not in known:
            raise ConfigError(f"[{section}] unknown key {key!r}")
    kw: Dict[str, Any] = {}
    if "shape" in items:
        kw["shape"] = items["shape"].strip()
    if "size" in items:
        kw["size"] = _coerce(items["size"], int, f"[{section}] size")
    if "intensity" in items:
        kw["intensity"] = _coerce(items["intensity"], float, f"[{section}] intensity")
    if "position" in items:
        pos = _floats(items["position"], f"[{section}] position")
        if len(pos) != 2:
            raise ConfigError(f"[{section}] position needs two numbers")
        kw["position"] = pos
    if "velocity" in items:
        segs = []
        for chunk in items["velocity"].split(";"):
            parts = chunk.strip().split(":")
            if len(parts) != 3:
                raise ConfigError(f"[{section}] velocity segments must be n:vx:vy, got {chunk!r}")
            try:
                segs.append((int(parts[0]), float(parts[1]), float(parts[2])))
            except ValueError:
                raise ConfigError(f"[{section}] bad velocity segment {chunk!r}") from None
        kw["velocity"] = tuple(segs)
    return ObjectSpec(**kw)


def _indexed(cp, prefix: str):
    out = []
    for name in cp.sections():
        if name.startswith(prefix + "."):
            try:
                out.append((int(name[len(prefix) + 1:]), name))
            except ValueError:
                raise ConfigError(f"section [{name}] needs an integer index") from None
    return sorted(out)


def parse_config(text: str) -> Config:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    known = {"run", "states", "train", "paths", "scene", *_RUN_SECTIONS}
    for name in cp.sections():
        base = name.split(".", 1)[0]
        if name not in known and base not in ("object", "retime"):
            raise ConfigError(f"unknown section [{name}]")

    run_kw: Dict[str, Any] = {}
    for sec, cls in _RUN_SECTIONS.items():
        if cp.has_section(sec):
            run_kw[sec] = _build(cls, dict(cp[sec]), sec)
    if cp.has_section("states"):
        items = dict(cp["states"])
        if set(items) - {"values"}:
            raise ConfigError(f"[states] unknown key {sorted(set(items) - {'values'})[0]!r}")
        if "values" in items:
            vals = _floats(items["values"], "[states] values")
            if any(v != int(v) for v in vals):
                raise ConfigError("[states] values must be integers")
            try:
                run_kw["states"] = StateSpace(tuple(int(v) for v in vals))
            except ValueError as exc:
                raise ConfigError(f"[states] {exc}") from None
    if cp.has_section("run"):
        hints = typing.get_type_hints(RunConfig)
        for key, raw in cp["run"].items():
            if key not in _RUN_SCALARS:
                raise ConfigError(f"[run] unknown key {key!r}")
            run_kw[key] = _coerce(raw, hints[key], f"[run] {key}")
    try:
        run = RunConfig(**run_kw)
    except ValueError as exc:
        raise ConfigError(f"[run] {exc}") from None

    cfg = Config(run=run)
    if cp.has_section("train"):
        cfg.train = _build(TrainConfig, dict(cp["train"]), "train")
    if cp.has_section("paths"):
        cfg.paths = _build(Paths, dict(cp["paths"]), "paths")

    objects = tuple(_object(dict(cp[name]), name) for _, name in _indexed(cp, "object"))
    if cp.has_section("scene") or objects:
        items = dict(cp["scene"]) if cp.has_section("scene") else {}
        spec = _build(SceneSpec, items, "scene", skip=("objects",))
        cfg.scene = dataclasses.replace(spec, objects=objects)
        try:
            cfg.scene.validate()
        except ValueError as exc:
            raise ConfigError(f"[scene] {exc}") from None
    segs = [_build(RetimeSegment, dict(cp[name]), name) for _, name in _indexed(cp, "retime")]
    if segs:
        cfg.retime = RetimePlan(tuple(segs))
    return cfg


def load_config(path) -> Config:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
