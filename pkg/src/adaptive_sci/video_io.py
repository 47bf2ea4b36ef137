"""Synthetic scene generation, retiming and PGM sequence persistence."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

Box = Tuple[int, int, int, int]


class VideoIOError(OSError):
    """Raised for unreadable, malformed or inconsistent frame files."""


@dataclass(frozen=True)
class FrameSequence:
    """Grayscale frames stacked as a ``(T, H, W)`` float64 array in [0, 1]."""

    frames: np.ndarray
    fps: float = 30.0
    name: str = "sequence"

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 3:
            raise ValueError(f"frames must be (T, H, W), got shape {frames.shape}")
        if frames.shape[0] < 1:
            raise ValueError("frames: sequence must hold at least one frame")
        if frames.shape[1] < 1 or frames.shape[2] < 1:
            raise ValueError(f"frames: empty frame dimensions {frames.shape[1:]}")
        if not np.all(np.isfinite(frames)) or frames.min() < 0.0 or frames.max() > 1.0:
            raise ValueError("frames: pixel values must lie in [0, 1]")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    def window(self, start: int, length: int) -> np.ndarray:
        """Frames ``start .. start+length-1`` as an ``(H, W, length)`` cube."""
        if start < 0 or length < 1 or start + length > len(self):
            raise IndexError(f"window [{start}, {start + length}) outside {len(self)} frames")
        return np.ascontiguousarray(np.moveaxis(self.frames[start:start + length], 0, -1))


@dataclass
class GroundTruthTrack:
    """Per-frame boxes: ``boxes[t]`` maps object id to ``(x, y, w, h)``."""

    boxes: List[Dict[int, Box]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.boxes)

    def hulls(self, start: int, length: int) -> List[Box]:
        """Bounding hull of each object's boxes over a frame window.

        This is the label convention for one measurement: the motion-blur
        footprint of an object in the coded snapshot is exactly this hull.
        """
        extent: Dict[int, List[int]] = {}
        for t in range(start, start + length):
            for oid, (x, y, w, h) in self.boxes[t].items():
                if oid not in extent:
                    extent[oid] = [x, y, x + w, y + h]
                else:
                    e = extent[oid]
                    e[0], e[1] = min(e[0], x), min(e[1], y)
                    e[2], e[3] = max(e[2], x + w), max(e[3], y + h)
        return [(x0, y0, x1 - x0, y1 - y0) for _, (x0, y0, x1, y1) in sorted(extent.items())]


@dataclass(frozen=True)
class ObjectSpec:
    """One moving object.

    ``velocity`` is a list of ``(n_frames, vx, vy)`` segments applied in
    order; the last segment's velocity persists until the end of the scene.
    ``position`` is the top-left corner at frame 0.
    """

    shape: str = "rectangle"
    size: int = 8
    intensity: float = 1.0
    position: Tuple[float, float] = (0.0, 0.0)
    velocity: Tuple[Tuple[int, float, float], ...] = ((1, 0.0, 0.0),)


@dataclass(frozen=True)
class SceneSpec:
    width: int = 64
    height: int = 64
    duration: int = 32
    seed: int = 0
    background: float = 0.0
    texture: float = 0.0
    objects: Tuple[ObjectSpec, ...] = ()
    # "clip": objects may leave the frame; "bounce": they reflect off the borders
    boundary: str = "clip"
    fps: float = 30.0
    name: str = "scene"

    def validate(self) -> None:
        if self.width < 1:
            raise ValueError(f"width must be >= 1, got {self.width}")
        if self.height < 1:
            raise ValueError(f"height must be >= 1, got {self.height}")
        if self.duration < 1:
            raise ValueError(f"duration must be >= 1, got {self.duration}")
        if not 0.0 <= self.background <= 1.0:
            raise ValueError(f"background must be in [0, 1], got {self.background}")
        if self.texture < 0.0:
            raise ValueError(f"texture must be >= 0, got {self.texture}")
        if self.boundary not in ("clip", "bounce"):
            raise ValueError(f"boundary must be 'clip' or 'bounce', got {self.boundary!r}")
        for i, obj in enumerate(self.objects):
            if obj.shape not in ("rectangle", "disc"):
                raise ValueError(f"objects[{i}].shape must be 'rectangle' or 'disc', got {obj.shape!r}")
            if not 0 < obj.size < min(self.width, self.height):
                raise ValueError(f"objects[{i}].size must be positive and smaller than the frame")
            if not 0.0 <= obj.intensity <= 1.0:
                raise ValueError(f"objects[{i}].intensity must be in [0, 1], got {obj.intensity}")
            if not obj.velocity:
                raise ValueError(f"objects[{i}].velocity needs at least one segment")
            for n, _, _ in obj.velocity:
                if n < 1:
                    raise ValueError(f"objects[{i}].velocity segment lengths must be >= 1")


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def _trajectory(obj: ObjectSpec, duration: int, limits: Tuple[int, int], bounce: bool):
    """Top-left positions per frame, integrated from the velocity segments."""
    pos = [float(obj.position[0]), float(obj.position[1])]
    sign = [1.0, 1.0]
    steps = [(vx, vy) for n, vx, vy in obj.velocity for _ in range(n)]
    out = []
    for t in range(duration):
        out.append((pos[0], pos[1]))
        v = steps[min(t, len(steps) - 1)]
        for axis in (0, 1):
            p = pos[axis] + sign[axis] * v[axis]
            hi = limits[axis] - obj.size
            if bounce and (p < 0 or p > hi):
                # reflect the top-left corner back inside [0, hi]
                p = -p if p < 0 else 2 * hi - p
                sign[axis] = -sign[axis]
            pos[axis] = p
    return out


def _footprint(shape: str, size: int) -> np.ndarray:
    if shape == "rectangle":
        return np.ones((size, size), dtype=bool)
    r = size / 2.0
    c = (np.arange(size) + 0.5 - r) ** 2
    return (c[:, None] + c[None, :]) <= r * r


def generate_scene(spec: SceneSpec) -> Tuple[FrameSequence, GroundTruthTrack]:
    """Render a scene and its exact ground-truth boxes.

    Objects are drawn in list order (later objects occlude earlier ones).
    Each box is the clipped extent of the object's own footprint, so it is
    exact even under occlusion.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    bg = np.full((spec.height, spec.width), spec.background)
    if spec.texture > 0:
        bg = np.clip(bg + spec.texture * rng.uniform(-1.0, 1.0, bg.shape), 0.0, 1.0)

    frames = np.repeat(bg[None], spec.duration, axis=0)
    boxes: List[Dict[int, Box]] = [dict() for _ in range(spec.duration)]
    limits = (spec.width, spec.height)
    for oid, obj in enumerate(spec.objects):
        fp = _footprint(obj.shape, obj.size)
        rows, cols = np.nonzero(fp)
        traj = _trajectory(obj, spec.duration, limits, spec.boundary == "bounce")
        for t, (px, py) in enumerate(traj):
            x0, y0 = _round_half_up(px), _round_half_up(py)
            rr, cc = rows + y0, cols + x0
            keep = (rr >= 0) & (rr < spec.height) & (cc >= 0) & (cc < spec.width)
            if not keep.any():
                continue
            rr, cc = rr[keep], cc[keep]
            frames[t, rr, cc] = obj.intensity
            bx, by = int(cc.min()), int(rr.min())
            boxes[t][oid] = (bx, by, int(cc.max()) - bx + 1, int(rr.max()) - by + 1)

    seq = FrameSequence(frames, fps=spec.fps, name=spec.name)
    return seq, GroundTruthTrack(boxes)


@dataclass(frozen=True)
class RetimeSegment:
    start: int
    stop: int  # exclusive
    mode: str = "normal"
    factor: int = 1


@dataclass(frozen=True)
class RetimePlan:
    segments: Tuple[RetimeSegment, ...]

    def validate(self, n_frames: int) -> None:
        if not self.segments:
            raise ValueError("retime plan has no segments")
        prev = self.segments[0].start
        if prev < 0:
            raise ValueError(f"retime plan starts before frame 0 ({prev})")
        for s in self.segments:
            if s.mode not in ("normal", "freeze", "skip"):
                raise ValueError(f"unknown retime mode {s.mode!r}")
            if s.factor < 1:
                raise ValueError(f"retime factor must be >= 1, got {s.factor}")
            if s.mode == "normal" and s.factor != 1:
                raise ValueError("normal segments must use factor 1")
            if s.start != prev or s.stop <= s.start:
                raise ValueError(f"retime segments must be contiguous and non-empty at {s}")
            prev = s.stop
        if prev > n_frames:
            raise ValueError(f"retime plan covers up to frame {prev}, sequence has {n_frames}")


def retime(seq: FrameSequence, track: GroundTruthTrack, plan: RetimePlan):
    """Apply freeze (repeat each frame ``factor`` times) and skip (keep every
    ``factor``-th frame) segments; the track follows the same index map."""
    plan.validate(len(seq))
    index: List[int] = []
    for s in plan.segments:
        src = range(s.start, s.stop)
        if s.mode == "freeze":
            index.extend(i for i in src for _ in range(s.factor))
        elif s.mode == "skip":
            index.extend(src[::s.factor])
        else:
            index.extend(src)
    frames = seq.frames[np.asarray(index)]
    boxes = [dict(track.boxes[i]) for i in index] if len(track) else []
    return FrameSequence(frames, fps=seq.fps, name=seq.name), GroundTruthTrack(boxes)


# --- persistence -----------------------------------------------------------

_PGM_HEADER = re.compile(rb"^P5\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s")


def quantize(frame: np.ndarray) -> np.ndarray:
    """Map [0, 1] floats to 8-bit with round-half-up."""
    return np.floor(np.asarray(frame) * 255.0 + 0.5).clip(0, 255).astype(np.uint8)


def write_pgm(path, frame: np.ndarray) -> None:
    data = quantize(frame)
    h, w = data.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary 8-bit PGM as uint8 ``(H, W)``."""
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise VideoIOError(f"cannot read frame file {path}: {exc}") from exc
    m = _PGM_HEADER.match(buf)
    if m is None:
        raise VideoIOError(f"{path}: not a binary 8-bit PGM (P5) file")
    w, h, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise VideoIOError(f"{path}: maxval must be 255, got {maxval}")
    body = buf[m.end():]
    if len(body) < w * h:
        raise VideoIOError(f"{path}: truncated pixel data ({len(body)} of {w * h} bytes)")
    return np.frombuffer(body, dtype=np.uint8, count=w * h).reshape(h, w)


def write_track(path, track: GroundTruthTrack) -> None:
    with open(path, "w") as f:
        for t, frame_boxes in enumerate(track.boxes):
            for oid in sorted(frame_boxes):
                x, y, w, h = frame_boxes[oid]
                f.write(f"{t} {oid} {x} {y} {w} {h}\n")


def read_track(path, n_frames: int) -> GroundTruthTrack:
    boxes: List[Dict[int, Box]] = [dict() for _ in range(n_frames)]
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise VideoIOError(f"cannot read track file {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 6:
            raise VideoIOError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
        try:
            t, oid, x, y, w, h = (int(p) for p in parts)
        except ValueError as exc:
            raise VideoIOError(f"{path}:{lineno}: non-integer field") from exc
        if not 0 <= t < n_frames:
            raise VideoIOError(f"{path}:{lineno}: frame index {t} outside 0..{n_frames - 1}")
        boxes[t][oid] = (x, y, w, h)
    return GroundTruthTrack(boxes)


def save_frames(seq: FrameSequence, dir_path, track: Optional[GroundTruthTrack] = None,
                prefix: str = "frame") -> Path:
    """Write ``<prefix>_NNNNN.pgm`` files plus ``manifest.txt``; returns the manifest path.

    When a track is given it is written to ``track.txt`` and referenced from
    the manifest with a ``track <path>`` line.
    """
    if not isinstance(seq, FrameSequence):
        seq = FrameSequence(seq)
    out = Path(dir_path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        names = []
        for t, frame in enumerate(seq.frames):
            name = f"{prefix}_{t:05d}.pgm"
            write_pgm(out / name, frame)
            names.append(name)
        lines = [f"frames {len(seq)} {seq.width} {seq.height} {seq.fps:g}"]
        if track is not None:
            write_track(out / "track.txt", track)
            lines.append("track track.txt")
        lines.extend(names)
        manifest = out / "manifest.txt"
        manifest.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise VideoIOError(f"cannot write frames to {out}: {exc}") from exc
    return manifest


def load_frames(manifest_path) -> Tuple[FrameSequence, Optional[GroundTruthTrack]]:
    manifest_path = Path(manifest_path)
    try:
        lines = [ln.strip() for ln in manifest_path.read_text().splitlines() if ln.strip()]
    except OSError as exc:
        raise VideoIOError(f"cannot read manifest {manifest_path}: {exc}") from exc
    if not lines:
        raise VideoIOError(f"{manifest_path}: empty manifest")
    header = lines[0].split()
    if len(header) != 5 or header[0] != "frames":
        raise VideoIOError(f"{manifest_path}: header must be 'frames <count> <width> <height> <fps>'")
    try:
        count, width, height = int(header[1]), int(header[2]), int(header[3])
        fps = float(header[4])
    except ValueError as exc:
        raise VideoIOError(f"{manifest_path}: malformed header {lines[0]!r}") from exc

    track_path = None
    entries = []
    for ln in lines[1:]:
        if ln.startswith("track "):
            track_path = ln[len("track "):].strip()
        else:
            entries.append(ln)
    if len(entries) != count:
        raise VideoIOError(f"{manifest_path}: header lists {count} frames, found {len(entries)}")
    if count < 1:
        raise VideoIOError(f"{manifest_path}: manifest lists no frames")

    base = manifest_path.parent
    frames = np.empty((count, height, width), dtype=np.float64)
    for t, rel in enumerate(entries):
        img = read_pgm(base / rel)
        if img.shape != (height, width):
            raise VideoIOError(
                f"{rel}: dimension mismatch, expected {width}x{height}, got {img.shape[1]}x{img.shape[0]}")
        frames[t] = img / 255.0

    track = read_track(base / track_path, count) if track_path else None
    name = manifest_path.parent.name or "sequence"
    return FrameSequence(frames, fps=fps, name=name), track


def concat(sequences: Sequence[Tuple[FrameSequence, GroundTruthTrack]], name: str = "concat"):
    """Join sequences (and their tracks) end to end."""
    frames = np.concatenate([s.frames for s, _ in sequences], axis=0)
    boxes = [b for _, tr in sequences for b in tr.boxes]
    return FrameSequence(frames, fps=sequences[0][0].fps, name=name), GroundTruthTrack(boxes)


__all__ = [
    "Box", "FrameSequence", "GroundTruthTrack", "ObjectSpec", "SceneSpec", "RetimeSegment",
    "RetimePlan", "VideoIOError", "generate_scene", "retime", "save_frames", "load_frames",
    "read_pgm", "write_pgm", "read_track", "write_track", "quantize", "concat",
]
