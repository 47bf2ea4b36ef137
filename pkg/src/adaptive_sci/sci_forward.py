"""Coded-aperture snapshot sensing: masks, modulate-and-sum, normalization.

Cubes are ``(H, W, B)`` float64 arrays; masks are ``(H, W, Bmax)`` uint8.
Flattened vectors stack the row-major ravel of each frame, frame 1 first.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

DEFAULT_STATES = (6, 8, 10, 12, 15, 20)
_MAGIC = b"SCIM"
_HEADER = struct.Struct("<4sIIIQ")


class MaskFileError(OSError):
    """Raised for truncated or malformed mask containers."""


@dataclass(frozen=True)
class MaskStack:
    masks: np.ndarray
    seed: int = 0

    def __post_init__(self):
        m = np.asarray(self.masks)
        if m.ndim != 3:
            raise ValueError(f"masks must be (H, W, Bmax), got shape {m.shape}")
        if not np.isin(m, (0, 1)).all():
            raise ValueError("masks must be strictly binary")
        m = m.astype(np.uint8)
        m.setflags(write=False)
        object.__setattr__(self, "masks", m)

    @property
    def shape(self):
        return self.masks.shape[:2]

    @property
    def bmax(self) -> int:
        return self.masks.shape[2]

    def prefix(self, B: int) -> np.ndarray:
        if not 1 <= B <= self.bmax:
            raise ValueError(f"B={B} outside mask range 1..{self.bmax}")
        return self.masks[:, :, :B]

    def column_sum(self, B: int) -> np.ndarray:
        """Per-pixel count of open sub-masks in the first ``B`` planes."""
        return self.prefix(B).sum(axis=2, dtype=np.int64)


@dataclass(frozen=True)
class Measurement:
    y: np.ndarray
    B: int
    sigma: float = 0.0
    frame_offset: int = 0


@dataclass(frozen=True)
class NormalizedMeasurement:
    ybar: np.ndarray
    B: int


def generate_masks(nx: int, ny: int, bmax: int = 20, seed: int = 0,
                   state_set: Iterable[int] = DEFAULT_STATES) -> MaskStack:
    """Seeded Bernoulli(0.5) masks with the dark-pixel repair.

    Any pixel closed across the first ``min(state_set)`` planes gets one of
    those planes opened at random, so every usable prefix sees each pixel.
    """
    states = sorted(state_set)
    if nx < 1 or ny < 1 or bmax < 1:
        raise ValueError(f"mask dimensions must be >= 1, got nx={nx} ny={ny} bmax={bmax}")
    if not states or states[0] < 1:
        raise ValueError("state_set must be non-empty with min >= 1")
    bmin = min(states[0], bmax)
    rng = np.random.default_rng(seed)
    masks = rng.integers(0, 2, size=(ny, nx, bmax), dtype=np.uint8)
    dark = np.nonzero(masks[:, :, :bmin].sum(axis=2) == 0)
    masks[dark[0], dark[1], rng.integers(0, bmin, size=dark[0].size)] = 1
    return MaskStack(masks, seed=seed)


def sense(x: np.ndarray, c: MaskStack, B: int, sigma: float = 0.0,
          rng: Optional[np.random.Generator] = None, frame_offset: int = 0) -> Measurement:
    """Modulate each frame by its mask, sum over time, add Gaussian noise."""
    x = np.asarray(x, dtype=np.float64)
    if not 1 <= B <= c.bmax:
        raise ValueError(f"B={B} outside mask range 1..{c.bmax}")
    if x.shape != (*c.shape, B):
        raise ValueError(f"cube shape {x.shape} does not match masks {(*c.shape, B)}")
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    y = np.einsum("ijb,ijb->ij", c.prefix(B).astype(np.float64), x)
    if sigma > 0:
        if rng is None:
            raise ValueError("a seeded generator is required when sigma > 0")
        y = y + rng.normal(0.0, sigma, size=y.shape)
    return Measurement(y, B, float(sigma), frame_offset)


def normalize(m: Measurement, c: MaskStack) -> NormalizedMeasurement:
    denom = c.column_sum(m.B)
    if (denom == 0).any():
        raise ValueError("mask column sum is zero at some pixel; masks violate the prefix invariant")
    return NormalizedMeasurement(m.y / denom, m.B)


class SensingOperator:
    """``H = [D_1, ..., D_B]`` stored as its ``(B, N)`` diagonals."""

    def __init__(self, diagonals: np.ndarray, shape=None):
        self.diagonals = np.asarray(diagonals, dtype=np.float64)
        self.frame_shape = shape
        self.B, self.N = self.diagonals.shape

    @property
    def shape(self):
        return (self.N, self.N * self.B)

    def apply(self, x_flat: np.ndarray) -> np.ndarray:
        x_flat = np.asarray(x_flat, dtype=np.float64)
        if x_flat.shape != (self.N * self.B,):
            raise ValueError(f"input length {x_flat.size} != N*B = {self.N * self.B}")
        return np.einsum("bn,bn->n", self.diagonals, x_flat.reshape(self.B, self.N))

    def apply_transpose(self, y_flat: np.ndarray) -> np.ndarray:
        y_flat = np.asarray(y_flat, dtype=np.float64)
        if y_flat.shape != (self.N,):
            raise ValueError(f"input length {y_flat.size} != N = {self.N}")
        return (self.diagonals * y_flat).ravel()

    def hht_diagonal(self) -> np.ndarray:
        """Diagonal of ``H @ H.T`` (the off-diagonal part is identically zero)."""
        return np.einsum("bn,bn->n", self.diagonals, self.diagonals)


def build_operator(c: MaskStack, B: int) -> SensingOperator:
    p = c.prefix(B)
    diags = np.moveaxis(p, -1, 0).reshape(B, -1)
    return SensingOperator(diags, shape=c.shape)


def flatten_cube(x: np.ndarray) -> np.ndarray:
    return np.moveaxis(np.asarray(x, dtype=np.float64), -1, 0).ravel()


def unflatten_cube(x_flat: np.ndarray, shape, B: int) -> np.ndarray:
    return np.moveaxis(np.asarray(x_flat).reshape(B, *shape), 0, -1)


def sense_vectorized(h: SensingOperator, x_flat: np.ndarray) -> np.ndarray:
    return h.apply(x_flat)


def save_masks(c: MaskStack, path) -> None:
    """Write the ``SCIM`` container: header, then bit-packed planes (b-major)."""
    ny, nx = c.shape
    planes = np.moveaxis(c.masks, -1, 0)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(_MAGIC, nx, ny, c.bmax, c.seed & 0xFFFFFFFFFFFFFFFF))
        f.write(np.packbits(planes, axis=-1).tobytes())


def load_masks(path) -> MaskStack:
    buf = Path(path).read_bytes()
    if len(buf) < _HEADER.size:
        raise MaskFileError(f"{path}: truncated mask header")
    magic, nx, ny, bmax, seed = _HEADER.unpack_from(buf)
    if magic != _MAGIC:
        raise MaskFileError(f"{path}: bad magic {magic!r}, expected {_MAGIC!r}")
    row_bytes = (nx + 7) // 8
    need = bmax * ny * row_bytes
    body = np.frombuffer(buf, dtype=np.uint8, offset=_HEADER.size)
    if body.size != need:
        raise MaskFileError(f"{path}: expected {need} bytes of mask data, found {body.size}")
    planes = np.unpackbits(body.reshape(bmax, ny, row_bytes), axis=-1, count=nx)
    return MaskStack(np.moveaxis(planes, 0, -1), seed=seed)
