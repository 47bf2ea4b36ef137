"""GAP-TV reconstruction of a video cube from one coded snapshot, and PSNR."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from .sci_forward import MaskStack, Measurement, normalize

PSNR_CAP = 100.0


@dataclass(frozen=True)
class ReconstructionConfig:
    max_iters: int = 60
    tv_weight: float = 0.03
    tv_inner_iters: int = 5
    tol: float = 1e-4

    def __post_init__(self):
        if self.max_iters < 1 or self.tv_inner_iters < 1:
            raise ValueError("max_iters and tv_inner_iters must be positive")
        if self.tv_weight <= 0:
            raise ValueError(f"tv_weight must be positive, got {self.tv_weight}")
        if not 0 < self.tol < 1:
            raise ValueError(f"tol must be in (0, 1), got {self.tol}")


@dataclass
class QualityReport:
    psnr_db: float
    per_frame_psnr: List[float] = field(default_factory=list)
    mse: float = 0.0


def backproject_init(m: Measurement, c: MaskStack) -> np.ndarray:
    """``x_b = C_b * ybar``: the mask-consistent starting cube."""
    ybar = normalize(m, c).ybar
    return c.prefix(m.B) * ybar[:, :, None]


def _grad(x, gx=None, gy=None):
    """Forward differences along columns (gx) and rows (gy); zero on the last one."""
    if gx is None:
        gx = np.zeros_like(x)
        gy = np.zeros_like(x)
    np.subtract(x[:, 1:], x[:, :-1], out=gx[:, :-1])
    np.subtract(x[1:], x[:-1], out=gy[:-1])
    return gx, gy


def _grad_adjoint(px, py, out=None):
    # adjoint of _grad; relies on the last column of px and last row of py being zero
    if out is None:
        out = np.empty_like(px)
    out[:, 0] = -px[:, 0]
    np.subtract(px[:, :-1], px[:, 1:], out=out[:, 1:])
    out[0] -= py[0]
    out[1:] += py[:-1]
    out[1:] -= py[1:]
    return out


def tv_denoise(z: np.ndarray, weight: float, n_iter: int, dual=None):
    """Anisotropic TV denoising of every frame (axis 2 is never differenced).

    Solves ``min_x 0.5||x - z||^2 + weight * (|D_h x|_1 + |D_v x|_1)`` by
    projected gradient on the dual. Returns ``(x, dual)`` so the dual can be
    warm-started by the caller.
    """
    if dual is None:
        px = np.zeros_like(z)
        py = np.zeros_like(z)
    else:
        px, py = dual
    step = 1.0 / (8.0 * weight)
    gx = np.zeros_like(z)
    gy = np.zeros_like(z)
    adj = _grad_adjoint(px, py)
    x = z - weight * adj
    for _ in range(n_iter):
        _grad(x, gx, gy)
        px += step * gx
        np.clip(px, -1.0, 1.0, out=px)
        py += step * gy
        np.clip(py, -1.0, 1.0, out=py)
        _grad_adjoint(px, py, adj)
        np.multiply(adj, -weight, out=x)
        x += z
    return x, (px, py)


def gap_tv(m: Measurement, c: MaskStack, cfg: ReconstructionConfig = ReconstructionConfig(),
           full_output: bool = False):
    """Generalized alternating projection with per-frame TV denoising.

    Each iteration projects onto ``{x : Hx = y}`` using the diagonal of
    ``H H^T`` and then TV-denoises every frame. The iterate starts from the
    normalized measurement replicated over all ``B`` frames, which is itself
    measurement-consistent and exact for static scenes. The returned cube is
    the last projected iterate, so it reproduces a noise-free measurement.

    With ``full_output`` returns ``(cube, info)`` where ``info`` holds
    ``iterations``, ``converged`` and the per-iteration ``residuals``
    ``||y - Hz||`` right after each projection.
    """
    B = m.B
    C = c.prefix(B).astype(np.float64)
    csum = c.column_sum(B).astype(np.float64)
    if (csum == 0).any():
        raise ValueError("mask column sum is zero at some pixel")
    y = np.asarray(m.y, dtype=np.float64)

    x = np.repeat((y / csum)[:, :, None], B, axis=2)
    z = x
    dual = None
    residuals = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        r = (y - np.einsum("ijb,ijb->ij", C, x)) / csum
        z_new = x + C * r[:, :, None]
        residuals.append(float(np.linalg.norm(y - np.einsum("ijb,ijb->ij", C, z_new))))
        change = np.linalg.norm(z_new - z) / max(np.linalg.norm(z), 1e-12)
        z = z_new
        if it > 1 and change < cfg.tol:
            converged = True
            break
        x, dual = tv_denoise(z, cfg.tv_weight, cfg.tv_inner_iters, dual)
    out = np.clip(z, 0.0, 1.0)
    if full_output:
        return out, {"iterations": it, "converged": converged, "residuals": residuals}
    return out


def psnr(xhat: np.ndarray, xstar: np.ndarray) -> QualityReport:
    """Average per-frame PSNR (unit peak) over every frame of a video group.

    Arrays are ``(H, W, ...)``; every trailing index is one frame. Frames
    with zero error score ``PSNR_CAP``.
    """
    xhat = np.asarray(xhat, dtype=np.float64)
    xstar = np.asarray(xstar, dtype=np.float64)
    if xhat.shape != xstar.shape:
        raise ValueError(f"shape mismatch {xhat.shape} vs {xstar.shape}")
    if xhat.ndim < 2:
        raise ValueError("inputs must have at least two (spatial) dimensions")
    err = (xhat - xstar).reshape(xhat.shape[0] * xhat.shape[1], -1)
    frame_mse = np.mean(err ** 2, axis=0)
    with np.errstate(divide="ignore"):
        per_frame = np.where(frame_mse > 0, -10.0 * np.log10(frame_mse), PSNR_CAP)
    per_frame = np.minimum(per_frame, PSNR_CAP)
    return QualityReport(float(per_frame.mean()), per_frame.tolist(), float(frame_mse.mean()))
