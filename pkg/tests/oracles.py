"""Independent brute-force references used to freeze derived test values."""

import math

import numpy as np


def dense_sensing_matrix(masks: np.ndarray) -> np.ndarray:
    """Explicit N x (N*B) matrix for masks of shape (H, W, B).

    Column ``b*N + n`` carries mask ``b`` at pixel ``n`` (row-major), matching a
    cube flattened frame by frame.
    """
    h, w, B = masks.shape
    N = h * w
    H = np.zeros((N, N * B))
    for b in range(B):
        for i in range(h):
            for j in range(w):
                n = i * w + j
                H[n, b * N + n] = masks[i, j, b]
    return H


def flatten_frames(x: np.ndarray) -> np.ndarray:
    h, w, B = x.shape
    out = []
    for b in range(B):
        for i in range(h):
            for j in range(w):
                out.append(x[i, j, b])
    return np.array(out)


def all_point_ap(ranked_hits, n_gt):
    """AP from a ranked list of TP flags, by explicit envelope over recall steps."""
    if n_gt == 0:
        return 1.0 if not ranked_hits else 0.0
    tp = 0
    precisions, recalls = [], []
    for k, hit in enumerate(ranked_hits, 1):
        tp += hit
        precisions.append(tp / k)
        recalls.append(tp / n_gt)
    ap, prev_r = 0.0, 0.0
    for k, r in enumerate(recalls):
        if r > prev_r:
            ap += (r - prev_r) * max(precisions[k:])
            prev_r = r
    return ap


def frame_psnr(a: np.ndarray, b: np.ndarray) -> float:
    mse = float(np.mean((a - b) ** 2))
    return 100.0 if mse == 0 else min(100.0, -10.0 * math.log10(mse))
