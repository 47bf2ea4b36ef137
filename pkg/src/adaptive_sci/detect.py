"""Blob detection on normalized measurements and IoU-matched average precision."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .sci_forward import MaskStack, Measurement, NormalizedMeasurement, normalize


@dataclass(frozen=True)
class BoundingBox:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box extent must be positive, got w={self.w} h={self.h}")

    @property
    def area(self) -> int:
        return self.w * self.h

    def as_tuple(self):
        return (self.x, self.y, self.w, self.h)


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass
class MatchResult:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    pairs: List[Tuple[int, int, float]] = field(default_factory=list)
    # per detection (input order): True if it was matched
    hits: List[bool] = field(default_factory=list)


@dataclass(frozen=True)
class DetectorConfig:
    threshold: float = 0.15
    min_area: int = 20
    iou_thresh: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must be in (0, 1), got {self.threshold}")
        if self.min_area < 1:
            raise ValueError(f"min_area must be >= 1, got {self.min_area}")
        if not 0.0 < self.iou_thresh <= 1.0:
            raise ValueError(f"iou_thresh must be in (0, 1], got {self.iou_thresh}")


def blob_detect(img, threshold: float = 0.15, min_area: int = 20) -> List[Detection]:
    """Threshold deviations from the median and keep 4-connected blobs.

    Confidence is the blob's mean absolute contrast over twice the threshold,
    capped at 1. Detections are returned in raster order of their labels.
    """
    if isinstance(img, NormalizedMeasurement):
        img = img.ybar
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    if min_area < 1:
        raise ValueError(f"min_area must be >= 1, got {min_area}")
    img = np.asarray(img, dtype=np.float64)
    dev = np.abs(img - np.median(img))
    labels, n = ndimage.label(dev > threshold)
    if n == 0:
        return []
    index = np.arange(1, n + 1)
    areas = ndimage.sum_labels(np.ones_like(dev), labels, index)
    means = ndimage.mean(dev, labels, index)
    dets = []
    for k, sl in enumerate(ndimage.find_objects(labels)):
        if areas[k] < min_area:
            continue
        ys, xs = sl
        box = BoundingBox(xs.start, ys.start, xs.stop - xs.start, ys.stop - ys.start)
        dets.append(Detection(box, float(min(1.0, means[k] / (2.0 * threshold)))))
    return dets


def iou(a: BoundingBox, b: BoundingBox) -> float:
    ix = max(0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    if inter == 0:
        return 0.0
    return inter / float(a.area + b.area - inter)


def _ranking(dets: Sequence[Detection]) -> List[int]:
    return sorted(range(len(dets)), key=lambda i: (-dets[i].confidence, dets[i].box.x, dets[i].box.y))


def match(dets: Sequence[Detection], gts: Sequence[BoundingBox], iou_thresh: float = 0.5) -> MatchResult:
    """Greedy matching in descending confidence; each ground truth is used once.

    A detection takes the unmatched ground truth of highest IoU when that IoU
    exceeds ``iou_thresh``; a second detection on an already matched target
    is a false positive.
    """
    if not 0.0 < iou_thresh <= 1.0:
        raise ValueError(f"iou_thresh must be in (0, 1], got {iou_thresh}")
    used = [False] * len(gts)
    hits = [False] * len(dets)
    pairs = []
    for i in _ranking(dets):
        best, best_iou = -1, iou_thresh
        for j, gt in enumerate(gts):
            if used[j]:
                continue
            v = iou(dets[i].box, gt)
            if v > best_iou:
                best, best_iou = j, v
        if best >= 0:
            used[best] = True
            hits[i] = True
            pairs.append((i, best, best_iou))
    tp = len(pairs)
    return MatchResult(tp=tp, fp=len(dets) - tp, fn=len(gts) - tp, pairs=pairs, hits=hits)


def average_precision(det_batches: Sequence[Sequence[Detection]],
                      gt_batches: Sequence[Sequence[BoundingBox]],
                      iou_thresh: float = 0.5) -> float:
    """All-point interpolated AP over a batch of images (single class).

    Detections are matched per image, then pooled and ranked by confidence
    (ties: image index, x, y). With no ground truth at all the AP is 1.0 if
    there are also no detections, else 0.0.
    """
    if len(det_batches) != len(gt_batches):
        raise ValueError("detections and ground truths must cover the same images")
    n_gt = sum(len(g) for g in gt_batches)
    pooled = []
    for k, (dets, gts) in enumerate(zip(det_batches, gt_batches)):
        res = match(dets, gts, iou_thresh)
        for d, hit in zip(dets, res.hits):
            pooled.append((-d.confidence, k, d.box.x, d.box.y, hit))
    if n_gt == 0:
        return 1.0 if not pooled else 0.0
    if not pooled:
        return 0.0
    pooled.sort(key=lambda p: p[:4])
    hits = np.array([p[4] for p in pooled], dtype=np.float64)
    tp = np.cumsum(hits)
    precision = tp / np.arange(1, len(hits) + 1)
    recall = tp / n_gt
    # precision envelope, then area under it over the recall steps
    mrec = np.concatenate(([0.0], recall))
    mpre = np.concatenate(([0.0], precision))
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    return float(np.sum((mrec[1:] - mrec[:-1]) * mpre[1:]))


def detect_measurements(measurements: Sequence[Measurement], masks: MaskStack,
                        cfg: DetectorConfig = DetectorConfig()) -> List[List[Detection]]:
    return [blob_detect(normalize(m, masks), cfg.threshold, cfg.min_area) for m in measurements]


def detection_rate(measurements: Sequence[Measurement], gt_windows: Sequence[Sequence[BoundingBox]],
                   masks: MaskStack, cfg: DetectorConfig = DetectorConfig()) -> float:
    """Batch detection rate: AP of blob detections pooled over the batch."""
    dets = detect_measurements(measurements, masks, cfg)
    return average_precision(dets, gt_windows, cfg.iou_thresh)


def write_detections(path, det_batches: Sequence[Sequence[Detection]], offset: int = 0) -> None:
    with open(path, "w") as f:
        for k, dets in enumerate(det_batches):
            for d in dets:
                b = d.box
                f.write(f"{k + offset} {d.confidence:.6g} {b.x} {b.y} {b.w} {b.h}\n")


def read_detections(path) -> List[Tuple[int, Detection]]:
    out = []
    with open(path) as f:
        for line in f:
            if not line.strip():
                continue
            k, conf, x, y, w, h = line.split()
            out.append((int(k), Detection(BoundingBox(int(x), int(y), int(w), int(h)), float(conf))))
    return out
