"""Mask scoring: region similarity J, boundary F, accuracy, max F-beta.

Boundary F follows the common video-segmentation protocol: mask contours
(4-connected, image border counts as background) matched by morphological
dilation with a disk whose radius defaults to ceil(0.008 * image diagonal).
max F-beta uses beta^2 = 0.3 and sweeps 255 uniform thresholds in (0, 1).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import binary_dilation

from .errors import ArgumentError, ShapeError
from .tensor_io import FRAME_AVERAGE, SEQUENCE_AVERAGE, PixelMask

F_BETA_SQUARED = 0.3
N_THRESHOLDS = 255
BOUNDARY_TOL_FRACTION = 0.008


def _as_bool(mask: PixelMask | np.ndarray) -> np.ndarray:
    data = mask.data if isinstance(mask, PixelMask) else np.asarray(mask)
    return data.astype(bool)


def _check_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"mask dimensions differ: {a.shape} vs {b.shape}")


def jaccard(pred: PixelMask | np.ndarray, gt: PixelMask | np.ndarray) -> float:
    """Intersection over union; two empty masks count as a perfect match."""
    p, g = _as_bool(pred), _as_bool(gt)
    _check_dims(p, g)
    union = int((p | g).sum())
    if union == 0:
        return 1.0
    return int((p & g).sum()) / union


def accuracy(pred: PixelMask | np.ndarray, gt: PixelMask | np.ndarray) -> float:
    p, g = _as_bool(pred), _as_bool(gt)
    _check_dims(p, g)
    return float((p == g).mean())


def mask_boundary(mask: PixelMask | np.ndarray) -> np.ndarray:
    """4-connected contour: foreground pixels bordering background or the
    image edge."""
    m = _as_bool(mask)
    interior = np.zeros_like(m)
    if m.shape[0] > 2 and m.shape[1] > 2:
        interior[1:-1, 1:-1] = (
            m[1:-1, 1:-1] & m[:-2, 1:-1] & m[2:, 1:-1] & m[1:-1, :-2] & m[1:-1, 2:]
        )
    return m & ~interior


def _disk(radius: int) -> np.ndarray:
    r = int(radius)
    y, x = np.mgrid[-r : r + 1, -r : r + 1]
    return (y * y + x * x) <= r * r


def default_boundary_tol(shape: tuple[int, int]) -> int:
    return int(math.ceil(BOUNDARY_TOL_FRACTION * math.hypot(*shape)))


def boundary_f(
    pred: PixelMask | np.ndarray,
    gt: PixelMask | np.ndarray,
    tol_px: int | None = None,
) -> float:
    """Boundary F-measure with dilation matching at tol_px pixels."""
    p, g = _as_bool(pred), _as_bool(gt)
    _check_dims(p, g)
    if tol_px is None:
        tol_px = default_boundary_tol(p.shape)
    pb, gb = mask_boundary(p), mask_boundary(g)
    n_pb, n_gb = int(pb.sum()), int(gb.sum())
    if n_pb == 0 and n_gb == 0:
        return 1.0
    if n_pb == 0 or n_gb == 0:
        return 0.0
    selem = _disk(tol_px)
    gb_zone = binary_dilation(gb, structure=selem)
    pb_zone = binary_dilation(pb, structure=selem)
    precision = int((pb & gb_zone).sum()) / n_pb
    recall = int((gb & pb_zone).sum()) / n_gb
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _f_beta(tp: int, fp: int, fn: int) -> float:
    if tp == 0:
        return 1.0 if fp == 0 and fn == 0 else 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return (
        (1 + F_BETA_SQUARED) * precision * recall / (F_BETA_SQUARED * precision + recall)
    )


def max_f_beta(pred_soft: np.ndarray, gt: PixelMask | np.ndarray) -> float:
    """Max over 255 uniform thresholds of F-beta of the binarized prediction."""
    soft = np.asarray(pred_soft, dtype=np.float64)
    g = _as_bool(gt)
    _check_dims(soft, g)
    n_gt = int(g.sum())
    best = 0.0
    for k in range(1, N_THRESHOLDS + 1):
        binary = soft >= (k / (N_THRESHOLDS + 1))
        tp = int((binary & g).sum())
        fp = int(binary.sum()) - tp
        fn = n_gt - tp
        best = max(best, _f_beta(tp, fp, fn))
    return best


def merge_masks(masks: list[PixelMask]) -> PixelMask:
    """Pixelwise union, used to collapse multi-object annotations."""
    if not masks:
        raise ArgumentError("merge_masks needs at least one mask")
    data = _as_bool(masks[0])
    for m in masks[1:]:
        other = _as_bool(m)
        _check_dims(data, other)
        data = data | other
    return PixelMask(data.astype(np.uint8), source=masks[0].source)


# ---------------------------------------------------------------------------
# aggregation


@dataclass
class FrameScore:
    sequence: str
    frame: str
    jaccard: float
    boundary_f: float
    accuracy: float


@dataclass
class EvalReport:
    per_frame: list[FrameScore]
    per_sequence: dict[str, float]
    dataset_j: float
    dataset_f: float
    max_f_beta: float
    averaging_mode: str

    def to_dict(self) -> dict:
        def r(x):
            return round(float(x), 4)

        return {
            "averaging_mode": self.averaging_mode,
            "dataset_J": r(self.dataset_j),
            "dataset_F": r(self.dataset_f),
            "max_f_beta": r(self.max_f_beta),
            "per_sequence": {seq: r(v) for seq, v in sorted(self.per_sequence.items())},
            "per_frame": [
                {
                    "sequence": s.sequence,
                    "frame": s.frame,
                    "J": r(s.jaccard),
                    "F": r(s.boundary_f),
                    "accuracy": r(s.accuracy),
                }
                for s in self.per_frame
            ],
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def aggregate(
    scores: list[FrameScore],
    mode: str,
    frame_max_f: list[float] | None = None,
) -> EvalReport:
    """Fold per-frame scores into a dataset report.

    sequence_average: mean over sequences of the within-sequence mean.
    frame_average: plain mean over all frames. Frames without ground truth
    must already be excluded by the caller.
    """
    if not scores:
        raise ArgumentError("aggregate needs at least one frame score")
    if mode not in (SEQUENCE_AVERAGE, FRAME_AVERAGE):
        raise ArgumentError(f"unknown averaging mode {mode!r}")

    by_seq: dict[str, list[FrameScore]] = {}
    for s in scores:
        by_seq.setdefault(s.sequence, []).append(s)
    per_sequence = {
        seq: float(np.mean([s.jaccard for s in frames])) for seq, frames in by_seq.items()
    }

    if mode == SEQUENCE_AVERAGE:
        dataset_j = float(np.mean(list(per_sequence.values())))
        dataset_f = float(
            np.mean([np.mean([s.boundary_f for s in frames]) for frames in by_seq.values()])
        )
    else:
        dataset_j = float(np.mean([s.jaccard for s in scores]))
        dataset_f = float(np.mean([s.boundary_f for s in scores]))

    mf = float(np.mean(frame_max_f)) if frame_max_f else 0.0
    return EvalReport(
        per_frame=list(scores),
        per_sequence=per_sequence,
        dataset_j=dataset_j,
        dataset_f=dataset_f,
        max_f_beta=mf,
        averaging_mode=mode,
    )
