"""Flow frame pairing and flow-field to RGB color-wheel rendering.

Motion gets featurized by the same image backbone as appearance, so flow
fields must first be rendered as 3-channel images. The rendering uses the
55-bin Middlebury color wheel (RY/YG/GC/CB/BM/MR segments of 15/6/4/11/13/6):
hue encodes direction, saturation encodes magnitude relative to
``max_magnitude``, and zero flow comes out white.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PairingError, ShapeError

_SEGMENTS = (("RY", 15), ("YG", 6), ("GC", 4), ("CB", 11), ("BM", 13), ("MR", 6))


@dataclass
class FlowField:
    """Per-pixel displacement in pixels; u horizontal, v vertical."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        if self.u.shape != self.v.shape or self.u.ndim != 2:
            raise ShapeError(f"u {self.u.shape} and v {self.v.shape} must be equal 2-d arrays")

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def width(self) -> int:
        return self.u.shape[1]

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "FlowField":
        if arr.ndim != 3 or arr.shape[2] != 2:
            raise ShapeError(f"flow arrays have shape (H, W, 2), got {arr.shape}")
        return cls(u=arr[:, :, 0].astype(np.float64), v=arr[:, :, 1].astype(np.float64))

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.u, self.v)


def pair_frames(frame_ids: list[str]) -> list[tuple[str, str]]:
    """Flow pairing rule: (f_i, f_{i+1}) for i < N, and (f_N, f_{N-1}) last.

    Every frame appears exactly once as a source, so each frame gets one
    flow field.
    """
    if len(frame_ids) < 2:
        raise PairingError(f"need at least 2 frames to pair, got {len(frame_ids)}")
    pairs = [(frame_ids[i], frame_ids[i + 1]) for i in range(len(frame_ids) - 1)]
    pairs.append((frame_ids[-1], frame_ids[-2]))
    return pairs


def make_colorwheel() -> np.ndarray:
    """The 55x3 Middlebury wheel, values in 0..255."""
    ncols = sum(n for _, n in _SEGMENTS)
    wheel = np.zeros((ncols, 3))
    col = 0
    ry, yg, gc, cb, bm, mr = (n for _, n in _SEGMENTS)
    wheel[0:ry, 0] = 255
    wheel[0:ry, 1] = np.floor(255 * np.arange(ry) / ry)
    col += ry
    wheel[col : col + yg, 0] = 255 - np.floor(255 * np.arange(yg) / yg)
    wheel[col : col + yg, 1] = 255
    col += yg
    wheel[col : col + gc, 1] = 255
    wheel[col : col + gc, 2] = np.floor(255 * np.arange(gc) / gc)
    col += gc
    wheel[col : col + cb, 1] = 255 - np.floor(255 * np.arange(cb) / cb)
    wheel[col : col + cb, 2] = 255
    col += cb
    wheel[col : col + bm, 2] = 255
    wheel[col : col + bm, 0] = np.floor(255 * np.arange(bm) / bm)
    col += bm
    wheel[col : col + mr, 2] = 255 - np.floor(255 * np.arange(mr) / mr)
    wheel[col : col + mr, 0] = 255
    return wheel


def flow_to_rgb(flow: FlowField, max_magnitude: float | None = None) -> np.ndarray:
    """Render a flow field as an (H, W, 3) uint8 color-wheel image.

    ``max_magnitude`` of None means per-frame auto (the max flow magnitude).
    Saturation is magnitude / max_magnitude clipped to 1; hue interpolates
    between adjacent wheel bins by the flow angle.
    """
    rad = flow.magnitude()
    if max_magnitude is None:
        max_magnitude = float(rad.max())
    if max_magnitude <= 0.0:
        max_magnitude = 1.0
    u = flow.u / max_magnitude
    v = flow.v / max_magnitude
    rad = np.hypot(u, v)
    over = rad > 1.0
    if over.any():
        scale = np.where(over, 1.0 / np.where(over, rad, 1.0), 1.0)
        u, v, rad = u * scale, v * scale, np.minimum(rad, 1.0)

    wheel = make_colorwheel()
    ncols = wheel.shape[0]
    angle = np.arctan2(-v, -u) / np.pi
    fk = (angle + 1.0) / 2.0 * (ncols - 1)
    k0 = np.floor(fk).astype(np.int64)
    k1 = k0 + 1
    k1[k1 == ncols] = 0
    f = fk - k0

    image = np.zeros(flow.u.shape + (3,), dtype=np.uint8)
    for c in range(3):
        col0 = wheel[k0, c] / 255.0
        col1 = wheel[k1, c] / 255.0
        col = (1.0 - f) * col0 + f * col1
        col = 1.0 - rad * (1.0 - col)  # desaturate toward white
        image[:, :, c] = np.floor(255.0 * col).astype(np.uint8)
    return image
