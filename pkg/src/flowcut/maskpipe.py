"""Patch labels to pixel masks, plus dense-CRF mask refinement.

Mean-field inference runs on a fully connected pairwise model with two
Gaussian kernels (a bilateral appearance kernel over positions and colors,
and a spatial smoothness kernel) under Potts compatibility. Small images use
exact O(N^2) message passing; larger ones a bilateral-grid approximation.
Both live behind :func:`crf_refine`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve1d

from .errors import ShapeError
from .tensor_io import PixelMask

# Soft unary taken from the binary mask; hard unaries would freeze inference.
UNARY_FG = 0.9

# Largest pixel count routed to the exact O(N^2) path by default.
EXACT_PIXEL_LIMIT = 64 * 64


@dataclass(frozen=True)
class CrfParams:
    iterations: int = 10
    w_appearance: float = 10.0
    w_smoothness: float = 3.0
    theta_alpha: float = 60.0
    theta_beta: float = 13.0
    theta_gamma: float = 3.0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        # Zero weights are allowed (they turn the pass into an identity);
        # zero stddevs are not.
        for name in ("w_appearance", "w_smoothness"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("theta_alpha", "theta_beta", "theta_gamma"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")


def patch_to_pixel(
    labels: np.ndarray,
    grid: tuple[int, int],
    patch_size: int,
    image: tuple[int, int],
    source: str = "graphcut",
) -> PixelMask:
    """Replicate per-patch labels over their pixel blocks, cropped to image.

    The grid must tile the image: rows*patch_size >= H > (rows-1)*patch_size
    and likewise for columns.
    """
    rows, cols = grid
    height, width = image
    labels = np.asarray(labels).reshape(-1)
    if labels.size != rows * cols:
        raise ShapeError(f"{labels.size} labels cannot fill a {rows}x{cols} grid")
    if not (rows - 1) * patch_size < height <= rows * patch_size:
        raise ShapeError(f"{rows} patch rows of {patch_size}px cannot tile height {height}")
    if not (cols - 1) * patch_size < width <= cols * patch_size:
        raise ShapeError(f"{cols} patch cols of {patch_size}px cannot tile width {width}")
    block = labels.reshape(rows, cols).astype(np.uint8)
    full = np.repeat(np.repeat(block, patch_size, axis=0), patch_size, axis=1)
    return PixelMask(full[:height, :width], source=source)


def pixel_to_patch_majority(
    mask: np.ndarray, grid: tuple[int, int], patch_size: int
) -> np.ndarray:
    """Downsample a pixel mask to patch labels by per-block majority.

    Ties go to foreground. Inverse of :func:`patch_to_pixel` on block-constant
    masks.
    """
    rows, cols = grid
    mask = np.asarray(mask)
    height, width = mask.shape
    if not (rows - 1) * patch_size < height <= rows * patch_size:
        raise ShapeError(f"{rows} patch rows of {patch_size}px cannot tile height {height}")
    if not (cols - 1) * patch_size < width <= cols * patch_size:
        raise ShapeError(f"{cols} patch cols of {patch_size}px cannot tile width {width}")
    labels = np.zeros((rows, cols), dtype=np.uint8)
    for r in range(rows):
        for c in range(cols):
            block = mask[
                r * patch_size : min((r + 1) * patch_size, height),
                c * patch_size : min((c + 1) * patch_size, width),
            ]
            labels[r, c] = 1 if 2 * int(block.sum()) >= block.size else 0
    return labels.reshape(-1)


# ---------------------------------------------------------------------------
# mean-field inference


def _unary_probs(mask: np.ndarray) -> np.ndarray:
    q = np.where(mask > 0, UNARY_FG, 1.0 - UNARY_FG)
    return np.stack([1.0 - q, q], axis=-1)  # (..., [bg, fg])


def _mean_field_exact(unary: np.ndarray, rgb: np.ndarray, params: CrfParams) -> np.ndarray:
    h, w = unary.shape[:2]
    n = h * w
    ys, xs = np.mgrid[0:h, 0:w]
    pos = np.stack([ys.ravel(), xs.ravel()], axis=1).astype(np.float64)
    color = rgb.reshape(n, 3).astype(np.float64)

    d2_pos = ((pos[:, None, :] - pos[None, :, :]) ** 2).sum(-1)
    d2_col = ((color[:, None, :] - color[None, :, :]) ** 2).sum(-1)
    k_app = np.exp(-d2_pos / (2 * params.theta_alpha**2) - d2_col / (2 * params.theta_beta**2))
    k_smooth = np.exp(-d2_pos / (2 * params.theta_gamma**2))
    np.fill_diagonal(k_app, 0.0)
    np.fill_diagonal(k_smooth, 0.0)
    # Per-pixel kernel normalization keeps message magnitudes independent of
    # image size, so one weight setting works at every resolution.
    norm_app = k_app.sum(axis=1, keepdims=True)
    norm_smooth = k_smooth.sum(axis=1, keepdims=True)

    p_u = unary.reshape(n, 2)
    q = p_u.copy()
    for _ in range(params.iterations):
        message = params.w_appearance * (k_app @ q) / norm_app + params.w_smoothness * (
            k_smooth @ q
        ) / norm_smooth
        # Potts: label l is penalized by the mass sent to the other label.
        penalty = message[:, ::-1]
        q = p_u * np.exp(-penalty)
        q /= q.sum(axis=1, keepdims=True)
    return q.reshape(h, w, 2)


def _gauss_kernel(sigma: float, radius: int) -> np.ndarray:
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    return np.exp(-(x**2) / (2 * sigma**2))


def _smooth_filter(values: np.ndarray, sigma: float) -> np.ndarray:
    # Unnormalized truncated Gaussian; zero padding matches pairwise sums
    # that simply stop at the image border.
    radius = max(1, int(np.ceil(4 * sigma)))
    kernel = _gauss_kernel(sigma, radius)
    out = convolve1d(values, kernel, axis=0, mode="constant", cval=0.0)
    return convolve1d(out, kernel, axis=1, mode="constant", cval=0.0)


class _BilateralGrid:
    """5-d bilateral grid approximating sum_j exp(-|f_i-f_j|^2/2) v_j over
    joint position+color features scaled by (theta_alpha, theta_beta):
    multilinear splat, sigma-1 separable grid blur, multilinear slice.

    Splat geometry depends only on the image, so it is precomputed once and
    reused for every filtering pass of the mean-field iteration."""

    def __init__(self, rgb: np.ndarray, params: CrfParams):
        h, w = rgb.shape[:2]
        self.shape = (h, w)
        ys, xs = np.mgrid[0:h, 0:w]
        feats = np.stack(
            [
                ys.ravel() / params.theta_alpha,
                xs.ravel() / params.theta_alpha,
                rgb.reshape(-1, 3)[:, 0] / params.theta_beta,
                rgb.reshape(-1, 3)[:, 1] / params.theta_beta,
                rgb.reshape(-1, 3)[:, 2] / params.theta_beta,
            ],
            axis=1,
        )
        coords = feats - feats.min(axis=0) + 1.0  # one-cell pad for the stencil
        self.dims = tuple(int(np.ceil(coords[:, a].max())) + 2 for a in range(5))
        base = np.floor(coords).astype(np.int64)
        frac = coords - base
        strides = np.array(
            [int(np.prod(self.dims[a + 1 :], dtype=np.int64)) for a in range(5)], dtype=np.int64
        )
        self.cells = int(np.prod(self.dims, dtype=np.int64))
        self.corner_idx = []
        self.corner_weight = []
        for offsets in itertools.product((0, 1), repeat=5):
            off = np.array(offsets, dtype=np.int64)
            weight = np.ones(len(coords), dtype=np.float64)
            for a in range(5):
                weight *= frac[:, a] if offsets[a] else 1.0 - frac[:, a]
            self.corner_idx.append(((base + off) * strides).sum(axis=1))
            self.corner_weight.append(weight)

    def filter(self, values: np.ndarray) -> np.ndarray:
        h, w = self.shape
        channels = values.reshape(h * w, -1)
        flat = np.zeros((self.cells, channels.shape[1]), dtype=np.float64)
        for idx, weight in zip(self.corner_idx, self.corner_weight):
            for c in range(channels.shape[1]):
                flat[:, c] += np.bincount(
                    idx, weights=weight * channels[:, c], minlength=self.cells
                )
        grid = flat.reshape(self.dims + (channels.shape[1],))
        kernel = _gauss_kernel(1.0, 3)
        for axis in range(5):
            grid = convolve1d(grid, kernel, axis=axis, mode="constant", cval=0.0)
        flat = grid.reshape(self.cells, channels.shape[1])
        out = np.zeros_like(channels)
        for idx, weight in zip(self.corner_idx, self.corner_weight):
            out += weight[:, None] * flat[idx]
        return out.reshape(h, w, -1)


def _bilateral_grid_filter(values: np.ndarray, rgb: np.ndarray, params: CrfParams) -> np.ndarray:
    return _BilateralGrid(rgb, params).filter(values)


def _mean_field_grid(unary: np.ndarray, rgb: np.ndarray, params: CrfParams) -> np.ndarray:
    # Unlike the exact path, the approximate message keeps the self term: the
    # grid's per-pixel self-response is not separable from its neighbors, and
    # normalizing the full response keeps the message a convex average of Q
    # (the convention of the reference efficient-inference implementations).
    h, w = unary.shape[:2]
    p_u = unary.copy()
    q = p_u.copy()
    grid = _BilateralGrid(rgb.astype(np.float64), params)
    ones = np.ones((h, w, 1), dtype=np.float64)
    norm_app = grid.filter(ones)
    norm_smooth = _smooth_filter(ones, params.theta_gamma)
    for _ in range(params.iterations):
        app = grid.filter(q) / norm_app
        smooth = _smooth_filter(q, params.theta_gamma) / norm_smooth
        message = params.w_appearance * app + params.w_smoothness * smooth
        penalty = message[..., ::-1]
        q = p_u * np.exp(-penalty)
        q /= q.sum(axis=2, keepdims=True)
    return q


def mean_field_marginals(
    mask: np.ndarray,
    rgb_image: np.ndarray,
    params: CrfParams,
    mode: str = "auto",
) -> np.ndarray:
    """Run mean-field inference; returns foreground marginals in [0, 1].

    ``mode`` is "exact", "grid", or "auto" (exact up to 64x64 pixels).
    """
    mask = np.asarray(mask)
    rgb = np.asarray(rgb_image)
    if rgb.shape[:2] != mask.shape or rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ShapeError(f"mask {mask.shape} vs image {rgb.shape}")
    if mode == "auto":
        mode = "exact" if mask.size <= EXACT_PIXEL_LIMIT else "grid"
    unary = _unary_probs(mask)
    if mode == "exact":
        q = _mean_field_exact(unary, rgb, params)
    elif mode == "grid":
        q = _mean_field_grid(unary, rgb, params)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return q[..., 1]


def crf_refine(
    mask: PixelMask,
    rgb_image: np.ndarray,
    params: CrfParams | None = None,
    mode: str = "auto",
) -> PixelMask:
    """Refine a binary mask against its frame with dense-CRF mean field.

    The mask provides soft unaries (0.9 foreground probability where it is
    set); pairwise terms move labels only where appearance or smoothness
    evidence overturns them.
    """
    params = params or CrfParams()
    q_fg = mean_field_marginals(mask.data, rgb_image, params, mode=mode)
    return PixelMask((q_fg >= 0.5).astype(np.uint8), source="crf")
