import numpy as np
import pytest

from flowcut.affinity import AffinityConfig
from flowcut.tensor_io import APPEARANCE, FeatureGrid, PixelMask, write_mask_png, write_npy


def make_grid(arr, kind=APPEARANCE, patch_size=8, image=None):
    arr = np.asarray(arr, dtype=np.float32)
    h = image[0] if image else arr.shape[0] * patch_size
    w = image[1] if image else arr.shape[1] * patch_size
    return FeatureGrid(arr, patch_size, h, w, kind=kind)


def planted_features(rng, rows, cols, channels, fg_mask, noise=0.02):
    """Two well-separated feature clusters following a foreground layout."""
    base_fg = rng.standard_normal(channels)
    base_bg = rng.standard_normal(channels)
    data = np.where(fg_mask[..., None], base_fg, base_bg)
    return (data + noise * rng.standard_normal((rows, cols, channels))).astype(np.float32)


def central_blob(rows, cols):
    fg = np.zeros((rows, cols), dtype=bool)
    fg[rows // 4 : rows // 2 + 1, cols // 4 : cols // 2 + 2] = True
    return fg


@pytest.fixture
def planted_dataset(tmp_path):
    """Synthetic on-disk dataset whose graph-cut solution is the planted mask.

    Two sequences, three frames each; appearance and flow features form two
    clusters (within-cluster cosine ~1, across ~0) split along a central
    blob, so the full pipeline must reproduce the blob exactly.
    """
    rng = np.random.default_rng(2024)
    root = tmp_path / "dataset"
    rows, cols, channels, patch = 8, 10, 16, 8
    fg = central_blob(rows, cols)
    gt_pixels = np.repeat(np.repeat(fg, patch, axis=0), patch, axis=1).astype(np.uint8)

    (root / "feat_app").mkdir(parents=True)
    (root / "gt").mkdir(parents=True)
    (root / "dataset.toml").write_text(
        'averaging_mode = "sequence_average"\npatch_size = 8\n'
        f"image_height = {rows * patch}\nimage_width = {cols * patch}\n"
    )
    for seq in ("seq_a", "seq_b"):
        for frame in ("00000", "00001", "00002"):
            app = planted_features(rng, rows, cols, channels, fg)
            flow = planted_features(rng, rows, cols, channels, fg)
            write_npy(root / "feat_app" / seq / f"{frame}.npy", app)
            write_npy(root / "feat_flow" / seq / f"{frame}.npy", flow)
            write_mask_png(root / "gt" / seq / f"{frame}.png", PixelMask(gt_pixels))
    return root, fg


DEFAULT_CFG = AffinityConfig()
