import numpy as np
import pytest

from flowcut.errors import ShapeError
from flowcut.maskpipe import (
    CrfParams,
    crf_refine,
    mean_field_marginals,
    patch_to_pixel,
    pixel_to_patch_majority,
)
from flowcut.tensor_io import PixelMask


class TestPatchToPixel:
    def test_single_patch(self):
        mask = patch_to_pixel(np.array([1]), (1, 1), 8, (8, 8))
        assert mask.data.shape == (8, 8)
        assert (mask.data == 1).all()

    def test_two_columns(self):
        mask = patch_to_pixel(np.array([1, 0]), (1, 2), 4, (4, 8))
        assert (mask.data[:, :4] == 1).all()
        assert (mask.data[:, 4:] == 0).all()

    def test_partial_blocks_cropped(self):
        labels = np.ones(9)
        mask = patch_to_pixel(labels, (3, 3), 8, (20, 20))
        assert mask.data.shape == (20, 20)

    def test_inconsistent_geometry(self):
        with pytest.raises(ShapeError):
            patch_to_pixel(np.ones(9), (3, 3), 8, (40, 20))
        with pytest.raises(ShapeError):
            patch_to_pixel(np.ones(4), (3, 3), 8, (20, 20))

    @pytest.mark.parametrize("seed", range(5))
    def test_majority_downsample_inverts(self, seed):
        rng = np.random.default_rng(seed)
        rows, cols, patch = 4, 6, 5
        h, w = 18, 27  # partial blocks at both edges
        labels = rng.integers(0, 2, rows * cols).astype(np.uint8)
        mask = patch_to_pixel(labels, (rows, cols), patch, (h, w))
        back = pixel_to_patch_majority(mask.data, (rows, cols), patch)
        assert np.array_equal(back, labels)

    def test_majority_ties_go_foreground(self):
        mask = np.zeros((2, 2), dtype=np.uint8)
        mask[0, :] = 1  # exactly half of the single 2x2 block
        assert pixel_to_patch_majority(mask, (1, 1), 2).tolist() == [1]


def oracle_marginals(mask, rgb, params, iterations):
    """Brute-force mean field: explicit per-pixel pairwise sums."""
    h, w = mask.shape
    n = h * w
    pos = [(r, c) for r in range(h) for c in range(w)]
    col = rgb.reshape(n, 3).astype(float)
    pu = np.zeros((n, 2))
    flat = mask.reshape(-1)
    for i in range(n):
        q = 0.9 if flat[i] else 0.1
        pu[i] = [1 - q, q]
    kap = np.zeros((n, n))
    ksm = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            dp = (pos[i][0] - pos[j][0]) ** 2 + (pos[i][1] - pos[j][1]) ** 2
            dc = sum((col[i][k] - col[j][k]) ** 2 for k in range(3))
            kap[i, j] = np.exp(-dp / (2 * params.theta_alpha**2) - dc / (2 * params.theta_beta**2))
            ksm[i, j] = np.exp(-dp / (2 * params.theta_gamma**2))
    q = pu.copy()
    for _ in range(iterations):
        msg = np.zeros_like(q)
        for i in range(n):
            da, ds = kap[i].sum(), ksm[i].sum()
            for label in (0, 1):
                msg[i, label] = (
                    params.w_appearance * (kap[i] @ q[:, label]) / da
                    + params.w_smoothness * (ksm[i] @ q[:, label]) / ds
                )
        qn = np.zeros_like(q)
        for i in range(n):
            for label in (0, 1):
                qn[i, label] = pu[i, label] * np.exp(-msg[i, 1 - label])
            qn[i] /= qn[i].sum()
        q = qn
    return q[:, 1].reshape(h, w)


class TestCrf:
    def test_zero_weights_identity(self):
        rng = np.random.default_rng(0)
        mask = PixelMask((rng.random((10, 10)) > 0.5).astype(np.uint8))
        rgb = rng.integers(0, 256, (10, 10, 3)).astype(np.uint8)
        params = CrfParams(w_appearance=0.0, w_smoothness=0.0)
        out = crf_refine(mask, rgb, params)
        assert np.array_equal(out.data, mask.data)
        assert out.source == "crf"

    def test_uniform_image_keeps_clean_rectangle(self):
        # No color gradient: with weights below the unary log-odds the
        # pairwise vote cannot move the boundary anywhere.
        rgb = np.full((16, 16, 3), 128, dtype=np.uint8)
        mask = np.zeros((16, 16), dtype=np.uint8)
        mask[4:12, 4:12] = 1
        params = CrfParams(w_appearance=1.0, w_smoothness=0.5)
        out = crf_refine(PixelMask(mask), rgb, params)
        assert np.array_equal(out.data, mask)

    def test_two_tone_boundary_snaps_to_color_edge(self):
        rgb = np.zeros((16, 16, 3), dtype=np.uint8)
        rgb[:, 8:] = 255
        mask = np.zeros((16, 16), dtype=np.uint8)
        mask[:, :6] = 1  # offset 2px from the color edge at column 8
        out = crf_refine(PixelMask(mask), rgb, CrfParams(), mode="exact")
        expected = np.zeros((16, 16), dtype=np.uint8)
        expected[:, :8] = 1
        assert np.array_equal(out.data, expected)
        # and the refinement agrees with the brute-force oracle
        oracle = (oracle_marginals(mask, rgb, CrfParams(), 10) >= 0.5).astype(np.uint8)
        assert np.array_equal(out.data, oracle)

    @pytest.mark.parametrize("seed", range(3))
    def test_exact_path_matches_oracle(self, seed):
        rng = np.random.default_rng(seed)
        mask = (rng.random((12, 12)) > 0.5).astype(np.uint8)
        rgb = rng.integers(0, 256, (12, 12, 3)).astype(np.uint8)
        params = CrfParams(iterations=5)
        mine = mean_field_marginals(mask, rgb, params, mode="exact")
        ref = oracle_marginals(mask, rgb, params, 5)
        assert np.abs(mine - ref).max() < 1e-6

    def test_marginals_stay_probabilities(self):
        rng = np.random.default_rng(11)
        mask = (rng.random((14, 14)) > 0.3).astype(np.uint8)
        rgb = rng.integers(0, 256, (14, 14, 3)).astype(np.uint8)
        for mode in ("exact", "grid"):
            q = mean_field_marginals(mask, rgb, CrfParams(iterations=4), mode=mode)
            assert (q >= 0.0).all() and (q <= 1.0).all()

    def test_grid_path_tracks_exact(self):
        rng = np.random.default_rng(5)
        params = CrfParams(iterations=3)
        rgb = np.zeros((20, 20, 3), dtype=np.uint8)
        rgb[:10, :10] = [200, 30, 30]
        rgb[:10, 10:] = [30, 200, 30]
        rgb[10:, :10] = [30, 30, 200]
        rgb[10:, 10:] = [220, 220, 40]
        mask = (rng.random((20, 20)) > 0.6).astype(np.uint8)
        exact = mean_field_marginals(mask, rgb, params, mode="exact")
        grid = mean_field_marginals(mask, rgb, params, mode="grid")
        assert np.abs(grid - exact).mean() < 0.03
        assert (((grid >= 0.5) == (exact >= 0.5)).mean()) > 0.9

    def test_degenerate_unaries_pass_through(self):
        rgb = np.full((8, 8, 3), 50, dtype=np.uint8)
        ones = PixelMask(np.ones((8, 8), dtype=np.uint8))
        zeros = PixelMask(np.zeros((8, 8), dtype=np.uint8))
        assert np.array_equal(crf_refine(ones, rgb).data, ones.data)
        assert np.array_equal(crf_refine(zeros, rgb).data, zeros.data)

    def test_dimension_mismatch(self):
        mask = PixelMask(np.zeros((4, 4), dtype=np.uint8))
        with pytest.raises(ShapeError):
            crf_refine(mask, np.zeros((5, 5, 3), dtype=np.uint8))

    def test_auto_mode_dispatch(self):
        rng = np.random.default_rng(2)
        mask = (rng.random((8, 8)) > 0.5).astype(np.uint8)
        rgb = rng.integers(0, 256, (8, 8, 3)).astype(np.uint8)
        auto = mean_field_marginals(mask, rgb, CrfParams(iterations=2), mode="auto")
        exact = mean_field_marginals(mask, rgb, CrfParams(iterations=2), mode="exact")
        assert np.array_equal(auto, exact)

    def test_param_validation(self):
        with pytest.raises(ValueError):
            CrfParams(iterations=0)
        with pytest.raises(ValueError):
            CrfParams(theta_alpha=0.0)
        with pytest.raises(ValueError):
            CrfParams(w_appearance=-1.0)
