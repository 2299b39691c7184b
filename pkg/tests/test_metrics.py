import json

import numpy as np
import pytest

from flowcut.errors import ArgumentError, ShapeError
from flowcut.metrics import (
    FrameScore,
    aggregate,
    accuracy,
    boundary_f,
    jaccard,
    mask_boundary,
    max_f_beta,
    merge_masks,
)
from flowcut.tensor_io import FRAME_AVERAGE, SEQUENCE_AVERAGE, PixelMask


def mask_of(rows):
    return PixelMask(np.array(rows, dtype=np.uint8))


class TestJaccard:
    def test_identical(self):
        m = mask_of([[1, 1], [0, 1]])
        assert jaccard(m, m) == 1.0

    def test_disjoint(self):
        a = mask_of([[1, 0], [0, 0]])
        b = mask_of([[0, 0], [0, 1]])
        assert jaccard(a, b) == 0.0

    def test_half_overlap(self):
        # both area 4, overlapping 2 -> 2 / 6
        a = np.zeros((4, 4), dtype=np.uint8)
        b = np.zeros((4, 4), dtype=np.uint8)
        a[0, :] = 1
        b[0, 2:] = 1
        b[1, :2] = 1
        assert jaccard(PixelMask(a), PixelMask(b)) == pytest.approx(1 / 3)

    def test_empty_empty(self):
        z = mask_of([[0, 0], [0, 0]])
        assert jaccard(z, z) == 1.0

    def test_empty_vs_nonempty(self):
        z = mask_of([[0, 0], [0, 0]])
        m = mask_of([[1, 0], [0, 0]])
        assert jaccard(m, z) == 0.0
        assert jaccard(z, m) == 0.0

    def test_symmetric(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            a = PixelMask((rng.random((6, 6)) > 0.5).astype(np.uint8))
            b = PixelMask((rng.random((6, 6)) > 0.5).astype(np.uint8))
            assert jaccard(a, b) == jaccard(b, a)

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            jaccard(mask_of([[1]]), mask_of([[1, 0]]))


def oracle_boundary_f(pred, gt, tol):
    """Exhaustive nearest-boundary-distance matcher."""
    pb = np.argwhere(mask_boundary(pred))
    gb = np.argwhere(mask_boundary(gt))
    if len(pb) == 0 and len(gb) == 0:
        return 1.0
    if len(pb) == 0 or len(gb) == 0:
        return 0.0

    def matched(points, targets):
        hits = 0
        for p in points:
            d2 = ((targets - p) ** 2).sum(axis=1)
            if d2.min() <= tol * tol:
                hits += 1
        return hits

    precision = matched(pb, gb) / len(pb)
    recall = matched(gb, pb) / len(gb)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


class TestBoundaryF:
    def test_perfect(self):
        m = np.zeros((10, 10), dtype=np.uint8)
        m[3:7, 3:7] = 1
        assert boundary_f(PixelMask(m), PixelMask(m)) == 1.0

    def test_everything_beyond_tolerance(self):
        a = np.zeros((20, 20), dtype=np.uint8)
        b = np.zeros((20, 20), dtype=np.uint8)
        a[0:2, 0:2] = 1
        b[17:19, 17:19] = 1
        assert boundary_f(PixelMask(a), PixelMask(b), tol_px=2) == 0.0

    def test_shifted_square_matches_distance_oracle(self):
        pred = np.zeros((16, 16), dtype=np.uint8)
        gt = np.zeros((16, 16), dtype=np.uint8)
        gt[4:10, 4:10] = 1
        pred[5:11, 4:10] = 1  # shifted one pixel down
        for tol in (1, 2):
            assert boundary_f(PixelMask(pred), PixelMask(gt), tol_px=tol) == pytest.approx(
                oracle_boundary_f(pred, gt, tol)
            )

    @pytest.mark.parametrize("seed", range(5))
    def test_random_masks_match_distance_oracle(self, seed):
        rng = np.random.default_rng(seed)
        pred = (rng.random((12, 12)) > 0.6).astype(np.uint8)
        gt = (rng.random((12, 12)) > 0.6).astype(np.uint8)
        for tol in (1, 2, 3):
            assert boundary_f(PixelMask(pred), PixelMask(gt), tol_px=tol) == pytest.approx(
                oracle_boundary_f(pred, gt, tol)
            )

    def test_symmetric(self):
        rng = np.random.default_rng(7)
        a = PixelMask((rng.random((10, 10)) > 0.5).astype(np.uint8))
        b = PixelMask((rng.random((10, 10)) > 0.5).astype(np.uint8))
        assert boundary_f(a, b, tol_px=2) == boundary_f(b, a, tol_px=2)

    def test_empty_conventions(self):
        z = PixelMask(np.zeros((8, 8), dtype=np.uint8))
        m = np.zeros((8, 8), dtype=np.uint8)
        m[2:5, 2:5] = 1
        assert boundary_f(z, z) == 1.0
        assert boundary_f(PixelMask(m), z) == 0.0


def oracle_max_f_beta(soft, gt, beta2=0.3):
    """Brute force over every distinct value of the soft mask."""
    g = gt.astype(bool)
    best = 0.0
    for t in np.unique(soft):
        if t <= 0.0:
            continue
        binary = soft >= t
        tp = int((binary & g).sum())
        fp = int(binary.sum()) - tp
        fn = int(g.sum()) - tp
        if tp == 0:
            f = 1.0 if fp == 0 and fn == 0 else 0.0
        else:
            p, r = tp / (tp + fp), tp / (tp + fn)
            f = (1 + beta2) * p * r / (beta2 * p + r)
        best = max(best, f)
    return best


class TestMaxFBeta:
    def test_perfect_threshold(self):
        gt = np.zeros((4, 4), dtype=np.uint8)
        gt[:2] = 1
        soft = gt.astype(np.float64) * 0.8
        assert max_f_beta(soft, PixelMask(gt)) == 1.0

    def test_precision_one_recall_half(self):
        # one threshold yields exactly precision 1, recall 0.5
        gt = np.zeros((2, 4), dtype=np.uint8)
        gt[0, :] = 1
        soft = np.zeros((2, 4))
        soft[0, :2] = 0.9
        value = max_f_beta(soft, PixelMask(gt))
        assert value == pytest.approx(1.3 * 0.5 / 0.8)  # 0.8125

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_exhaustive_oracle(self, seed):
        rng = np.random.default_rng(seed)
        soft = rng.integers(0, 256, (8, 8)).astype(np.float64) / 255.0
        gt = (rng.random((8, 8)) > 0.5).astype(np.uint8)
        mine = max_f_beta(soft, PixelMask(gt))
        ref = oracle_max_f_beta(soft, gt)
        assert mine == pytest.approx(ref, abs=1e-9)

    def test_gt_as_soft_mask_scores_one(self):
        rng = np.random.default_rng(3)
        gt = (rng.random((6, 6)) > 0.4).astype(np.uint8)
        assert max_f_beta(gt.astype(np.float64), PixelMask(gt)) == 1.0
        empty = np.zeros((6, 6), dtype=np.uint8)
        assert max_f_beta(empty.astype(np.float64), PixelMask(empty)) == 1.0


class TestMergeMasks:
    def test_single(self):
        m = mask_of([[1, 0], [0, 1]])
        assert np.array_equal(merge_masks([m]).data, m.data)

    def test_disjoint_union(self):
        a = mask_of([[1, 0], [0, 0]])
        b = mask_of([[0, 0], [0, 1]])
        merged = merge_masks([a, b])
        assert merged.data.sum() == 2

    def test_subset(self):
        a = mask_of([[1, 0], [0, 0]])
        b = mask_of([[1, 1], [0, 0]])
        assert np.array_equal(merge_masks([a, b]).data, b.data)

    def test_empty_list(self):
        with pytest.raises(ArgumentError):
            merge_masks([])


def score(seq, frame, j, f=0.5, acc=0.9):
    return FrameScore(sequence=seq, frame=frame, jaccard=j, boundary_f=f, accuracy=acc)


class TestAggregate:
    def test_single_sequence_modes_equal(self):
        scores = [score("a", "1", 0.5), score("a", "2", 0.7)]
        seq = aggregate(scores, SEQUENCE_AVERAGE)
        frame = aggregate(scores, FRAME_AVERAGE)
        assert seq.dataset_j == pytest.approx(frame.dataset_j) == pytest.approx(0.6)

    def test_two_sequences_modes_differ(self):
        scores = [score("a", "1", 1.0), score("a", "2", 0.0), score("b", "1", 1.0)]
        assert aggregate(scores, SEQUENCE_AVERAGE).dataset_j == pytest.approx(0.75)
        assert aggregate(scores, FRAME_AVERAGE).dataset_j == pytest.approx(2 / 3)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(1)
        scores = [score(s, str(i), float(rng.random())) for s in "abc" for i in range(4)]
        r1 = aggregate(scores, SEQUENCE_AVERAGE)
        shuffled = list(scores)
        rng.shuffle(shuffled)
        r2 = aggregate(shuffled, SEQUENCE_AVERAGE)
        assert r1.dataset_j == pytest.approx(r2.dataset_j)

    def test_empty_rejected(self):
        with pytest.raises(ArgumentError):
            aggregate([], FRAME_AVERAGE)

    def test_json_has_four_decimals(self):
        scores = [score("a", "1", 1 / 3)]
        payload = json.loads(aggregate(scores, FRAME_AVERAGE).to_json())
        assert payload["dataset_J"] == 0.3333
        assert payload["per_frame"][0]["J"] == 0.3333


class TestAccuracy:
    def test_basic(self):
        a = mask_of([[1, 0], [0, 0]])
        b = mask_of([[1, 1], [0, 0]])
        assert accuracy(a, b) == 0.75
