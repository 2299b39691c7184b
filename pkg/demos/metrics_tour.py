"""Tour of the mask metrics: J (IoU), boundary F, accuracy, max F-beta."""

import numpy as np

from flowcut import aggregate, boundary_f, jaccard, max_f_beta, merge_masks
from flowcut.metrics import FrameScore, accuracy
from flowcut.tensor_io import FRAME_AVERAGE, SEQUENCE_AVERAGE, PixelMask

gt = np.zeros((24, 24), dtype=np.uint8)
gt[6:18, 6:18] = 1

shifted = np.zeros_like(gt)
shifted[7:19, 6:18] = 1  # one pixel down

print("prediction shifted by 1px against a 12x12 square ground truth:")
print(f"  jaccard     = {jaccard(PixelMask(shifted), PixelMask(gt)):.4f}")
print(f"  boundary F  = {boundary_f(PixelMask(shifted), PixelMask(gt), tol_px=1):.4f}")
print(f"  accuracy    = {accuracy(PixelMask(shifted), PixelMask(gt)):.4f}")

soft = gt * 0.6 + 0.2 * np.random.default_rng(0).random(gt.shape)
print(f"  max F-beta  = {max_f_beta(soft, PixelMask(gt)):.4f}  (soft saliency map)")

# multi-object annotations merge into one foreground mask
left = np.zeros_like(gt)
left[2:6, 2:6] = 1
right = np.zeros_like(gt)
right[18:22, 18:22] = 1
merged = merge_masks([PixelMask(left), PixelMask(right)])
print(f"\nmerged two object masks: {int(merged.data.sum())} foreground pixels")

# sequence vs frame averaging on a toy score table
scores = [
    FrameScore("drift", "000", 1.0, 1.0, 1.0),
    FrameScore("drift", "001", 0.0, 0.0, 0.5),
    FrameScore("kite", "000", 1.0, 1.0, 1.0),
]
print("\nper-frame J = [1.0, 0.0, 1.0] over sequences {drift: 2 frames, kite: 1}")
print(f"  sequence average J = {aggregate(scores, SEQUENCE_AVERAGE).dataset_j:.4f}")
print(f"  frame average J    = {aggregate(scores, FRAME_AVERAGE).dataset_j:.4f}")
print("\nreport as JSON:")
print(aggregate(scores, SEQUENCE_AVERAGE).to_json())
