"""Render optical-flow fields with the 55-bin color wheel.

Writes a wheel key image (every direction/magnitude combination) plus the
rendering of a synthetic rotating flow field, and prints the frame-pairing
rule used before flow extraction.
"""

from pathlib import Path

import numpy as np
from PIL import Image

from flowcut import FlowField, flow_to_rgb, pair_frames

out_dir = Path(__file__).resolve().parent / "output"
out_dir.mkdir(exist_ok=True)

# --- pairing rule -------------------------------------------------------------
frames = [f"{i:05d}" for i in range(5)]
print("flow pairing for a 5-frame sequence (note the final backward pair):")
for src, dst in pair_frames(frames):
    print(f"  {src} -> {dst}")

# --- wheel key: hue = direction, saturation = magnitude ------------------------
size = 128
coords = np.linspace(-1.0, 1.0, size)
dx, dy = np.meshgrid(coords, coords)
key = flow_to_rgb(FlowField(u=dx, v=dy), max_magnitude=1.0)
Image.fromarray(key, "RGB").save(out_dir / "wheel_key.png")
print(f"\nwrote {out_dir / 'wheel_key.png'} (center is zero flow = white)")

# --- a rotating flow field ------------------------------------------------------
ys, xs = np.mgrid[0:96, 0:96]
cy, cx = 47.5, 47.5
u = -(ys - cy)
v = xs - cx
rgb = flow_to_rgb(FlowField(u=u, v=v))
Image.fromarray(rgb, "RGB").save(out_dir / "rotation.png")
print(f"wrote {out_dir / 'rotation.png'} (rigid rotation sweeps the full wheel)")

center = rgb[48, 48].tolist()
edge = rgb[48, 95].tolist()
print(f"center pixel (near-zero flow) -> {center}; right edge (fast flow) -> {edge}")
