"""Bootstrapped self-training on pseudo-ground-truth masks.

Round 0 pseudo-GT comes from the graph-cut; each later round trains a
segmenter from scratch on the previous round's predictions and writes its
own predictions as the next pseudo-GT. The in-repo segmenter is a per-patch
linear probe over appearance features (sigmoid of w.x + b, thresholded at
0.5); heavier segmentation heads can be swapped in out-of-process through
:func:`external_trainer_exchange`.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .errors import ArgumentError, ExchangeError, NumericalError, RoundError, ShapeError
from .maskpipe import patch_to_pixel, pixel_to_patch_majority
from .metrics import EvalReport, FrameScore, accuracy, aggregate, boundary_f, jaccard
from .tensor_io import DatasetManifest, FeatureGrid, PixelMask, read_mask_png, write_mask_png

BCE_CLAMP = 1e-12
PREDICTION_THRESHOLD = 0.5


@dataclass
class LinearProbe:
    weights: np.ndarray
    bias: float

    @property
    def channels(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class SelfTrainConfig:
    lr: float = 0.1
    iterations: int = 500
    resume: bool = False

    def digest(self) -> str:
        blob = json.dumps({"lr": self.lr, "iterations": self.iterations}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class RoundState:
    """One self-training round: its pseudo-GT files and trained probe."""

    round: int
    pseudo_gt_manifest: dict
    probe: LinearProbe | None
    metrics: EvalReport | None
    seed: int


def fresh_probe(channels: int, seed: int, round_index: int) -> LinearProbe:
    """Round-t initialization; depends only on (seed, round), never on the
    previous round's trained parameters. Zero init keeps the start symmetric
    and deterministic."""
    del seed, round_index  # recorded by the caller; zero init uses neither
    return LinearProbe(weights=np.zeros(channels, dtype=np.float64), bias=0.0)


def bce_loss(pred: np.ndarray, target: np.ndarray, clamp: float = BCE_CLAMP) -> float:
    """Mean binary cross-entropy; predictions clamped away from {0, 1}."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeError(f"prediction {p.shape} vs target {t.shape}")
    p = np.clip(p, clamp, 1.0 - clamp)
    return float(-np.mean(t * np.log(p) + (1.0 - t) * np.log(1.0 - p)))


def bce_gradient(
    probe: LinearProbe, features: np.ndarray, targets: np.ndarray
) -> tuple[np.ndarray, float]:
    """Gradient of mean BCE(sigmoid(X w + b), t) w.r.t. (w, b)."""
    x = np.asarray(features, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    p = expit(x @ probe.weights + probe.bias)
    g = (p - t) / len(t)
    return x.T @ g, float(g.sum())


def probe_predict(probe: LinearProbe, features: FeatureGrid) -> np.ndarray:
    """Per-patch foreground probability sigmoid(w.x + b), shape (n_patches,)."""
    if features.channels != probe.channels:
        raise ShapeError(f"probe has {probe.channels} channels, grid {features.channels}")
    x = features.vectors().astype(np.float64)
    return expit(x @ probe.weights + probe.bias)


def train_probe(
    data: list[tuple[FeatureGrid, np.ndarray]],
    seed: int = 0,
    lr: float = 0.1,
    iterations: int = 500,
    init: LinearProbe | None = None,
    round_index: int = 0,
) -> LinearProbe:
    """Full-batch gradient descent on mean BCE over all patches.

    Returns the lowest-loss iterate seen (which is the initialization when
    lr = 0), so the final loss never exceeds the initial one.
    """
    if not data:
        raise ArgumentError("train_probe needs at least one frame")
    xs, ts = [], []
    for grid, target in data:
        target = np.asarray(target).reshape(-1)
        if target.size != grid.n_patches:
            raise ShapeError(f"{target.size} targets for {grid.n_patches} patches")
        xs.append(grid.vectors().astype(np.float64))
        ts.append(target.astype(np.float64))
    x = np.concatenate(xs, axis=0)
    t = np.concatenate(ts, axis=0)

    probe = init if init is not None else fresh_probe(x.shape[1], seed, round_index)
    w = probe.weights.astype(np.float64).copy()
    b = float(probe.bias)

    def loss_at(w, b):
        return bce_loss(expit(x @ w + b), t)

    best_loss = loss_at(w, b)
    best = (w.copy(), b)
    for _ in range(iterations):
        p = expit(x @ w + b)
        g = (p - t) / len(t)
        w = w - lr * (x.T @ g)
        b = b - lr * float(g.sum())
        current = loss_at(w, b)
        if not np.isfinite(current):
            raise NumericalError("training loss became non-finite; lower the learning rate")
        if current < best_loss:
            best_loss = current
            best = (w.copy(), b)
    return LinearProbe(weights=best[0], bias=best[1])


def ensemble_vote(masks: list[PixelMask]) -> PixelMask:
    """Pixelwise majority over an odd number (>= 3) of masks."""
    if len(masks) < 3:
        raise ArgumentError(f"ensemble needs at least 3 masks, got {len(masks)}")
    if len(masks) % 2 == 0:
        raise ArgumentError("ensemble needs an odd mask count (no tie rule is defined)")
    shape = masks[0].data.shape
    votes = np.zeros(shape, dtype=np.int64)
    for m in masks:
        if m.data.shape != shape:
            raise ShapeError(f"mask dimensions differ: {m.data.shape} vs {shape}")
        votes += m.data
    majority = (2 * votes > len(masks)).astype(np.uint8)
    return PixelMask(majority, source="ensemble")


# ---------------------------------------------------------------------------
# round management


def _round_dir(run_root: Path, index: int) -> Path:
    return Path(run_root) / f"round_{index}"


def _mask_path(masks_root: Path, seq: str, frame: str) -> Path:
    return masks_root / seq / f"{frame}.png"


def save_probe(path: Path, probe: LinearProbe, seed: int, round_index: int, cfg) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "weights": [float(v) for v in probe.weights],
        "bias": float(probe.bias),
        "seed": seed,
        "round": round_index,
        "config_hash": cfg.digest(),
    }
    path.write_text(json.dumps(payload, indent=2))


def load_probe(path: Path) -> LinearProbe:
    payload = json.loads(Path(path).read_text())
    return LinearProbe(
        weights=np.asarray(payload["weights"], dtype=np.float64), bias=float(payload["bias"])
    )


def evaluate_masks(
    mask_files: dict, manifest: DatasetManifest, tol_px: int | None = None
) -> EvalReport | None:
    """Score a frame->mask-file map against available ground truth."""
    scores = []
    for seq, frame in manifest.frames():
        if not manifest.has_gt(seq, frame):
            continue
        pred = read_mask_png(mask_files[(seq, frame)])
        gt = read_mask_png(manifest.gt_path(seq, frame))
        scores.append(
            FrameScore(
                sequence=seq,
                frame=frame,
                jaccard=jaccard(pred, gt),
                boundary_f=boundary_f(pred, gt, tol_px=tol_px),
                accuracy=accuracy(pred, gt),
            )
        )
    if not scores:
        return None
    return aggregate(scores, manifest.averaging_mode)


def run_round(
    state: RoundState,
    manifest: DatasetManifest,
    cfg: SelfTrainConfig,
    run_root: str | Path,
) -> RoundState:
    """Advance one self-training round.

    Trains a probe (fresh unless cfg.resume) on the current pseudo-GT,
    predicts every frame at threshold 0.5, writes the masks as the next
    round's pseudo-GT and evaluates them where ground truth exists.
    """
    next_index = state.round + 1
    data = []
    grids = {}
    for seq, frame in manifest.frames():
        key = (seq, frame)
        if key not in state.pseudo_gt_manifest:
            raise RoundError(f"round {state.round} pseudo-GT is missing frame {seq}/{frame}")
        mask_file = Path(state.pseudo_gt_manifest[key])
        if not mask_file.is_file():
            raise RoundError(f"pseudo-GT file vanished: {mask_file}")
        app, _ = manifest.load_features(seq, frame)
        mask = read_mask_png(mask_file)
        target = pixel_to_patch_majority(mask.data, (app.rows, app.cols), app.patch_size)
        data.append((app, target))
        grids[key] = app

    init = state.probe if cfg.resume and state.probe is not None else None
    probe = train_probe(
        data,
        seed=state.seed,
        lr=cfg.lr,
        iterations=cfg.iterations,
        init=init,
        round_index=next_index,
    )

    masks_root = _round_dir(Path(run_root), next_index) / "masks"
    new_manifest = {}
    for seq, frame in manifest.frames():
        app = grids[(seq, frame)]
        soft = probe_predict(probe, app)
        labels = (soft >= PREDICTION_THRESHOLD).astype(np.uint8)
        mask = patch_to_pixel(
            labels,
            (app.rows, app.cols),
            app.patch_size,
            (app.image_height, app.image_width),
            source="probe",
        )
        out = _mask_path(masks_root, seq, frame)
        write_mask_png(out, mask)
        new_manifest[(seq, frame)] = out

    report = evaluate_masks(new_manifest, manifest)
    round_dir = _round_dir(Path(run_root), next_index)
    save_probe(round_dir / "probe.json", probe, state.seed, next_index, cfg)
    if report is not None:
        (round_dir / "report.json").write_text(report.to_json())

    return RoundState(
        round=next_index,
        pseudo_gt_manifest=new_manifest,
        probe=probe,
        metrics=report,
        seed=state.seed,
    )


def external_trainer_exchange(round_dir: str | Path, manifest: DatasetManifest) -> dict:
    """Adopt externally produced predictions as the next round's pseudo-GT.

    ``round_dir`` (runs/<name>/round_<t>) must hold the current pseudo-GT
    under masks/ and the external trainer's outputs under predictions/,
    mirrored per sequence. Each prediction must exist, be binary, and match
    its pseudo-GT dimensions; offenders are collected into one ExchangeError.
    Valid predictions are copied to round_<t+1>/masks and returned as the
    new pseudo-GT manifest.
    """
    round_dir = Path(round_dir)
    name = round_dir.name
    if not name.startswith("round_"):
        raise ExchangeError(f"{round_dir} is not a round directory")
    index = int(name.split("_", 1)[1])
    masks_root = round_dir / "masks"
    pred_root = round_dir / "predictions"
    if not masks_root.is_dir():
        raise ExchangeError(f"{round_dir} has no pseudo-GT masks/ directory")

    offenders = []
    adopted = {}
    for seq, frame in manifest.frames():
        current = _mask_path(masks_root, seq, frame)
        candidate = _mask_path(pred_root, seq, frame)
        if not current.is_file():
            offenders.append(f"{seq}/{frame}: pseudo-GT missing")
            continue
        if not candidate.is_file():
            offenders.append(f"{seq}/{frame}: prediction missing")
            continue
        expected = read_mask_png(current)
        try:
            predicted = read_mask_png(candidate)
        except Exception as exc:  # unreadable or non-binary content
            offenders.append(f"{seq}/{frame}: {exc}")
            continue
        if predicted.data.shape != expected.data.shape:
            offenders.append(
                f"{seq}/{frame}: dimensions {predicted.data.shape} != {expected.data.shape}"
            )
            continue
        adopted[(seq, frame)] = predicted
    if offenders:
        raise ExchangeError(
            f"{len(offenders)} invalid prediction(s): " + "; ".join(offenders[:5]),
            offenders=offenders,
        )

    next_masks = _round_dir(round_dir.parent, index + 1) / "masks"
    new_manifest = {}
    for key, mask in adopted.items():
        out = _mask_path(next_masks, *key)
        write_mask_png(out, mask)
        new_manifest[key] = out
    return new_manifest


def masks_changed_fraction(a: dict, b: dict) -> float:
    """Mean fraction of pixels that differ between two mask manifests."""
    total, differing = 0, 0
    for key, path in a.items():
        m1 = read_mask_png(path)
        m2 = read_mask_png(b[key])
        total += m1.data.size
        differing += int((m1.data != m2.data).sum())
    return differing / total if total else 0.0


__all__ = [
    "LinearProbe",
    "RoundState",
    "SelfTrainConfig",
    "bce_loss",
    "bce_gradient",
    "ensemble_vote",
    "evaluate_masks",
    "external_trainer_exchange",
    "fresh_probe",
    "load_probe",
    "masks_changed_fraction",
    "probe_predict",
    "run_round",
    "save_probe",
    "train_probe",
]
