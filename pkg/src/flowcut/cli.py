"""Command-line pipeline: segment, evaluate, selftrain, flow2rgb, ensemble.

Every run starts by writing a config snapshot next to its outputs and logs
one JSON line per frame, so runs are reproducible and machine-checkable.
Exit codes: 0 ok, 1 partial failure, 2 config error.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import flowviz
from .affinity import AffinityConfig, build_graph
from .errors import FlowcutError
from .maskpipe import CrfParams, crf_refine, patch_to_pixel
from .metrics import FrameScore, accuracy, aggregate, boundary_f, jaccard, max_f_beta
from .selftrain import (
    RoundState,
    SelfTrainConfig,
    ensemble_vote,
    evaluate_masks,
    external_trainer_exchange,
    masks_changed_fraction,
    run_round,
)
from .spectral import ncut_value, spectral_bipartition
from .tensor_io import (
    FRAME_AVERAGE,
    SEQUENCE_AVERAGE,
    DatasetManifest,
    load_manifest,
    read_frame_image,
    read_mask_png,
    read_npy,
    write_mask_png,
)

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2


@dataclass
class RunConfig:
    dataset_root: str = ""
    output_root: str = ""
    affinity: AffinityConfig = field(default_factory=AffinityConfig)
    crf: CrfParams = field(default_factory=CrfParams)
    use_crf: bool = False
    eig_tol: float = 1e-8
    corner_block: int = 1
    selftrain: SelfTrainConfig = field(default_factory=SelfTrainConfig)
    threads: int = 1
    seed: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _write_snapshot(cfg: RunConfig, out_root: Path) -> None:
    out_root.mkdir(parents=True, exist_ok=True)
    (out_root / "run_config.json").write_text(cfg.to_json())


class _JsonlLog:
    def __init__(self, path: Path):
        path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(path, "w")

    def write(self, **fields) -> None:
        self._fh.write(json.dumps(fields, sort_keys=True) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


# ---------------------------------------------------------------------------
# segment


def _segment_frame(manifest: DatasetManifest, cfg: RunConfig, seq: str, frame: str):
    app, flow = manifest.load_features(seq, frame)
    graph = build_graph(app, flow, cfg.affinity)
    part = spectral_bipartition(graph, tol=cfg.eig_tol, corner_block=cfg.corner_block)
    fg = part.foreground_labels
    try:
        ncut = ncut_value(graph, part.labels).value
    except FlowcutError:
        ncut = float("nan")
    mask = patch_to_pixel(
        fg,
        graph.grid_shape,
        app.patch_size,
        (app.image_height, app.image_width),
        source="graphcut",
    )
    if cfg.use_crf:
        image_path = manifest.frame_image_path(seq, frame)
        if image_path is not None:
            mask = crf_refine(mask, read_frame_image(image_path), cfg.crf)
    out = Path(cfg.output_root) / seq / f"{frame}.png"
    write_mask_png(out, mask)
    return ncut, part.eigenvalue


def cmd_segment(cfg: RunConfig) -> int:
    try:
        manifest = load_manifest(cfg.dataset_root)
    except FlowcutError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_root = Path(cfg.output_root)
    _write_snapshot(cfg, out_root)
    log = _JsonlLog(out_root / "segment_log.jsonl")
    failures = 0

    def work(item):
        seq, frame = item
        try:
            ncut, eigenvalue = _segment_frame(manifest, cfg, seq, frame)
            return seq, frame, ncut, eigenvalue, None
        except Exception as exc:
            return seq, frame, None, None, f"{type(exc).__name__}: {exc}"

    items = list(manifest.frames())
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(work, items))
    else:
        results = [work(item) for item in items]

    for seq, frame, ncut, eigenvalue, error in results:
        if error is None:
            log.write(event="frame", sequence=seq, frame=frame, ncut=ncut, eigenvalue=eigenvalue)
        else:
            failures += 1
            log.write(event="error", sequence=seq, frame=frame, error=error)
            print(f"frame {seq}/{frame} failed: {error}", file=sys.stderr)
    log.close()
    print(f"segmented {len(results) - failures}/{len(results)} frames -> {out_root}")
    return EXIT_OK if failures == 0 else EXIT_PARTIAL


# ---------------------------------------------------------------------------
# evaluate


def _mask_tree(root: Path) -> dict:
    out = {}
    for png in sorted(root.rglob("*.png")):
        rel = png.relative_to(root)
        if len(rel.parts) == 2:
            out[(rel.parts[0], png.stem)] = png
    return out


def cmd_evaluate(
    pred_dir: str, gt_dir: str, mode: str, out_file: str | None = None, with_max_f: bool = True
) -> int:
    gt = _mask_tree(Path(gt_dir))
    pred = _mask_tree(Path(pred_dir))
    if not gt:
        print(f"config error: no ground-truth masks under {gt_dir}", file=sys.stderr)
        return EXIT_CONFIG
    missing = sorted(set(gt) - set(pred))
    if missing:
        names = ", ".join(f"{s}/{f}" for s, f in missing[:10])
        print(f"error: {len(missing)} prediction(s) missing: {names}", file=sys.stderr)
        return EXIT_PARTIAL

    scores, max_fs = [], []
    for (seq, frame), gt_path in gt.items():
        g = read_mask_png(gt_path)
        p = read_mask_png(pred[(seq, frame)])
        scores.append(
            FrameScore(
                sequence=seq,
                frame=frame,
                jaccard=jaccard(p, g),
                boundary_f=boundary_f(p, g),
                accuracy=accuracy(p, g),
            )
        )
        if with_max_f:
            max_fs.append(max_f_beta(p.data.astype(np.float64), g))
    mode_name = SEQUENCE_AVERAGE if mode in ("seq", SEQUENCE_AVERAGE) else FRAME_AVERAGE
    report = aggregate(scores, mode_name, frame_max_f=max_fs or None)
    text = report.to_json()
    if out_file:
        Path(out_file).parent.mkdir(parents=True, exist_ok=True)
        Path(out_file).write_text(text)
    print(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# selftrain


def cmd_selftrain(cfg: RunConfig, rounds: int, external: bool = False) -> int:
    try:
        manifest = load_manifest(cfg.dataset_root)
    except FlowcutError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    run_root = Path(cfg.output_root)
    _write_snapshot(cfg, run_root)

    # Round 0: graph-cut masks are the first pseudo-GT.
    round0_cfg = replace(cfg, output_root=str(run_root / "round_0" / "masks"))
    status = cmd_segment(round0_cfg)
    if status == EXIT_CONFIG:
        return status
    manifest_map = {
        (seq, frame): run_root / "round_0" / "masks" / seq / f"{frame}.png"
        for seq, frame in manifest.frames()
    }
    state = RoundState(
        round=0,
        pseudo_gt_manifest=manifest_map,
        probe=None,
        metrics=evaluate_masks(manifest_map, manifest),
        seed=cfg.seed,
    )
    if state.metrics is not None:
        (run_root / "round_0" / "report.json").write_text(state.metrics.to_json())
        print(f"round 0 dataset_J={state.metrics.dataset_j:.4f}")

    for _ in range(rounds):
        previous = state.pseudo_gt_manifest
        if external:
            round_dir = run_root / f"round_{state.round}"
            try:
                new_map = external_trainer_exchange(round_dir, manifest)
            except FlowcutError as exc:
                print(f"external exchange failed: {exc}", file=sys.stderr)
                return EXIT_PARTIAL
            state = RoundState(
                round=state.round + 1,
                pseudo_gt_manifest=new_map,
                probe=None,
                metrics=evaluate_masks(new_map, manifest),
                seed=cfg.seed,
            )
            if state.metrics is not None:
                (run_root / f"round_{state.round}" / "report.json").write_text(
                    state.metrics.to_json()
                )
        else:
            state = run_round(state, manifest, cfg.selftrain, run_root)
        j = state.metrics.dataset_j if state.metrics else float("nan")
        changed = masks_changed_fraction(previous, state.pseudo_gt_manifest)
        print(f"round {state.round} dataset_J={j:.4f} changed={changed:.5f}")
        if changed < 0.001:
            print("masks stabilized; stopping early")
            break
    return EXIT_OK


# ---------------------------------------------------------------------------
# flow2rgb and ensemble


def cmd_flow2rgb(in_dir: str, out_dir: str, max_magnitude: float | None = None) -> int:
    in_root, out_root = Path(in_dir), Path(out_dir)
    files = sorted(in_root.rglob("*.npy"))
    if not files:
        print(f"config error: no flow arrays under {in_dir}", file=sys.stderr)
        return EXIT_CONFIG
    failures = 0
    for path in files:
        rel = path.relative_to(in_root).with_suffix(".png")
        try:
            flow = flowviz.FlowField.from_array(read_npy(path))
            rgb = flowviz.flow_to_rgb(flow, max_magnitude=max_magnitude)
            out = out_root / rel
            out.parent.mkdir(parents=True, exist_ok=True)
            from PIL import Image

            Image.fromarray(rgb, mode="RGB").save(out, format="PNG")
        except Exception as exc:
            failures += 1
            print(f"{path}: {type(exc).__name__}: {exc}", file=sys.stderr)
    print(f"converted {len(files) - failures}/{len(files)} flow fields -> {out_root}")
    return EXIT_OK if failures == 0 else EXIT_PARTIAL


def cmd_ensemble(inputs: list[str], out_dir: str) -> int:
    roots = [Path(p) for p in inputs]
    trees = [_mask_tree(r) for r in roots]
    keys = set(trees[0])
    for t in trees[1:]:
        keys &= set(t)
    if not keys:
        print("config error: input mask trees share no frames", file=sys.stderr)
        return EXIT_CONFIG
    out_root = Path(out_dir)
    for key in sorted(keys):
        masks = [read_mask_png(t[key]) for t in trees]
        voted = ensemble_vote(masks)
        write_mask_png(out_root / key[0] / f"{key[1]}.png", voted)
    print(f"voted {len(keys)} frames from {len(roots)} runs -> {out_root}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowcut", description=__doc__)
    parser.add_argument("--config", help="JSON file with RunConfig fields")
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    seg = sub.add_parser("segment", help="graph-cut masks for every frame")
    seg.add_argument("--dataset", required=True)
    seg.add_argument("--out", required=True)
    seg.add_argument("--alpha", type=float, default=None)
    seg.add_argument("--tau", type=float, default=None)
    seg.add_argument("--epsilon", type=float, default=None)
    seg.add_argument("--self-loops", dest="self_loops", action="store_true", default=None)
    seg.add_argument("--no-self-loops", dest="self_loops", action="store_false")
    seg.add_argument("--eig-tol", type=float, default=None)
    seg.add_argument("--corner-block", type=int, default=None)
    seg.add_argument("--crf", dest="use_crf", action="store_true", default=None)
    seg.add_argument("--no-crf", dest="use_crf", action="store_false")
    for name in ("iterations", "w-appearance", "w-smoothness"):
        seg.add_argument(f"--crf-{name}", type=float, default=None)
    for name in ("alpha", "beta", "gamma"):
        seg.add_argument(f"--crf-theta-{name}", type=float, default=None)

    ev = sub.add_parser("evaluate", help="score predicted masks against ground truth")
    ev.add_argument("--pred", required=True)
    ev.add_argument("--gt", required=True)
    ev.add_argument("--mode", choices=["seq", "frame"], default="frame")
    ev.add_argument("--out", default=None)
    ev.add_argument("--no-max-f", dest="with_max_f", action="store_false", default=True)

    st = sub.add_parser("selftrain", help="bootstrapped self-training rounds")
    st.add_argument("--dataset", required=True)
    st.add_argument("--out", required=True)
    st.add_argument("--rounds", type=int, default=3)
    st.add_argument("--lr", type=float, default=None)
    st.add_argument("--iters", type=int, default=None)
    st.add_argument("--resume", action="store_true", default=False)
    st.add_argument("--external", action="store_true", default=False)
    st.add_argument("--alpha", type=float, default=None)
    st.add_argument("--tau", type=float, default=None)
    st.add_argument("--epsilon", type=float, default=None)
    st.add_argument("--crf", dest="use_crf", action="store_true", default=None)

    fl = sub.add_parser("flow2rgb", help="render flow arrays as color-wheel PNGs")
    fl.add_argument("--in", dest="in_dir", required=True)
    fl.add_argument("--out", required=True)
    fl.add_argument("--max-magnitude", type=float, default=None)

    en = sub.add_parser("ensemble", help="pixelwise majority vote over mask trees")
    en.add_argument("--inputs", required=True, help="comma-separated mask directories")
    en.add_argument("--out", required=True)
    return parser


def _load_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        raw = json.loads(Path(args.config).read_text())
        cfg = RunConfig(
            dataset_root=raw.get("dataset_root", ""),
            output_root=raw.get("output_root", ""),
            affinity=AffinityConfig(**raw.get("affinity", {})),
            crf=CrfParams(**raw.get("crf", {})),
            use_crf=raw.get("use_crf", False),
            eig_tol=raw.get("eig_tol", 1e-8),
            corner_block=raw.get("corner_block", 1),
            selftrain=SelfTrainConfig(**raw.get("selftrain", {})),
            threads=raw.get("threads", 1),
            seed=raw.get("seed", 0),
        )
    if args.threads is not None:
        cfg.threads = args.threads
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _override_affinity(cfg: RunConfig, args) -> None:
    kv = {}
    for name in ("alpha", "tau", "epsilon", "self_loops"):
        value = getattr(args, name, None)
        if value is not None:
            kv[name] = value
    if kv:
        cfg.affinity = AffinityConfig(**{**asdict(cfg.affinity), **kv})


def _override_crf(cfg: RunConfig, args) -> None:
    mapping = {
        "crf_iterations": "iterations",
        "crf_w_appearance": "w_appearance",
        "crf_w_smoothness": "w_smoothness",
        "crf_theta_alpha": "theta_alpha",
        "crf_theta_beta": "theta_beta",
        "crf_theta_gamma": "theta_gamma",
    }
    kv = {}
    for arg_name, field_name in mapping.items():
        value = getattr(args, arg_name, None)
        if value is not None:
            kv[field_name] = int(value) if field_name == "iterations" else value
    if kv:
        cfg.crf = CrfParams(**{**asdict(cfg.crf), **kv})
    if getattr(args, "use_crf", None) is not None:
        cfg.use_crf = args.use_crf


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "segment":
            cfg = _load_config(args)
            cfg.dataset_root = args.dataset
            cfg.output_root = args.out
            _override_affinity(cfg, args)
            _override_crf(cfg, args)
            if args.eig_tol is not None:
                cfg.eig_tol = args.eig_tol
            if args.corner_block is not None:
                cfg.corner_block = args.corner_block
            return cmd_segment(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(args.pred, args.gt, args.mode, args.out, args.with_max_f)
        if args.command == "selftrain":
            cfg = _load_config(args)
            cfg.dataset_root = args.dataset
            cfg.output_root = args.out
            _override_affinity(cfg, args)
            _override_crf(cfg, args)
            st_kv = {}
            if args.lr is not None:
                st_kv["lr"] = args.lr
            if args.iters is not None:
                st_kv["iterations"] = args.iters
            if args.resume:
                st_kv["resume"] = True
            if st_kv:
                cfg.selftrain = SelfTrainConfig(**{**asdict(cfg.selftrain), **st_kv})
            return cmd_selftrain(cfg, rounds=args.rounds, external=args.external)
        if args.command == "flow2rgb":
            return cmd_flow2rgb(args.in_dir, args.out, args.max_magnitude)
        if args.command == "ensemble":
            return cmd_ensemble(args.inputs.split(","), args.out)
    except FlowcutError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception:
        traceback.print_exc()
        return EXIT_PARTIAL
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
