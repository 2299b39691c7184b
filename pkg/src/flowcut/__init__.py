"""Flow-guided normalized-cut video object segmentation.

Per-frame appearance and flow feature grids become a thresholded patch
affinity graph, whose second generalized eigenvector yields a foreground /
background split; the resulting masks are refined with a dense CRF, scored
against ground truth, and improved through bootstrapped self-training.
"""

from .affinity import AffinityConfig, AffinityGraph, build_graph, combined_similarity, cosine_similarity
from .flowviz import FlowField, flow_to_rgb, make_colorwheel, pair_frames
from .maskpipe import CrfParams, crf_refine, patch_to_pixel, pixel_to_patch_majority
from .metrics import EvalReport, aggregate, boundary_f, jaccard, max_f_beta, merge_masks
from .selftrain import (
    LinearProbe,
    RoundState,
    SelfTrainConfig,
    bce_loss,
    ensemble_vote,
    probe_predict,
    run_round,
    train_probe,
)
from .spectral import (
    EigenBipartition,
    NcutValue,
    bipartition,
    ncut_value,
    select_foreground,
    solve_second_eigenpair,
    spectral_bipartition,
)
from .tensor_io import (
    DatasetManifest,
    FeatureGrid,
    PixelMask,
    load_manifest,
    read_array,
    read_npy,
    write_array,
    write_npy,
)

__version__ = "0.1.0"

__all__ = [
    "AffinityConfig",
    "AffinityGraph",
    "CrfParams",
    "DatasetManifest",
    "EigenBipartition",
    "EvalReport",
    "FeatureGrid",
    "FlowField",
    "LinearProbe",
    "NcutValue",
    "PixelMask",
    "RoundState",
    "SelfTrainConfig",
    "aggregate",
    "bce_loss",
    "bipartition",
    "boundary_f",
    "build_graph",
    "combined_similarity",
    "cosine_similarity",
    "crf_refine",
    "ensemble_vote",
    "flow_to_rgb",
    "jaccard",
    "load_manifest",
    "make_colorwheel",
    "max_f_beta",
    "merge_masks",
    "ncut_value",
    "pair_frames",
    "patch_to_pixel",
    "pixel_to_patch_majority",
    "probe_predict",
    "read_array",
    "read_npy",
    "run_round",
    "select_foreground",
    "solve_second_eigenpair",
    "spectral_bipartition",
    "train_probe",
    "write_array",
    "write_npy",
]
