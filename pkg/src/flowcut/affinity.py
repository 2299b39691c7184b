"""Patch graph construction from appearance and flow features.

Edge weights combine the cosine similarity of appearance features with the
cosine similarity of flow features, weighted ``alpha : 1 - alpha``, then get
snapped to 1 (similar enough) or a small ``epsilon`` floor (everything else).
The floor keeps the graph connected so every node has positive degree.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFeature, ShapeError
from .tensor_io import APPEARANCE, FLOW, FeatureGrid

DEFAULT_ALPHA = 0.7
DEFAULT_TAU = 0.25
DEFAULT_EPSILON = 1e-5


@dataclass(frozen=True)
class AffinityConfig:
    """Graph construction knobs; defaults reproduce the headline setting."""

    alpha: float = DEFAULT_ALPHA
    tau: float = DEFAULT_TAU
    epsilon: float = DEFAULT_EPSILON
    self_loops: bool = True
    dtype: str = "float32"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0,1], got {self.alpha}")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must be in [0,1], got {self.tau}")
        if self.tau > 0 and not 0.0 < self.epsilon < self.tau:
            raise ValueError(f"need 0 < epsilon < tau, got epsilon={self.epsilon} tau={self.tau}")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype}")


@dataclass
class AffinityGraph:
    """Dense symmetric weight matrix over the patch grid plus node degrees."""

    weights: np.ndarray
    degrees: np.ndarray
    grid_shape: tuple[int, int]

    @property
    def n(self) -> int:
        return self.weights.shape[0]


def cosine_similarity(x: np.ndarray, y: np.ndarray) -> float:
    """Cosine of the angle between two feature vectors, in [-1, 1]."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    nx = np.linalg.norm(x)
    ny = np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        raise DegenerateFeature("cosine similarity of a zero-norm vector is undefined")
    return float(np.dot(x, y) / (nx * ny))


def combined_similarity(
    app_i: np.ndarray,
    app_j: np.ndarray,
    flow_i: np.ndarray,
    flow_j: np.ndarray,
    alpha: float = DEFAULT_ALPHA,
) -> float:
    """Linear blend of appearance and flow cosine similarities.

    ``alpha = 1`` reduces to appearance-only, ``alpha = 0`` to flow-only;
    the unused pair of vectors is not touched at the endpoints.
    """
    if alpha == 1.0:
        return cosine_similarity(app_i, app_j)
    if alpha == 0.0:
        return cosine_similarity(flow_i, flow_j)
    return alpha * cosine_similarity(app_i, app_j) + (1.0 - alpha) * cosine_similarity(
        flow_i, flow_j
    )


def _unit_rows(vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Zero-norm rows become zero vectors; the caller masks them to epsilon.
    norms = np.linalg.norm(vectors, axis=1)
    degenerate = norms == 0.0
    safe = np.where(degenerate, 1.0, norms)
    return vectors / safe[:, None], degenerate


def build_graph(app: FeatureGrid, flow: FeatureGrid, cfg: AffinityConfig) -> AffinityGraph:
    """Build the fully connected thresholded patch graph of one frame.

    Off-diagonal weights are 1 where the combined similarity reaches
    ``cfg.tau`` and ``cfg.epsilon`` otherwise; the diagonal is 1 or 0 per
    ``cfg.self_loops``. Patches whose feature vector has zero norm (static
    scenes can produce these in the flow grid) get epsilon edges and a
    warning instead of aborting the frame.
    """
    if (app.rows, app.cols) != (flow.rows, flow.cols):
        raise ShapeError(
            f"appearance grid {app.rows}x{app.cols} vs flow grid {flow.rows}x{flow.cols}"
        )
    if app.kind != APPEARANCE or flow.kind != FLOW:
        raise ShapeError(f"expected kinds ({APPEARANCE}, {FLOW}), got ({app.kind}, {flow.kind})")

    n = app.n_patches
    alpha = cfg.alpha
    similarity = np.zeros((n, n), dtype=np.float64)
    degenerate = np.zeros(n, dtype=bool)
    if alpha > 0.0:
        unit, bad = _unit_rows(app.vectors().astype(np.float64))
        similarity += alpha * (unit @ unit.T)
        degenerate |= bad
    if alpha < 1.0:
        unit, bad = _unit_rows(flow.vectors().astype(np.float64))
        similarity += (1.0 - alpha) * (unit @ unit.T)
        degenerate |= bad
    # Exact symmetry regardless of BLAS blocking.
    similarity = (similarity + similarity.T) * 0.5

    keep = similarity >= cfg.tau
    if degenerate.any():
        warnings.warn(
            f"{int(degenerate.sum())} patches have zero-norm features; "
            "their edges fall back to the epsilon floor",
            stacklevel=2,
        )
        keep[degenerate, :] = False
        keep[:, degenerate] = False

    dtype = np.dtype(cfg.dtype)
    weights = np.where(keep, dtype.type(1.0), dtype.type(cfg.epsilon))
    np.fill_diagonal(weights, dtype.type(1.0 if cfg.self_loops else 0.0))
    degrees = weights.sum(axis=1)
    return AffinityGraph(weights=weights, degrees=degrees, grid_shape=(app.rows, app.cols))
