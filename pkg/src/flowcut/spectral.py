"""Spectral bipartition of the patch graph.

The normalized-cut relaxation asks for the second-smallest eigenpair of the
generalized problem (D - W) y = lambda D y. We solve it through the
symmetric substitution z = D^{1/2} y, i.e. on the normalized Laplacian
D^{-1/2} (D - W) D^{-1/2}, with the analytically known trivial eigenvector
deflated explicitly, then split nodes at the mean of the eigenvector and
choose the foreground side heuristically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .affinity import AffinityGraph
from .errors import ConvergenceError, DegeneratePartition

DEFAULT_TOL = 1e-8

# Deflation shift; safely above the normalized Laplacian's spectrum ([0, 2]).
_DEFLATION_SHIFT = 3.0


@dataclass
class HeuristicTrace:
    """How the foreground side was decided, for inspection and logging."""

    argmax_index: int
    argmax_on_high_side: bool
    corners_on_proposed_side: int
    vetoed: bool


@dataclass
class EigenBipartition:
    """Second generalized eigenpair and the labels derived from it.

    ``labels`` marks the high side (eigenvector component >= mean) with 1;
    ``foreground_labels`` applies the foreground heuristics on top.
    """

    eigenvector: np.ndarray
    eigenvalue: float
    mean: float
    labels: np.ndarray
    foreground_is_high_side: bool
    heuristic_trace: HeuristicTrace

    @property
    def foreground_labels(self) -> np.ndarray:
        if self.foreground_is_high_side:
            return self.labels.copy()
        return (1 - self.labels).astype(np.uint8)


@dataclass
class NcutValue:
    value: float


def solve_second_eigenpair(
    g: AffinityGraph, tol: float = DEFAULT_TOL, maxiter: int | None = None
) -> tuple[float, np.ndarray]:
    """Second-smallest eigenpair of (D - W) y = lambda D y.

    Uses shift-free implicitly-restarted Lanczos on the symmetric normalized
    Laplacian with the trivial eigenvector deflated, then back-transforms
    z -> y = D^{-1/2} z. The result satisfies
    ||(D - W) y - lambda D y|| <= tol * ||D y||, else ConvergenceError.
    The eigenvector is unit-norm with its largest-magnitude entry positive.
    """
    w = np.asarray(g.weights, dtype=np.float64)
    n = w.shape[0]
    d = w.sum(axis=1)
    if np.any(d <= 0):
        raise ConvergenceError("graph has non-positive degrees; epsilon floor missing?")
    d_isqrt = 1.0 / np.sqrt(d)
    z0 = np.sqrt(d)
    z0 /= np.linalg.norm(z0)

    def matvec(z):
        # L_sym z + shift * (z0 . z) z0, with L_sym = I - D^-1/2 W D^-1/2.
        y = d_isqrt * z
        out = z - d_isqrt * (w @ y)
        return out + _DEFLATION_SHIFT * np.dot(z0, z) * z0

    op = spla.LinearOperator((n, n), matvec=matvec, dtype=np.float64)
    if maxiter is None:
        maxiter = max(10 * n, 1000)
    rng = np.random.default_rng(0)
    v0 = rng.standard_normal(n)
    try:
        vals, vecs = spla.eigsh(op, k=1, which="SA", tol=0, maxiter=maxiter, v0=v0)
    except spla.ArpackNoConvergence as exc:
        best = None
        if exc.eigenvalues is not None and len(exc.eigenvalues):
            z = exc.eigenvectors[:, 0]
            y = d_isqrt * z
            lam = float(exc.eigenvalues[0]) - _DEFLATION_SHIFT * float(np.dot(z0, z)) ** 2
            best = float(np.linalg.norm(d * y - w @ y - lam * d * y))
        raise ConvergenceError(
            f"eigensolver did not converge within {maxiter} iterations", best_residual=best
        ) from exc

    z = vecs[:, 0]
    # Re-project: the deflated direction only cancels to solver precision.
    z = z - np.dot(z0, z) * z0
    z /= np.linalg.norm(z)
    y = d_isqrt * z
    y /= np.linalg.norm(y)
    if y[np.argmax(np.abs(y))] < 0:
        y = -y
    lam = float(y @ (d * y) - y @ (w @ y)) / float(y @ (d * y))

    residual = np.linalg.norm(d * y - w @ y - lam * d * y)
    bound = tol * np.linalg.norm(d * y)
    if residual > bound:
        raise ConvergenceError(
            f"residual {residual:.3e} exceeds tolerance bound {bound:.3e}",
            best_residual=float(residual),
        )
    return lam, y


def bipartition(y1: np.ndarray) -> tuple[float, np.ndarray]:
    """Split nodes at the arithmetic mean of the eigenvector.

    The high side (label 1) is every component >= mean, so a constant vector
    degenerates to all-ones.
    """
    y1 = np.asarray(y1, dtype=np.float64)
    if y1.size == 0:
        raise DegeneratePartition("cannot bipartition an empty eigenvector")
    mean = float(y1.mean())
    labels = (y1 >= mean).astype(np.uint8)
    return mean, labels


def _corner_indices(rows: int, cols: int, block: int) -> list[np.ndarray]:
    block = max(1, min(block, rows, cols))
    top, bottom = np.arange(block), np.arange(rows - block, rows)
    left, right = np.arange(block), np.arange(cols - block, cols)
    corners = []
    for rr, cc in ((top, left), (top, right), (bottom, left), (bottom, right)):
        idx = (rr[:, None] * cols + cc[None, :]).ravel()
        corners.append(idx)
    return corners


def select_foreground(
    y1: np.ndarray,
    labels: np.ndarray,
    grid: tuple[int, int],
    corner_block: int = 1,
) -> tuple[np.ndarray, HeuristicTrace]:
    """Decide which bipartition side is the foreground.

    The side holding the largest-magnitude eigenvector entry is proposed
    (salient objects dominate the spectrum); if that side occupies two or
    more of the four grid corners it is vetoed and the other side wins.
    A corner counts as occupied when more than half of its block of patches
    sits on the proposed side.
    """
    rows, cols = grid
    y1 = np.asarray(y1, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.uint8)
    if rows * cols != y1.size or y1.size != labels.size:
        raise DegeneratePartition(f"grid {rows}x{cols} inconsistent with vector size {y1.size}")

    argmax_index = int(np.argmax(np.abs(y1)))
    proposed_high = bool(labels[argmax_index])
    proposed_mask = labels.astype(bool) if proposed_high else ~labels.astype(bool)

    occupied = 0
    for idx in _corner_indices(rows, cols, corner_block):
        if proposed_mask[idx].sum() * 2 > idx.size:
            occupied += 1
    vetoed = occupied >= 2
    foreground_is_high_side = proposed_high ^ vetoed

    fg = labels.copy() if foreground_is_high_side else (1 - labels).astype(np.uint8)
    trace = HeuristicTrace(
        argmax_index=argmax_index,
        argmax_on_high_side=proposed_high,
        corners_on_proposed_side=occupied,
        vetoed=vetoed,
    )
    return fg, trace


def ncut_value(g: AffinityGraph, labels: np.ndarray) -> NcutValue:
    """Evaluate the normalized-cut objective of a labeling.

    cut(P,Q)/assoc(P,V) + cut(P,Q)/assoc(Q,V) with cut and assoc summed over
    ordered node pairs of the weight matrix.
    """
    labels = np.asarray(labels).astype(bool)
    w = np.asarray(g.weights, dtype=np.float64)
    if labels.all() or not labels.any():
        raise DegeneratePartition("both sides of the partition must be nonempty")
    p, q = labels, ~labels
    cut = float(w[np.ix_(p, q)].sum())
    assoc_p = float(w[p, :].sum())
    assoc_q = float(w[q, :].sum())
    return NcutValue(value=cut / assoc_p + cut / assoc_q)


def spectral_bipartition(
    g: AffinityGraph,
    tol: float = DEFAULT_TOL,
    corner_block: int = 1,
) -> EigenBipartition:
    """Solve, split at the mean, and pick the foreground side."""
    lam, y1 = solve_second_eigenpair(g, tol=tol)
    mean, labels = bipartition(y1)
    _, trace = select_foreground(y1, labels, g.grid_shape, corner_block=corner_block)
    foreground_is_high_side = trace.argmax_on_high_side ^ trace.vetoed
    return EigenBipartition(
        eigenvector=y1,
        eigenvalue=lam,
        mean=mean,
        labels=labels,
        foreground_is_high_side=foreground_is_high_side,
        heuristic_trace=trace,
    )
