"""Dataset selection: farthest-point sampling, error ranking, 2D projection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SelectionResult",
    "Projection2D",
    "farthest_point_sample",
    "max_error_select",
    "rank_errors",
    "pca_project",
    "write_index_list",
    "write_projection_csv",
]


@dataclass
class SelectionResult:
    """FPS outcome: indices in acceptance order plus the complement."""

    selected: list[int]
    rejected: list[int]
    min_achieved_distance: float = math.inf


@dataclass
class Projection2D:
    coords: np.ndarray
    explained_variance: np.ndarray
    component_axes: np.ndarray


def farthest_point_sample(
    points,
    max_count: int,
    min_distance: float = 0.0,
    seed_index: int | None = None,
    base=None,
) -> SelectionResult:
    """Greedy farthest-point sampling in Euclidean descriptor space.

    Starting from the seed (default: the point farthest from the candidate
    mean), repeatedly accept the candidate maximizing the distance to the
    selected set; stop once ``max_count`` points are selected or the best
    remaining distance falls below ``min_distance``.  Ties break toward the
    lowest index.  When ``base`` is given the selected set is initialized to
    those anchor points (only candidates remain selectable) and no default
    seed is forced.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise ValueError("points must be a nonempty M x D matrix")
    m = pts.shape[0]
    if max_count < 0:
        raise ValueError(f"max_count must be >= 0, got {max_count}")
    if min_distance < 0:
        raise ValueError(f"min_distance must be >= 0, got {min_distance}")

    # squared distances throughout: monotone in the metric, cheaper, and free
    # of sqrt rounding in the argmax
    if base is not None and len(base) > 0:
        anchors = np.asarray(base, dtype=float)
        if anchors.ndim != 2 or anchors.shape[1] != pts.shape[1]:
            raise ValueError(
                f"base dimension {getattr(anchors, 'shape', None)} does not match "
                f"candidate dimension {pts.shape[1]}"
            )
        d2 = np.full(m, np.inf)
        for row in anchors:
            delta = pts - row
            d2 = np.minimum(d2, np.einsum("ij,ij->i", delta, delta))
    else:
        d2 = np.full(m, np.inf)

    available = np.ones(m, dtype=bool)
    selected: list[int] = []
    min_d2 = min_distance * min_distance
    last_accept_d2 = math.inf

    def accept(idx: int):
        nonlocal last_accept_d2
        last_accept_d2 = d2[idx]
        selected.append(idx)
        available[idx] = False
        delta = pts - pts[idx]
        np.minimum(d2, np.einsum("ij,ij->i", delta, delta), out=d2)

    if max_count > 0 and seed_index is not None:
        if not 0 <= seed_index < m:
            raise ValueError(f"seed index {seed_index} out of range for {m} points")
        accept(seed_index)
    elif max_count > 0 and (base is None or len(base) == 0):
        centered = pts - pts.mean(axis=0)
        accept(int(np.argmax(np.einsum("ij,ij->i", centered, centered))))

    while len(selected) < max_count and available.any():
        masked = np.where(available, d2, -np.inf)
        best = int(np.argmax(masked))
        if masked[best] < min_d2:
            break
        accept(best)

    rejected = [i for i in range(m) if available[i]]
    min_achieved = math.sqrt(last_accept_d2) if selected else math.inf
    return SelectionResult(selected=selected, rejected=rejected,
                           min_achieved_distance=min_achieved)


def rank_errors(errors, n: int) -> list[int]:
    """Indices of the n largest error values, descending, ties by lowest index."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    e = np.asarray(errors, dtype=float).reshape(-1)
    order = np.argsort(-e, kind="stable")
    return [int(i) for i in order[: min(n, e.size)]]


def max_error_select(pred, ref, n: int) -> list[int]:
    """Top-n row indices by summed absolute error between two M x C matrices."""
    p = np.atleast_2d(np.asarray(pred, dtype=float))
    r = np.atleast_2d(np.asarray(ref, dtype=float))
    if p.shape != r.shape:
        raise ValueError(f"shape mismatch: pred {p.shape} vs ref {r.shape}")
    return rank_errors(np.abs(p - r).sum(axis=1), n)


def write_index_list(indices, path) -> None:
    """One index per line; the exchange format for selection results."""
    from pathlib import Path

    Path(path).write_text("".join(f"{int(i)}\n" for i in indices))


def write_projection_csv(projection: "Projection2D", path) -> None:
    """CSV rows ``frame,pc1,pc2`` of a 2D projection."""
    from pathlib import Path

    lines = ["frame,pc1,pc2"]
    for k, (x, y) in enumerate(projection.coords):
        lines.append(f"{k},{x:.10g},{y:.10g}")
    Path(path).write_text("\n".join(lines) + "\n")


def pca_project(points) -> Projection2D:
    """Project onto the top-2 principal axes of the sample covariance.

    The sign of each axis is fixed by making its largest-magnitude
    coefficient positive, so repeated runs produce identical plots.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("PCA needs at least two points")
    if x.shape[1] < 2:
        raise ValueError("PCA needs at least two feature dimensions")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / (x.shape[0] - 1)
    evals, evecs = np.linalg.eigh(cov)
    axes = []
    variances = []
    for k in (-1, -2):
        axis = evecs[:, k]
        lead = np.argmax(np.abs(axis))
        if axis[lead] < 0:
            axis = -axis
        axes.append(axis)
        variances.append(max(float(evals[k]), 0.0))
    component_axes = np.array(axes)
    return Projection2D(
        coords=centered @ component_axes.T,
        explained_variance=np.array(variances),
        component_axes=component_axes,
    )
