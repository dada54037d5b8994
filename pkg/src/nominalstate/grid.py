"""Rectangular (K, R) state grids with nearest-node or multilinear projection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

PROJECTIONS = ("multilinear", "nearest")


class GridError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class StateGrid:
    """Tensor grid over capacity x recognition.

    Nodes are ordered capacity-major: node ``i * len(r_axis) + j`` sits at
    ``(k_axis[i], r_axis[j])``. Points outside the bounds are clamped.
    """

    k_axis: np.ndarray
    r_axis: np.ndarray
    projection: str = "multilinear"

    def __post_init__(self):
        for name in ("k_axis", "r_axis"):
            ax = np.asarray(getattr(self, name), dtype=float)
            if ax.ndim != 1 or ax.size == 0:
                raise GridError(f"{name} needs at least one node")
            if not np.all(np.isfinite(ax)):
                raise GridError(f"{name} must be finite")
            if np.any(np.diff(ax) <= 0):
                raise GridError(f"{name} must be strictly increasing")
            ax.setflags(write=False)
            object.__setattr__(self, name, ax)
        if self.projection not in PROJECTIONS:
            raise GridError(f"projection must be one of {PROJECTIONS}, got {self.projection!r}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.k_axis.size, self.r_axis.size)

    @property
    def size(self) -> int:
        return self.k_axis.size * self.r_axis.size

    @property
    def nodes(self) -> np.ndarray:
        kk, rr = np.meshgrid(self.k_axis, self.r_axis, indexing="ij")
        return np.column_stack([kk.ravel(), rr.ravel()])

    def index(self, i: int, j: int) -> int:
        return i * self.r_axis.size + j

    def with_projection(self, projection: str) -> "StateGrid":
        return StateGrid(self.k_axis, self.r_axis, projection)

    def weights(self, points: np.ndarray) -> sparse.csr_matrix:
        """Sparse ``(len(points), size)`` matrix; each row is a convex combination of nodes."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        ik, wk = _axis_weights(self.k_axis, points[:, 0], self.projection)
        ir, wr = _axis_weights(self.r_axis, points[:, 1], self.projection)
        m = points.shape[0]
        rows, cols, vals = [], [], []
        for a in range(ik.shape[1]):
            for b in range(ir.shape[1]):
                rows.append(np.arange(m))
                cols.append(ik[:, a] * self.r_axis.size + ir[:, b])
                vals.append(wk[:, a] * wr[:, b])
        mat = sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(m, self.size),
        )
        mat.sum_duplicates()
        mat.eliminate_zeros()
        return mat

    def interpolate(self, values: np.ndarray, points: np.ndarray) -> np.ndarray:
        return self.weights(points) @ np.asarray(values)


def _axis_weights(axis: np.ndarray, x: np.ndarray, projection: str):
    n = axis.size
    if n == 1:
        return np.zeros((x.size, 1), dtype=int), np.ones((x.size, 1))
    x = np.clip(x, axis[0], axis[-1])
    hi = np.clip(np.searchsorted(axis, x, side="right"), 1, n - 1)
    lo = hi - 1
    t = (x - axis[lo]) / (axis[hi] - axis[lo])
    if projection == "nearest":
        # exact midpoints resolve to the lower node
        idx = np.where(t > 0.5, hi, lo)
        return idx[:, None], np.ones((x.size, 1))
    return np.column_stack([lo, hi]), np.column_stack([1.0 - t, t])


def build_grid(
    capacity_bounds: tuple[float, float],
    recognition_bounds: tuple[float, float],
    nodes: tuple[int, int],
    projection: str = "multilinear",
) -> StateGrid:
    """Uniform grid; a single-node axis sits at its lower bound."""
    axes = []
    for (lo, hi), n, label in zip(
        (capacity_bounds, recognition_bounds), nodes, ("capacity", "recognition")
    ):
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise GridError(f"{label} bounds must be finite")
        if int(n) != n or n < 1:
            raise GridError(f"{label} axis needs a positive integer node count, got {n!r}")
        if n == 1:
            axes.append(np.array([float(lo)]))
            continue
        if not lo < hi:
            raise GridError(f"{label} bounds must satisfy lower < upper")
        axes.append(np.linspace(lo, hi, int(n)))
    return StateGrid(axes[0], axes[1], projection)
