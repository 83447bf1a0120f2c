"""Chebyshev nodes on [-1/2, 1/2] and Lagrange interpolation in 1D/2D."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChebGrid:
    """Chebyshev nodes of order ``r`` on the reference interval [-1/2, 1/2].

    Nodes are stored in their native order z_i = cos((2i+1)pi/(2r))/2,
    i = 0..r-1, which is strictly decreasing.  Every channel ordering in
    the package derives from this single ordering.
    """

    r: int
    points1d: np.ndarray

    def __post_init__(self):
        if self.r < 1:
            raise ValueError(f"Chebyshev order must be >= 1, got {self.r}")
        if self.points1d.shape != (self.r,):
            raise ValueError("points1d shape inconsistent with order")


def cheb_points(r: int) -> ChebGrid:
    """Return the order-``r`` Chebyshev grid on [-1/2, 1/2]."""
    if r < 1:
        raise ValueError(f"Chebyshev order must be >= 1, got {r}")
    i = np.arange(r)
    pts = 0.5 * np.cos((2 * i + 1) * np.pi / (2 * r))
    return ChebGrid(r=r, points1d=pts)


def lagrange_eval(grid: ChebGrid, k: int, x: float) -> float:
    """Evaluate the k-th Lagrange cardinal polynomial of ``grid`` at ``x``.

    ``x`` may lie outside [-1/2, 1/2]; the recursion between resolution
    levels evaluates child nodes in the parent frame, which exceeds the
    reference interval.
    """
    if not 0 <= k < grid.r:
        raise ValueError(f"node index {k} out of range for order {grid.r}")
    z = grid.points1d
    num = 1.0
    den = 1.0
    for p in range(grid.r):
        if p == k:
            continue
        num *= x - z[p]
        den *= z[k] - z[p]
    return num / den


def lagrange2d_eval(grid: ChebGrid, kx: int, ky: int, x: float, y: float) -> float:
    """Tensor-product cardinal polynomial L_kx(x) * L_ky(y)."""
    return lagrange_eval(grid, kx, x) * lagrange_eval(grid, ky, y)


def lagrange_matrix(grid: ChebGrid, x: np.ndarray) -> np.ndarray:
    """Vectorized cardinal values, shape (len(x), r) with [j, k] = L_k(x_j)."""
    x = np.asarray(x, dtype=np.float64)
    z = grid.points1d
    d = x[:, None] - z[None, :]  # (m, r)
    out = np.empty((x.shape[0], grid.r))
    for k in range(grid.r):
        mask = np.arange(grid.r) != k
        den = np.prod(z[k] - z[mask])
        out[:, k] = np.prod(d[:, mask], axis=1) / den
    return out
