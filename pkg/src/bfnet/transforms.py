"""Exact O(N^2) reference 2D discrete Fourier transforms.

Conventions used across the package: time samples live on the uniform grid
t = (i/nx, j/ny) of [0,1)^2, frequencies are the integers
xi in [0, kx_max) x [0, ky_max).  The forward transform is unnormalized,

    u(xi) = sum_t exp(-2 pi i xi . t) x(t),

and the inverse carries 1/(kx_max*ky_max) so a forward/inverse round trip
at matching sizes is the identity.  No FFT is used anywhere; these are the
ground-truth oracles the butterfly approximation is measured against.
"""

from __future__ import annotations

import numpy as np


def _axis_kernel(n_grid: int, k_extent: int, sign: float) -> np.ndarray:
    """(k_extent, n_grid) matrix exp(sign * 2 pi i * k * g / n_grid)."""
    k = np.arange(k_extent)[:, None]
    g = np.arange(n_grid)[None, :]
    return np.exp(sign * 2j * np.pi * k * g / n_grid)


def dft2d_exact(x: np.ndarray, out_shape: tuple[int, int]) -> np.ndarray:
    """Forward transform of an (nx, ny) array onto integer frequencies.

    Returns a complex (kx_max, ky_max) array for ``out_shape`` =
    (kx_max, ky_max).  Evaluated as the literal double sum, factored over
    the two axes.
    """
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise ValueError(f"expected a 2D grid signal, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("grid signal contains non-finite values")
    ex = _axis_kernel(x.shape[0], out_shape[0], -1.0)
    ey = _axis_kernel(x.shape[1], out_shape[1], -1.0)
    return ex @ np.asarray(x, dtype=np.complex128) @ ey.T


def idft2d_exact(u: np.ndarray, out_shape: tuple[int, int]) -> np.ndarray:
    """Inverse transform of a (kx_max, ky_max) frequency array.

    Returns the complex (nx, ny) grid signal
    x(t) = (1/(kx_max*ky_max)) sum_xi exp(+2 pi i xi . t) u(xi).
    """
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] < 1 or u.shape[1] < 1:
        raise ValueError(f"expected a 2D frequency signal, got shape {u.shape}")
    if not np.all(np.isfinite(u)):
        raise ValueError("frequency signal contains non-finite values")
    nx, ny = out_shape
    fx = _axis_kernel(nx, u.shape[0], +1.0).T  # (nx, kx_max)
    fy = _axis_kernel(ny, u.shape[1], +1.0).T
    return (fx @ np.asarray(u, dtype=np.complex128) @ fy.T) / (u.shape[0] * u.shape[1])


def fourier_matrix(in_shape: tuple[int, int], out_shape: tuple[int, int],
                   inverse: bool = False) -> np.ndarray:
    """Dense operator matrix matching the transform orientation above.

    Rows index the flattened (row-major) output grid, columns the flattened
    input grid.  ``inverse`` flips the kernel sign and applies the
    1/(output size) normalization, matching :func:`idft2d_exact` on square
    problems.
    """
    sign = +1.0 if inverse else -1.0
    ex = _axis_kernel(in_shape[0], out_shape[0], sign)
    ey = _axis_kernel(in_shape[1], out_shape[1], sign)
    mat = np.kron(ex, ey)
    if inverse:
        mat /= out_shape[0] * out_shape[1]
    return mat
