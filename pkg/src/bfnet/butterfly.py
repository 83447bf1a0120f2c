"""Three-stage butterfly factorization of the 2D Fourier kernel.

The transform u(xi) = sum_t exp(-2 pi i xi . t) x(t) over t on a uniform
grid of [0,1)^2 and integer xi in [0,Kx) x [0,Ky) is approximated in three
stages over an L-level quadtree pair:

1. interpolation: per leaf time box, transfer the omega_x x omega_y grid
   samples onto r^2 Chebyshev nodes, one coefficient set per coarse
   frequency box (2x2 of them);
2. recursion (L-1 rounds): merge four sibling time boxes into their parent
   while splitting each frequency box into four children, re-interpolating
   coefficients onto the parent's Chebyshev nodes;
3. kernel application: evaluate the Fourier kernel at the root time box's
   Chebyshev nodes for the frequencies inside each of the 4^L finest
   frequency boxes.

All coefficient transfers factor over the x/y axes, and the per-axis
factors built here are shared with the network's structured initialization.
The per-stage transfer depends on the frequency-box center but not on which
time box is processed, which is what makes the whole scheme a stack of
(sparse-channel) convolutions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chebyshev import cheb_points, lagrange_matrix
from .domains import box_cheb_points, box_frame


@dataclass
class CoefficientTensor:
    """Butterfly expansion coefficients after ``level`` completed stages.

    ``lam`` has shape (Ax, Ay, Bx, By, r, r): frequency-box index pair,
    time-box index pair, Chebyshev node index pair.  After stage 0 the
    frequency grid is 2x2 and the time grid 2^(L-1) square; each recursion
    doubles the frequency grid per axis and halves the time grid, ending at
    level L-1 with the single root time box.
    """

    level: int
    L: int
    r: int
    k_extent: tuple[int, int]
    lam: np.ndarray

    def __post_init__(self):
        na = 2 ** (self.level + 1)
        nb = 2 ** (self.L - self.level - 1)
        expect = (na, na, nb, nb, self.r, self.r)
        if self.lam.shape != expect:
            raise ValueError(
                f"coefficient array shape {self.lam.shape} does not match level "
                f"{self.level} of an L={self.L} factorization (expected {expect})"
            )


def interp_factors_axis(L: int, r: int, omega: int, n: int, k_extent: int,
                        sign: float) -> np.ndarray:
    """Stage-0 per-axis transfer factors, shape (2, r, omega).

    Entry [a, k, s] couples uniform offset s inside a leaf time box to
    Chebyshev node k, for the coarse frequency box a (of two per axis).
    """
    grid = cheb_points(r)
    w = omega / n  # leaf box side, equals 1/2^(L-1)
    u = np.arange(omega) / n
    t_k = box_cheb_points(0.0, w, grid.points1d)
    lag = lagrange_matrix(grid, box_frame(0.0, w, u))  # (omega, r)
    xi0 = (np.arange(2) + 0.5) * (k_extent / 2.0)
    phase = np.exp(sign * 2j * np.pi * xi0[:, None, None]
                   * (u[None, None, :] - t_k[None, :, None]))
    return phase * lag.T[None, :, :]


def recursion_factors_axis(ell: int, L: int, r: int, k_extent: int,
                           sign: float) -> np.ndarray:
    """Stage-``ell`` per-axis transfer factors, shape (2^(ell+1), 2, r, r).

    Entry [a, s, c, k] couples Chebyshev node c of the child time box at
    offset s to Chebyshev node k of its parent box, for the child frequency
    box a (of 2^(ell+1) per axis).
    """
    grid = cheb_points(r)
    w_parent = 1.0 / 2 ** (L - ell - 1)
    t_k = box_cheb_points(0.0, w_parent, grid.points1d)
    na = 2 ** (ell + 1)
    xi0 = (np.arange(na) + 0.5) * (k_extent / na)
    out = np.empty((na, 2, r, r), dtype=np.complex128)
    for s in range(2):
        u = box_cheb_points(s * w_parent / 2, w_parent / 2, grid.points1d)
        lag = lagrange_matrix(grid, box_frame(0.0, w_parent, u))  # (c, k)
        phase = np.exp(sign * 2j * np.pi * xi0[:, None, None]
                       * (u[None, :, None] - t_k[None, None, :]))
        out[:, s] = phase * lag[None, :, :]
    return out


def kernel_factors_axis(L: int, r: int, m: int, k_extent: int,
                        sign: float) -> np.ndarray:
    """Final-stage per-axis kernel samples, shape (2^L, m, r).

    Entry [a, p, k] is the Fourier kernel at integer frequency a*m + p and
    the k-th Chebyshev node of the root time box.
    """
    grid = cheb_points(r)
    t_k = box_cheb_points(0.0, 1.0, grid.points1d)
    na = 2 ** L
    xi = (np.arange(na)[:, None] * m + np.arange(m)[None, :]).astype(np.float64)
    return np.exp(sign * 2j * np.pi * xi[:, :, None] * t_k[None, None, :])


def _sign_of(direction: str) -> float:
    if direction == "forward":
        return -1.0
    if direction == "inverse":
        return +1.0
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def butterfly_interpolate(x: np.ndarray, L: int, r: int,
                          k_extent: tuple[int, int],
                          direction: str = "forward") -> CoefficientTensor:
    """Stage 0: uniform samples -> Chebyshev coefficients on leaf time boxes."""
    sign = _sign_of(direction)
    x = np.asarray(x, dtype=np.complex128)
    nb = 2 ** (L - 1)
    nx, ny = x.shape
    if nx % nb or ny % nb or nx < nb or ny < nb:
        raise ValueError(
            f"input shape {x.shape} is not (omega_x*2^(L-1), omega_y*2^(L-1)) for L={L}"
        )
    ox, oy = nx // nb, ny // nb
    fx = interp_factors_axis(L, r, ox, nx, k_extent[0], sign)
    fy = interp_factors_axis(L, r, oy, ny, k_extent[1], sign)
    xv = x.reshape(nb, ox, nb, oy)
    t1 = np.einsum("ght,BsCt->BsCgh", fy, xv)
    lam = np.einsum("fes,BsCgh->fgBCeh", fx, t1)
    return CoefficientTensor(level=0, L=L, r=r, k_extent=k_extent, lam=lam)


def butterfly_recurse(coeff: CoefficientTensor, ell: int,
                      direction: str = "forward") -> CoefficientTensor:
    """Stage ``ell`` in 1..L-1: transfer coefficients one quadtree level up."""
    sign = _sign_of(direction)
    L, r = coeff.L, coeff.r
    if not 1 <= ell <= L - 1:
        raise ValueError(f"recursion stage must lie in 1..{L - 1}, got {ell}")
    if coeff.level != ell - 1:
        raise ValueError(
            f"coefficient tensor is at level {coeff.level}, expected {ell - 1}"
        )
    na_in = 2 ** ell
    nb_out = 2 ** (L - ell - 1)
    tx = recursion_factors_axis(ell, L, r, coeff.k_extent[0], sign)
    ty = recursion_factors_axis(ell, L, r, coeff.k_extent[1], sign)
    txr = tx.reshape(na_in, 2, 2, r, r)  # [parent, child offset, s, c, k]
    tyr = ty.reshape(na_in, 2, 2, r, r)
    lamv = coeff.lam.reshape(na_in, na_in, nb_out, 2, nb_out, 2, r, r)
    t1 = np.einsum("Qbtdh,PQBsCtcd->PQbBsCch", tyr, lamv)
    out = np.einsum("Pasce,PQbBsCch->PaQbBCeh", txr, t1)
    lam = out.reshape(2 ** (ell + 1), 2 ** (ell + 1), nb_out, nb_out, r, r)
    return CoefficientTensor(level=ell, L=L, r=r, k_extent=coeff.k_extent, lam=lam)


def butterfly_apply_kernel(coeff: CoefficientTensor, m: tuple[int, int],
                           direction: str = "forward") -> np.ndarray:
    """Final stage: apply the Fourier kernel at the root time box.

    Expects the tensor produced by the last recursion round (time side
    reduced to the single root box).  Returns the (m_x*2^L, m_y*2^L)
    frequency array; the inverse direction is scaled by 1/(total output
    size).
    """
    sign = _sign_of(direction)
    L, r = coeff.L, coeff.r
    if coeff.level != L - 1:
        raise ValueError(
            f"kernel application requires the final-level tensor (level {L - 1}, "
            f"time side = root box); got level {coeff.level}"
        )
    na = 2 ** L
    mx, my = m
    ex = kernel_factors_axis(L, r, mx, coeff.k_extent[0], sign)
    ey = kernel_factors_axis(L, r, my, coeff.k_extent[1], sign)
    lam = coeff.lam.reshape(na, na, r, r)
    t1 = np.einsum("ape,abef->abpf", ex, lam)
    u = np.einsum("bqf,abpf->apbq", ey, t1).reshape(na * mx, na * my)
    if direction == "inverse":
        u /= (na * mx) * (na * my)
    return u


def butterfly_forward(x: np.ndarray, L: int, r: int, direction: str = "forward",
                      out_shape: tuple[int, int] | None = None) -> np.ndarray:
    """Full three-stage approximate transform of a 2D grid signal.

    ``out_shape`` (default: the input shape) must be divisible by 2^L per
    axis; it fixes the frequency extent K and the per-box output density m.
    """
    x = np.asarray(x)
    if out_shape is None:
        out_shape = x.shape
    if out_shape[0] % 2 ** L or out_shape[1] % 2 ** L:
        raise ValueError(
            f"output shape {out_shape} is not (m_x*2^L, m_y*2^L) for L={L}"
        )
    m = (out_shape[0] // 2 ** L, out_shape[1] // 2 ** L)
    coeff = butterfly_interpolate(x, L, r, out_shape, direction)
    for ell in range(1, L):
        coeff = butterfly_recurse(coeff, ell, direction)
    return butterfly_apply_kernel(coeff, m, direction)
