"""Relative matrix-norm discrepancies between an operator and its reference."""

from __future__ import annotations

import numpy as np

_POWER_SEED = 20210614  # fixed so reports are reproducible run to run


def spectral_norm_power(mat: np.ndarray, tol: float = 1e-6,
                        max_iter: int = 10000) -> float:
    """Largest singular value via power iteration on mat^H mat.

    Stops when the eigenvalue estimate changes by less than ``tol``
    relatively, or after ``max_iter`` iterations.  The start vector is
    drawn from a fixed-seed generator, so results are deterministic.
    """
    mat = np.asarray(mat)
    if mat.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {mat.shape}")
    rng = np.random.default_rng(_POWER_SEED)
    v = rng.standard_normal(mat.shape[1])
    if np.iscomplexobj(mat):
        v = v + 1j * rng.standard_normal(mat.shape[1])
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return 0.0
    v = v / nv
    lam_prev = np.inf
    conj_t = mat.conj().T
    for _ in range(max_iter):
        w = mat @ v
        lam = np.vdot(w, w).real  # eigenvalue of mat^H mat at current v
        if lam == 0.0:
            return 0.0
        v = conj_t @ w
        v /= np.linalg.norm(v)
        if abs(lam - lam_prev) <= tol * lam:
            break
        lam_prev = lam
    return float(np.sqrt(lam))


def epsilon_metrics(bmat: np.ndarray, fmat: np.ndarray) -> tuple[float, float, float]:
    """Relative p-norm errors (p = 1, 2, inf) of ``bmat`` against ``fmat``.

    p = 1 is the max column abs sum, p = inf the max row abs sum, p = 2 the
    spectral norm from :func:`spectral_norm_power`.
    """
    bmat = np.asarray(bmat)
    fmat = np.asarray(fmat)
    if bmat.shape != fmat.shape:
        raise ValueError(f"shape mismatch: {bmat.shape} vs {fmat.shape}")
    diff = bmat - fmat
    absf = np.abs(fmat)
    absd = np.abs(diff)
    eps1 = absd.sum(axis=0).max() / absf.sum(axis=0).max()
    epsinf = absd.sum(axis=1).max() / absf.sum(axis=1).max()
    eps2 = spectral_norm_power(diff) / spectral_norm_power(fmat)
    return float(eps1), float(eps2), float(epsinf)
