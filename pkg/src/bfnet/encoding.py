"""Complex values as four nonnegative reals, and complex products as 4x4 blocks.

A complex x maps to [(Re x)+, (Im x)+, (Re x)-, (Im x)-] where (z)+ and (z)-
are positive and negative parts.  Multiplication by a fixed complex a is then
a 4x4 real matrix followed by ReLU, and the result is again in this canonical
form, so whole chains of complex multiply-accumulates survive ReLU networks
exactly.  Tensors hold one complex channel per 4 consecutive real channels.
"""

from __future__ import annotations

import numpy as np


def relu(t):
    """Elementwise max(t, 0)."""
    return np.maximum(t, 0.0)


def encode(z: complex) -> np.ndarray:
    """Canonical 4-vector for a single complex value."""
    re, im = float(np.real(z)), float(np.imag(z))
    return np.array([max(re, 0.0), max(im, 0.0), max(-re, 0.0), max(-im, 0.0)])


def decode(e) -> complex:
    """Left inverse of :func:`encode`; also defined on non-canonical vectors."""
    e = np.asarray(e, dtype=np.float64)
    return complex(e[0] - e[2], e[1] - e[3])


def weight_matrix(a: complex) -> np.ndarray:
    """4x4 real matrix realizing y = a*x on encoded vectors (after ReLU)."""
    re, im = float(np.real(a)), float(np.imag(a))
    return np.array(
        [
            [re, -im, -re, im],
            [im, re, -im, -re],
            [-re, im, re, -im],
            [-im, -re, im, re],
        ]
    )


def encode_grid(values: np.ndarray) -> np.ndarray:
    """Encode an array of complex channels into stacked real channels.

    Input shape (..., C, H, W) complex (or real, treated as zero imaginary
    part); output shape (..., 4*C, H, W) float64 with channel c expanded
    into real channels 4c..4c+3.
    """
    values = np.asarray(values)
    re = np.real(values).astype(np.float64)
    im = np.imag(values).astype(np.float64) if np.iscomplexobj(values) else np.zeros_like(re)
    shp = values.shape
    out = np.zeros(shp[:-3] + (4 * shp[-3],) + shp[-2:], dtype=np.float64)
    out[..., 0::4, :, :] = np.maximum(re, 0.0)
    out[..., 1::4, :, :] = np.maximum(im, 0.0)
    out[..., 2::4, :, :] = np.maximum(-re, 0.0)
    out[..., 3::4, :, :] = np.maximum(-im, 0.0)
    return out


def decode_grid(data: np.ndarray) -> np.ndarray:
    """Inverse of :func:`encode_grid`, (..., 4*C, H, W) -> (..., C, H, W) complex."""
    data = np.asarray(data, dtype=np.float64)
    re = data[..., 0::4, :, :] - data[..., 2::4, :, :]
    im = data[..., 1::4, :, :] - data[..., 3::4, :, :]
    return re + 1j * im


# weight_matrix transposed into (input component, output component) order:
# entry (a, b) is taken from Re or Im of the complex weight with a sign.
_BLOCK_LAYOUT = [
    [("re", 1), ("im", 1), ("re", -1), ("im", -1)],
    [("im", -1), ("re", 1), ("im", 1), ("re", -1)],
    [("re", -1), ("im", -1), ("re", 1), ("im", 1)],
    [("im", 1), ("re", -1), ("im", -1), ("re", 1)],
]


def expand_complex_kernel(wc: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Expand a complex kernel to its real 4x4-block form.

    Input shape (..., CI, CO, KH, KW) complex; output shape
    (..., 4*CI, 4*CO, KH, KW) float64.  The block at (4i+a, 4o+b) carries
    entry [b, a] of ``weight_matrix(wc[i, o])`` so that contracting input
    real channels against axis -4 applies the matrix to encoded vectors.

    ``out`` may be a preallocated array or writable view of that shape;
    the expansion then avoids large temporaries.
    """
    wc = np.asarray(wc)
    shp = wc.shape
    tgt = shp[:-4] + (4 * shp[-4], 4 * shp[-3]) + shp[-2:]
    if out is None:
        out = np.empty(tgt, dtype=np.float64)
    elif out.shape != tgt:
        raise ValueError(f"output shape {out.shape} does not match {tgt}")
    parts = {"re": wc.real, "im": wc.imag}
    for a in range(4):
        for b in range(4):
            name, sign = _BLOCK_LAYOUT[a][b]
            view = out[..., a::4, b::4, :, :]
            view[...] = parts[name]
            if sign < 0:
                np.negative(view, out=view)
    return out
