"""Sparse-channel convolutional network mirroring the butterfly factorization.

A ButterflyNet2D is a stack of L+1 grouped convolution layers over encoded
tensors (4 real channels per complex channel, see :mod:`bfnet.encoding`):

* layer 0: kernel = stride = (omega_x, omega_y), 1 complex channel in,
  4r^2 out;
* layers 1..L-1: kernel = stride = (2, 2), 4^l groups of r^2 complex
  channels in and 4r^2 out each;
* layer L: kernel = stride = (1, 1), 4^L groups, r^2 complex channels in
  and m_x*m_y out each, followed by a fixed permutation of the 1x1 output
  channels onto the (m_x*2^L) x (m_y*2^L) frequency grid.

Channels are ordered hierarchically: the complex channel for frequency box
(i_x, i_y) and node index (k_x, k_y) sits at flat position
(morton(i_x, i_y) * n1 + k_x) * n2 + k_y.  The quadtree (Morton) order is
what makes every group's input and output channels contiguous blocks, so an
output channel c_o only reads input channels [k*r^2, (k+1)*r^2) with
k = c_o div (4 r^2), and a grouped convolution is plain slicing.

Every kernel and stride pair is equal, so convolution windows never
overlap; forward and backward are reshapes plus batched matrix products.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import butterfly as bf
from .encoding import expand_complex_kernel, relu

DIRECTIONS = ("forward", "inverse")
INPUT_KINDS = ("real", "complex")
RANDOM_SCHEMES = ("kaiming_uniform", "kaiming_normal", "orthogonal")

MAGIC = b"BFN2"
FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# channel ordering


def morton_interleave(ix, iy, bits: int):
    """Quadtree flat index of grid cell (ix, iy) on a 2^bits square grid."""
    ix = np.asarray(ix)
    iy = np.asarray(iy)
    out = np.zeros_like(ix)
    for b in range(bits):
        out = out | (((ix >> b) & 1) << (2 * b + 1)) | (((iy >> b) & 1) << (2 * b))
    return out


def morton_deinterleave(flat, bits: int):
    """Inverse of :func:`morton_interleave`."""
    flat = np.asarray(flat)
    ix = np.zeros_like(flat)
    iy = np.zeros_like(flat)
    for b in range(bits):
        ix = ix | (((flat >> (2 * b + 1)) & 1) << b)
        iy = iy | (((flat >> (2 * b)) & 1) << b)
    return ix, iy


def channel_flat(ix: int, iy: int, kx: int, ky: int, grid_bits: int,
                 per_box: tuple[int, int]) -> int:
    """Flat complex-channel index for box (ix, iy) and within-box (kx, ky)."""
    n1, n2 = per_box
    if not (0 <= kx < n1 and 0 <= ky < n2):
        raise ValueError(f"within-box index ({kx},{ky}) out of range {per_box}")
    n = 1 << grid_bits
    if not (0 <= ix < n and 0 <= iy < n):
        raise ValueError(f"box index ({ix},{iy}) out of range for grid {n}")
    g = int(morton_interleave(ix, iy, grid_bits))
    return (g * n1 + kx) * n2 + ky


def channel_tuple(c: int, grid_bits: int, per_box: tuple[int, int]):
    """Inverse of :func:`channel_flat`: c -> (ix, iy, kx, ky)."""
    n1, n2 = per_box
    total = (1 << (2 * grid_bits)) * n1 * n2
    if not 0 <= c < total:
        raise ValueError(f"channel {c} out of range [0, {total})")
    ky = c % n2
    kx = (c // n2) % n1
    g = c // (n1 * n2)
    ix, iy = morton_deinterleave(np.asarray(g), grid_bits)
    return int(ix), int(iy), kx, ky


def _morton_rows(bits: int) -> np.ndarray:
    """Row-major flat positions listed in quadtree order (for re-sorting)."""
    g = np.arange(1 << (2 * bits))
    ix, iy = morton_deinterleave(g, bits)
    return ix * (1 << bits) + iy


# ---------------------------------------------------------------------------
# configuration and layers


@dataclass(frozen=True)
class NetConfig:
    """Architecture hyperparameters; sizes derive from (L, r, omega, m)."""

    L: int
    r: int
    omega: tuple[int, int] = (2, 2)
    m: tuple[int, int] = (1, 1)
    direction: str = "forward"
    input_kind: str = "real"

    def __post_init__(self):
        if self.L < 2:
            raise ValueError(f"layer count L must be >= 2, got {self.L}")
        if self.r < 1:
            raise ValueError(f"Chebyshev order r must be >= 1, got {self.r}")
        if min(self.omega) < 1 or min(self.m) < 1:
            raise ValueError("omega and m components must be >= 1")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")
        if self.input_kind not in INPUT_KINDS:
            raise ValueError(f"input_kind must be one of {INPUT_KINDS}")

    @property
    def input_shape(self) -> tuple[int, int]:
        return (self.omega[0] * 2 ** (self.L - 1), self.omega[1] * 2 ** (self.L - 1))

    @property
    def output_shape(self) -> tuple[int, int]:
        return (self.m[0] * 2 ** self.L, self.m[1] * 2 ** self.L)

    @property
    def k_extent(self) -> tuple[int, int]:
        return self.output_shape


def config_to_json(config: NetConfig) -> str:
    return json.dumps(
        {
            "L": config.L,
            "r": config.r,
            "omega": list(config.omega),
            "m": list(config.m),
            "direction": config.direction,
            "input_kind": config.input_kind,
        }
    )


def config_from_json(text: str) -> NetConfig:
    d = json.loads(text)
    return NetConfig(
        L=d["L"], r=d["r"], omega=tuple(d["omega"]), m=tuple(d["m"]),
        direction=d["direction"], input_kind=d["input_kind"],
    )


class SparseConvLayer:
    """One grouped convolution (kernel == stride) over encoded tensors.

    Weights are stored in the contraction layout (groups, 4*ci, kh, kw,
    4*co); the ``w`` property exposes the (groups, 4*ci, 4*co, kh, kw) view.
    Group g reads complex input channels [g*ci, (g+1)*ci) and writes
    complex output channels [g*co, (g+1)*co).
    """

    def __init__(self, groups: int, in_per_group: int, out_per_group: int,
                 kernel: tuple[int, int]):
        self.groups = groups
        self.in_per_group = in_per_group       # complex channels per group
        self.out_per_group = out_per_group
        self.kernel = kernel
        self.stride = kernel
        ci4, co4 = 4 * in_per_group, 4 * out_per_group
        self._w = np.zeros((groups, ci4, kernel[0], kernel[1], co4))
        self.b = np.zeros((groups, co4))

    @property
    def w(self) -> np.ndarray:
        """Weights viewed as (groups, in_real, out_real, k_h, k_w)."""
        return self._w.transpose(0, 1, 4, 2, 3)

    @property
    def w_storage(self) -> np.ndarray:
        return self._w

    def in_channel_block(self, g: int) -> slice:
        return slice(g * self.in_per_group, (g + 1) * self.in_per_group)

    def out_channel_block(self, g: int) -> slice:
        return slice(g * self.out_per_group, (g + 1) * self.out_per_group)

    def gather(self, z: np.ndarray) -> np.ndarray:
        """Rearrange (B, C4, H, W) input into (groups, B*X*Y, ci4*kh*kw)."""
        bsz = z.shape[0]
        kh, kw = self.kernel
        ci4 = 4 * self.in_per_group
        xs, ys = z.shape[2] // kh, z.shape[3] // kw
        zg = z.reshape(bsz, self.groups, ci4, xs, kh, ys, kw)
        zt = zg.transpose(1, 0, 3, 5, 2, 4, 6)
        return np.ascontiguousarray(zt).reshape(self.groups, bsz * xs * ys, ci4 * kh * kw)

    def scatter_back(self, grad_flat: np.ndarray, batch: int,
                     in_shape: tuple[int, int]) -> np.ndarray:
        """Inverse of :func:`gather` for gradients (windows never overlap)."""
        kh, kw = self.kernel
        ci4 = 4 * self.in_per_group
        xs, ys = in_shape[0] // kh, in_shape[1] // kw
        gt = grad_flat.reshape(self.groups, batch, xs, ys, ci4, kh, kw)
        gz = gt.transpose(1, 0, 4, 2, 5, 3, 6)
        return np.ascontiguousarray(gz).reshape(
            batch, self.groups * ci4, in_shape[0], in_shape[1]
        )

    def apply(self, z: np.ndarray) -> np.ndarray:
        """Grouped convolution + bias + ReLU on a (B, C4, H, W) batch."""
        bsz = z.shape[0]
        kh, kw = self.kernel
        xs, ys = z.shape[2] // kh, z.shape[3] // kw
        co4 = 4 * self.out_per_group
        zf = self.gather(z)
        wm = self._w.reshape(self.groups, zf.shape[2], co4)
        out = zf @ wm
        out += self.b[:, None, :]
        out = out.reshape(self.groups, bsz, xs, ys, co4)
        out = out.transpose(1, 0, 4, 2, 3)
        out = np.ascontiguousarray(out).reshape(bsz, self.groups * co4, xs, ys)
        return relu(out)


@dataclass
class ButterflyNet2D:
    config: NetConfig
    layers: list = field(default_factory=list)

    @property
    def output_channel_positions(self) -> np.ndarray:
        """Flat frequency-grid position of each final complex channel."""
        cfg = self.config
        mx, my = cfg.m
        n_boxes = 4 ** cfg.L
        g = np.arange(n_boxes)
        ax, ay = morton_deinterleave(g, cfg.L)
        px = np.arange(mx)
        py = np.arange(my)
        xi_x = ax[:, None, None] * mx + px[None, :, None]
        xi_y = ay[:, None, None] * my + py[None, None, :]
        return (xi_x * cfg.output_shape[1] + xi_y).reshape(-1)


def build(config: NetConfig) -> ButterflyNet2D:
    """Allocate the layer stack with all weights and biases zero."""
    L, r = config.L, config.r
    layers = [SparseConvLayer(1, 1, 4 * r * r, config.omega)]
    for ell in range(1, L):
        layers.append(SparseConvLayer(4 ** ell, r * r, 4 * r * r, (2, 2)))
    layers.append(SparseConvLayer(4 ** L, r * r, config.m[0] * config.m[1], (1, 1)))
    return ButterflyNet2D(config=config, layers=layers)


# ---------------------------------------------------------------------------
# initialization


def _set_layer_complex(layer: SparseConvLayer, wc: np.ndarray) -> None:
    """Expand complex kernels (g, ci, co, kh, kw) into the layer weights."""
    expand_complex_kernel(wc, out=layer.w)


def init_fourier(net: ButterflyNet2D, direction: str | None = None) -> ButterflyNet2D:
    """Load the butterfly transfer coefficients into the convolution kernels.

    After this call the network computes the same map as
    :func:`bfnet.butterfly.butterfly_forward` exactly (complex arithmetic
    carried by the 4x4 real blocks).  All biases are zero.  The inverse
    direction conjugates the kernel and folds the 1/(output size)
    normalization into the final layer.
    """
    cfg = net.config
    direction = cfg.direction if direction is None else direction
    sign = -1.0 if direction == "forward" else +1.0
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}")
    L, r = cfg.L, cfg.r
    kx_ext, ky_ext = cfg.k_extent
    nx, ny = cfg.input_shape

    # layer 0: uniform samples -> leaf Chebyshev nodes
    fx = bf.interp_factors_axis(L, r, cfg.omega[0], nx, kx_ext, sign)
    fy = bf.interp_factors_axis(L, r, cfg.omega[1], ny, ky_ext, sign)
    wc = np.einsum("aks,blt->abklst", fx, fy).reshape(
        1, 1, 4 * r * r, cfg.omega[0], cfg.omega[1]
    )
    _set_layer_complex(net.layers[0], wc)
    net.layers[0].b[:] = 0.0

    # recursion layers: child Chebyshev nodes -> parent Chebyshev nodes
    for ell in range(1, L):
        tx = bf.recursion_factors_axis(ell, L, r, kx_ext, sign)
        ty = bf.recursion_factors_axis(ell, L, r, ky_ext, sign)
        txr = tx.reshape(2 ** ell, 2, 2, r, r)   # [parent, alpha, s, c, k]
        tyr = ty.reshape(2 ** ell, 2, 2, r, r)
        big = np.einsum("Pasce,Qbtdf->PQabefcdst", txr, tyr)
        big = big.reshape(4 ** ell, 2, 2, r, r, r, r, 2, 2)
        rows = _morton_rows(ell)
        layer = net.layers[ell]
        chunk = max(1, min(4 ** ell, 256))
        for g0 in range(0, 4 ** ell, chunk):
            sel = rows[g0:g0 + chunk]
            part = big[sel]  # (G, ax, ay, kx, ky, cx, cy, sx, sy)
            part = part.transpose(0, 5, 6, 1, 2, 3, 4, 7, 8)
            part = part.reshape(len(sel), r * r, 4 * r * r, 2, 2)
            expand_complex_kernel(part, out=layer.w[g0:g0 + len(sel)])
        layer.b[:] = 0.0
        del big

    # final layer: Fourier kernel at root-box Chebyshev nodes
    ex = bf.kernel_factors_axis(L, r, cfg.m[0], kx_ext, sign)
    ey = bf.kernel_factors_axis(L, r, cfg.m[1], ky_ext, sign)
    big = np.einsum("apc,bqd->abpqcd", ex, ey)
    big = big.reshape(4 ** L, cfg.m[0], cfg.m[1], r, r)
    big = big[_morton_rows(L)]
    big = big.transpose(0, 3, 4, 1, 2).reshape(
        4 ** L, r * r, cfg.m[0] * cfg.m[1], 1, 1
    )
    if direction == "inverse":
        big = big / (cfg.output_shape[0] * cfg.output_shape[1])
    _set_layer_complex(net.layers[L], big)
    net.layers[L].b[:] = 0.0
    return net


def init_random(net: ButterflyNet2D, scheme: str, seed: int) -> ButterflyNet2D:
    """Random baselines: Kaiming uniform/normal or per-group orthogonal."""
    if scheme not in RANDOM_SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {RANDOM_SCHEMES}")
    rng = np.random.default_rng(seed)
    for layer in net.layers:
        fan_in = 4 * layer.in_per_group * layer.kernel[0] * layer.kernel[1]
        shape = layer.w_storage.shape
        if scheme == "kaiming_uniform":
            bound = np.sqrt(6.0 / fan_in)
            layer.w_storage[:] = rng.uniform(-bound, bound, size=shape)
        elif scheme == "kaiming_normal":
            std = np.sqrt(2.0 / fan_in)
            layer.w_storage[:] = rng.normal(0.0, std, size=shape)
        else:
            co4 = 4 * layer.out_per_group
            for g in range(layer.groups):
                mat = _orthogonal_matrix(rng, co4, fan_in)
                layer.w_storage[g] = mat.T.reshape(
                    4 * layer.in_per_group, layer.kernel[0], layer.kernel[1], co4
                )
        layer.b[:] = 0.0
    return net


def _orthogonal_matrix(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Semi-orthogonal (rows, cols) matrix with QR sign fixing."""
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, rr = np.linalg.qr(a)
    q = q * np.sign(np.diag(rr))[None, :]
    if rows >= cols:
        return q
    return q.T


# ---------------------------------------------------------------------------
# forward pass


def _check_input(net: ButterflyNet2D, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        x = x[None]
    if x.ndim != 4 or x.shape[1] != 4 or x.shape[2:] != net.config.input_shape:
        raise ValueError(
            f"input shape {x.shape} does not match (batch, 4, "
            f"{net.config.input_shape[0]}, {net.config.input_shape[1]})"
        )
    return x


def unreshape_output(net: ButterflyNet2D, z: np.ndarray) -> np.ndarray:
    """Permute final 1x1 channels onto the output frequency grid.

    (B, 4*C, 1, 1) -> (B, 4, Kx, Ky) where channel (i_x, i_y, k_x, k_y)
    lands at frequency (i_x*m_x + k_x, i_y*m_y + k_y).
    """
    cfg = net.config
    kx, ky = cfg.output_shape
    n_chan = cfg.m[0] * cfg.m[1] * 4 ** cfg.L
    if z.ndim != 4 or z.shape[1] != 4 * n_chan or z.shape[2:] != (1, 1):
        raise ValueError(f"expected (batch, {4 * n_chan}, 1, 1), got {z.shape}")
    pos = net.output_channel_positions
    zc = z.reshape(z.shape[0], n_chan, 4)
    grid = np.empty((z.shape[0], 4, kx * ky))
    grid[:, :, pos] = zc.transpose(0, 2, 1)
    return grid.reshape(z.shape[0], 4, kx, ky)


def reshape_to_channels(net: ButterflyNet2D, grid: np.ndarray) -> np.ndarray:
    """Inverse of :func:`unreshape_output`."""
    cfg = net.config
    kx, ky = cfg.output_shape
    n_chan = cfg.m[0] * cfg.m[1] * 4 ** cfg.L
    if grid.ndim != 4 or grid.shape[1] != 4 or grid.shape[2:] != (kx, ky):
        raise ValueError(f"expected (batch, 4, {kx}, {ky}), got {grid.shape}")
    pos = net.output_channel_positions
    gf = grid.reshape(grid.shape[0], 4, kx * ky)[:, :, pos]
    return np.ascontiguousarray(gf.transpose(0, 2, 1)).reshape(
        grid.shape[0], 4 * n_chan, 1, 1
    )


def forward(net: ButterflyNet2D, x: np.ndarray) -> np.ndarray:
    """Run the full layer stack; returns the encoded output frequency grid.

    Accepts (4, H, W) or (batch, 4, H, W); the output has matching rank.
    """
    single = np.asarray(x).ndim == 3
    z = _check_input(net, x)
    for layer in net.layers:
        z = layer.apply(z)
    out = unreshape_output(net, z)
    return out[0] if single else out


def materialize_matrix(net: ButterflyNet2D, batch: int = 32) -> np.ndarray:
    """Dense complex matrix of the network map, one basis forward per column.

    Columns follow the row-major flattening of the input grid; rows the
    row-major flattening of the output grid.  Basis vectors are encoded
    real unit impulses.  Inputs are processed in fixed-size batches so the
    result is deterministic for a given build.
    """
    from .encoding import decode_grid

    nx, ny = net.config.input_shape
    kx, ky = net.config.output_shape
    n_in, n_out = nx * ny, kx * ky
    mat = np.empty((n_out, n_in), dtype=np.complex128)
    for j0 in range(0, n_in, batch):
        j1 = min(j0 + batch, n_in)
        x = np.zeros((j1 - j0, 4, nx, ny))
        idx = np.arange(j0, j1)
        x[np.arange(j1 - j0), 0, idx // ny, idx % ny] = 1.0
        out = forward(net, x)
        mat[:, j0:j1] = decode_grid(out)[:, 0].reshape(j1 - j0, n_out).T
    return mat


# ---------------------------------------------------------------------------
# parameter counting


@dataclass(frozen=True)
class LayerCount:
    name: str
    w_actual: int
    b_actual: int
    w_paper_form: int
    b_paper_form: int


@dataclass(frozen=True)
class ParamCountReport:
    layers: list[LayerCount]
    recursion_w_sum: int
    recursion_b_sum: int
    recursion_w_closed_form: int
    recursion_b_closed_form: int
    total_w: int
    total_b: int
    dense_total_w: int
    dense_total_b: int

    @property
    def total(self) -> int:
        return self.total_w + self.total_b

    @property
    def dense_total(self) -> int:
        return self.dense_total_w + self.dense_total_b

    @property
    def dense_to_sparse_ratio(self) -> float:
        return self.dense_total / self.total


def param_count(config: NetConfig) -> ParamCountReport:
    """Structural nonzero counts, closed forms, and the dense-CNN comparison.

    The dense totals describe the same layer stack with full channel
    connectivity (as a regular CNN would have), computed from the layer
    shapes.  The final-layer closed form is reported alongside the actual
    count rather than asserted; with uniform 4x4 blocks the two coincide.
    """
    L, r = config.L, config.r
    ox, oy = config.omega
    mx, my = config.m
    net = build(config)
    counts = []
    dense_w = dense_b = 0
    for ell, layer in enumerate(net.layers):
        wa = layer.w_storage.size
        ba = layer.b.size
        if ell == 0:
            wp = 4 ** 3 * r * r * ox * oy
            bp = 4 ** 2 * r * r
            name = "interpolation"
        elif ell < L:
            wp = 4 ** (ell + 4) * r ** 4
            bp = 4 ** (ell + 2) * r * r
            name = f"recursion-{ell}"
        else:
            wp = 4 ** (L + 2) * r * r * mx * my
            bp = 4 ** (L + 1) * mx * my
            name = "kernel-application"
        counts.append(LayerCount(name, wa, ba, wp, bp))
        cin_total = 4 * layer.groups * layer.in_per_group
        cout_total = 4 * layer.groups * layer.out_per_group
        dense_w += cin_total * cout_total * layer.kernel[0] * layer.kernel[1]
        dense_b += cout_total
    rec_w = sum(c.w_actual for c in counts[1:L])
    rec_b = sum(c.b_actual for c in counts[1:L])
    return ParamCountReport(
        layers=counts,
        recursion_w_sum=rec_w,
        recursion_b_sum=rec_b,
        recursion_w_closed_form=(4 ** (L + 4) - 4 ** 5) * r ** 4 // 3,
        recursion_b_closed_form=(4 ** (L + 2) - 4 ** 3) * r * r // 3,
        total_w=sum(c.w_actual for c in counts),
        total_b=sum(c.b_actual for c in counts),
        dense_total_w=dense_w,
        dense_total_b=dense_b,
    )


# ---------------------------------------------------------------------------
# serialization


def save_net(net: ButterflyNet2D, path) -> None:
    """Binary checkpoint: magic, version, config, then per-layer w and b.

    Weight arrays are written in the declared (groups, in_real, out_real,
    k_h, k_w) order as little-endian float64.
    """
    cfg = net.config
    dir_code = DIRECTIONS.index(cfg.direction)
    kind_code = INPUT_KINDS.index(cfg.input_kind)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<6I", cfg.L, cfg.r, cfg.omega[0], cfg.omega[1],
                            cfg.m[0], cfg.m[1]))
        f.write(struct.pack("<BB", dir_code, kind_code))
        f.write(struct.pack("<I", len(net.layers)))
        for layer in net.layers:
            f.write(np.ascontiguousarray(layer.w, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(layer.b, dtype="<f8").tobytes())


def load_net(path) -> ButterflyNet2D:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise OSError(f"{path}: not a network checkpoint (bad magic {magic!r})")
        (version,) = struct.unpack("<I", f.read(4))
        if version != FORMAT_VERSION:
            raise OSError(f"{path}: unsupported checkpoint version {version}")
        L, r, ox, oy, mx, my = struct.unpack("<6I", f.read(24))
        dir_code, kind_code = struct.unpack("<BB", f.read(2))
        (n_layers,) = struct.unpack("<I", f.read(4))
        cfg = NetConfig(L=L, r=r, omega=(ox, oy), m=(mx, my),
                        direction=DIRECTIONS[dir_code],
                        input_kind=INPUT_KINDS[kind_code])
        net = build(cfg)
        if n_layers != len(net.layers):
            raise OSError(f"{path}: layer count {n_layers} does not match config")
        for layer in net.layers:
            spec_shape = layer.w.shape
            raw = f.read(8 * int(np.prod(spec_shape)))
            wspec = np.frombuffer(raw, dtype="<f8").reshape(spec_shape)
            layer.w[...] = wspec
            raw = f.read(8 * layer.b.size)
            layer.b[:] = np.frombuffer(raw, dtype="<f8").reshape(layer.b.shape)
    return net
