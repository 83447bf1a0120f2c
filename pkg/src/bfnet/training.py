"""Reverse-mode gradients, Adam, plateau decay, and transform training.

The layer stack is fixed (grouped convolution + bias + ReLU, kernel ==
stride), so backpropagation is written out directly: a ReLU mask, a bias
sum, and the transpose of the gather/matmul pair used in the forward pass.
Since windows never overlap, the input gradient is an exact scatter of the
per-window gradient, and gradients only ever exist for the per-group weight
blocks; connections outside a group are never materialized.

The ReLU subgradient at exactly zero is taken as zero.  The structured
initialization parks half of every encoded pair at zero pre-activation, and
a zero subgradient keeps those dead halves silent instead of leaking
gradient through them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoding import decode_grid, encode_grid
from .network import ButterflyNet2D, reshape_to_channels, unreshape_output
from .transforms import dft2d_exact, idft2d_exact


@dataclass
class ForwardTape:
    """Per-layer activations cached by :func:`forward_with_tape`."""

    inputs: list  # z entering each layer, length = number of layers
    final_channels: np.ndarray  # last layer output before the grid permutation
    grid: np.ndarray


@dataclass
class Grads:
    """Gradient buffers shaped like each layer's weight storage and bias."""

    by_layer: list  # (dw, db) pairs
    input_grad: np.ndarray | None = None


def forward_with_tape(net: ButterflyNet2D, x: np.ndarray) -> tuple[np.ndarray, ForwardTape]:
    """Forward pass that keeps every layer input for a later backward call."""
    z = np.asarray(x, dtype=np.float64)
    if z.ndim == 3:
        z = z[None]
    inputs = []
    for layer in net.layers:
        inputs.append(z)
        z = layer.apply(z)
    grid = unreshape_output(net, z)
    return grid, ForwardTape(inputs=inputs, final_channels=z, grid=grid)


def backward(net: ButterflyNet2D, tape: ForwardTape, upstream: np.ndarray) -> Grads:
    """Exact gradients of the network map for the cached forward pass.

    ``upstream`` is the loss gradient with respect to the encoded output
    grid, shape (batch, 4, Kx, Ky).  Returns weight/bias gradients per
    layer plus the gradient with respect to the encoded input.
    """
    if tape is None or not isinstance(tape, ForwardTape):
        raise RuntimeError("backward requires the tape from forward_with_tape")
    if len(tape.inputs) != len(net.layers):
        raise RuntimeError("tape does not match this network's layer stack")
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != tape.grid.shape:
        raise ValueError(
            f"upstream shape {upstream.shape} does not match output {tape.grid.shape}"
        )
    d_post = reshape_to_channels(net, upstream)
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(net.layers)
    for ell in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[ell]
        z_in = tape.inputs[ell]
        z_out = tape.final_channels if ell == len(net.layers) - 1 else tape.inputs[ell + 1]
        d_pre = d_post * (z_out > 0.0)
        bsz = d_pre.shape[0]
        xs, ys = d_pre.shape[2], d_pre.shape[3]
        co4 = 4 * layer.out_per_group
        df = d_pre.reshape(bsz, layer.groups, co4, xs, ys)
        db = df.sum(axis=(0, 3, 4))
        df = np.ascontiguousarray(df.transpose(1, 0, 3, 4, 2)).reshape(
            layer.groups, bsz * xs * ys, co4
        )
        zf = layer.gather(z_in)
        dw = np.matmul(zf.transpose(0, 2, 1), df).reshape(layer.w_storage.shape)
        wm = layer.w_storage.reshape(layer.groups, zf.shape[2], co4)
        dzf = np.matmul(df, wm.transpose(0, 2, 1))
        d_post = layer.scatter_back(dzf, bsz, (z_in.shape[2], z_in.shape[3]))
        grads[ell] = (dw, db)
    return Grads(by_layer=grads, input_grad=d_post)


# ---------------------------------------------------------------------------
# losses


def _per_sample_norms(a: np.ndarray) -> np.ndarray:
    flat = a.reshape(a.shape[0], -1)
    if np.iscomplexobj(flat):
        return np.sqrt((flat.real**2 + flat.imag**2).sum(axis=1))
    return np.sqrt((flat**2).sum(axis=1))


def loss_rel_l2(pred: np.ndarray, target: np.ndarray) -> float:
    """Sum over the batch of per-sample relative l2 errors."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    tn = _per_sample_norms(target)
    if np.any(tn == 0.0):
        raise ValueError("target sample with zero norm; relative error undefined")
    return float((_per_sample_norms(pred - target) / tn).sum())


def loss_rel_l2_grad(pred: np.ndarray, target: np.ndarray):
    """Loss value and gradient with respect to ``pred``.

    For complex arrays the gradient is returned as a complex array whose
    real/imaginary parts are the partials with respect to the real and
    imaginary components.
    """
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred - target
    tn = _per_sample_norms(target)
    if np.any(tn == 0.0):
        raise ValueError("target sample with zero norm; relative error undefined")
    dn = _per_sample_norms(diff)
    loss = float((dn / tn).sum())
    scale = np.zeros_like(tn)
    nz = dn > 0.0
    scale[nz] = 1.0 / (dn[nz] * tn[nz])
    grad = diff * scale.reshape((-1,) + (1,) * (pred.ndim - 1))
    return loss, grad


def upstream_from_complex(grad: np.ndarray) -> np.ndarray:
    """Map a complex output gradient onto the 4 encoded real channels.

    The decoded value is (z0 - z2) + i (z1 - z3), so the channel partials
    are [Re g, Im g, -Re g, -Im g].
    """
    ups = np.empty(grad.shape[:1] + (4,) + grad.shape[1:])
    ups[:, 0] = grad.real
    ups[:, 1] = grad.imag
    ups[:, 2] = -grad.real
    ups[:, 3] = -grad.imag
    return ups


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class OptimizerState:
    """Adam moments plus reduce-on-plateau bookkeeping."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    plateau_factor: float = 0.98
    plateau_patience: int = 100
    step_count: int = 0
    best_loss: float = np.inf
    plateau_counter: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def init_optimizer(params: list, lr: float, **kwargs) -> OptimizerState:
    state = OptimizerState(lr=lr, **kwargs)
    state.m = [np.zeros_like(p) for p in params]
    state.v = [np.zeros_like(p) for p in params]
    return state


def adam_step(state: OptimizerState, params: list, grads: list) -> list:
    """Standard bias-corrected Adam update, applied in place."""
    if len(params) != len(state.m) or len(grads) != len(params):
        raise ValueError("parameter/gradient lists do not match optimizer state")
    state.step_count += 1
    t = state.step_count
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params


def plateau_schedule(state: OptimizerState, loss: float) -> float:
    """Decay lr by the plateau factor after `patience` non-improving updates."""
    if loss < state.best_loss:
        state.best_loss = loss
        state.plateau_counter = 0
    else:
        state.plateau_counter += 1
        if state.plateau_counter >= state.plateau_patience:
            state.lr *= state.plateau_factor
            state.plateau_counter = 0
    return state.lr


def net_params(net: ButterflyNet2D) -> list:
    """Flat parameter list (weight storage and bias per layer, in order)."""
    out = []
    for layer in net.layers:
        out.append(layer.w_storage)
        out.append(layer.b)
    return out


# ---------------------------------------------------------------------------
# transform-approximation training


TRAIN_POOL_SIZE = 400


def train_transform(net: ButterflyNet2D, direction: str, epochs: int,
                    batch_size: int, lr: float, seed: int):
    """Fit the network to the exact (inverse) transform on random inputs.

    An epoch sweeps a fixed pool of ``TRAIN_POOL_SIZE`` samples drawn once
    from ``seed`` in sequential batches.  Forward-direction samples are
    real uniform on [0,1); inverse-direction samples have independent
    uniform real and imaginary parts.  Targets come from the exact
    reference transforms.  Returns the trained network and the per-step
    loss history.
    """
    cfg = net.config
    nx, ny = cfg.input_shape
    rng = np.random.default_rng(seed)
    if direction == "forward":
        pool = rng.random((TRAIN_POOL_SIZE, nx, ny))
        targets = np.stack([dft2d_exact(s, cfg.output_shape) for s in pool])
    elif direction == "inverse":
        pool = rng.random((TRAIN_POOL_SIZE, nx, ny)) + 1j * rng.random(
            (TRAIN_POOL_SIZE, nx, ny)
        )
        targets = np.stack([idft2d_exact(s, cfg.output_shape) for s in pool])
    else:
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    encoded = encode_grid(pool[:, None, :, :])
    params = net_params(net)
    state = init_optimizer(params, lr)
    losses: list[float] = []
    for _ in range(epochs):
        for b0 in range(0, TRAIN_POOL_SIZE, batch_size):
            b1 = min(b0 + batch_size, TRAIN_POOL_SIZE)
            grid, tape = forward_with_tape(net, encoded[b0:b1])
            pred = decode_grid(grid)[:, 0]
            loss, dpred = loss_rel_l2_grad(pred, targets[b0:b1])
            grads = backward(net, tape, upstream_from_complex(dpred))
            flat_grads = [a for pair in grads.by_layer for a in pair]
            adam_step(state, params, flat_grads)
            losses.append(loss)
    return net, losses
