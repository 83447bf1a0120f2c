"""Identity-composed network pair and the image-restoration training harness.

The restoration model chains a forward-direction network into an
inverse-direction one, so under structured initialization it starts as an
approximation of the identity map.  Training distorted -> clean on
grayscale patches then bends the frequency-domain middle toward the
inverse of the distortion.  Trained models run on each color channel
independently at test time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoding import decode_grid, encode_grid
from .imaging import DatasetManifest, apply_distortion, crop_patches, psnr_batch, \
    stitch_patches, to_grayscale
from .network import ButterflyNet2D, NetConfig, build, init_fourier, init_random
from .training import adam_step, backward, forward_with_tape, init_optimizer, \
    loss_rel_l2_grad, net_params, plateau_schedule, upstream_from_complex

RESTORE_LR = 2e-3
RESTORE_CHEB_ORDER = 2


@dataclass
class ComposedNet:
    """Forward-direction network feeding an inverse-direction one."""

    first: ButterflyNet2D
    second: ButterflyNet2D

    def __post_init__(self):
        if self.first.config.output_shape != self.second.config.input_shape:
            raise ValueError(
                f"stage shapes do not chain: {self.first.config.output_shape} "
                f"-> {self.second.config.input_shape}"
            )

    @property
    def input_shape(self):
        return self.first.config.input_shape


def compose_identity(L: int, r: int = RESTORE_CHEB_ORDER) -> ComposedNet:
    """Structured-initialized pair approximating the identity on 2^L squares."""
    first = init_fourier(build(NetConfig(L=L, r=r, direction="forward",
                                         input_kind="real")))
    second = init_fourier(build(NetConfig(L=L, r=r, direction="inverse",
                                          input_kind="complex")))
    return ComposedNet(first=first, second=second)


def compose_random(L: int, scheme: str, seed: int,
                   r: int = RESTORE_CHEB_ORDER) -> ComposedNet:
    """Same architecture with both stages randomly initialized."""
    first = build(NetConfig(L=L, r=r, direction="forward", input_kind="real"))
    second = build(NetConfig(L=L, r=r, direction="inverse", input_kind="complex"))
    init_random(first, scheme, seed + 1000)
    init_random(second, scheme, seed + 2000)
    return ComposedNet(first=first, second=second)


def composed_forward_tape(net: ComposedNet, x: np.ndarray):
    """Forward through both stages keeping tapes for backprop."""
    grid1, tape1 = forward_with_tape(net.first, x)
    grid2, tape2 = forward_with_tape(net.second, grid1)
    return grid2, (tape1, tape2)


def composed_apply(net: ComposedNet, channel: np.ndarray) -> np.ndarray:
    """Run one real-valued (H, W) channel through the pair, raw output."""
    x = encode_grid(channel[None, None, :, :])
    grid, _ = composed_forward_tape(net, x)
    return decode_grid(grid)[0, 0].real


def composed_params(net: ComposedNet) -> list:
    return net_params(net.first) + net_params(net.second)


def identity_error(net: ComposedNet, n_samples: int = 20, seed: int = 0) -> float:
    """Mean relative l2 deviation from the identity on random [0,1) images."""
    rng = np.random.default_rng(seed)
    h, w = net.input_shape
    errs = []
    for _ in range(n_samples):
        x = rng.random((h, w))
        y = composed_apply(net, x)
        errs.append(np.linalg.norm(y - x) / np.linalg.norm(x))
    return float(np.mean(errs))


@dataclass
class RestorationResult:
    net: ComposedNet
    losses: list
    psnr: float
    baseline_psnr: float
    task: str
    init: str


def _as_images(dataset) -> list[np.ndarray]:
    if isinstance(dataset, DatasetManifest):
        return dataset.load()
    return list(dataset)


def run_restoration_task(task: str, dataset, init: str, epochs: int, batch: int,
                         seed: int, lr: float = RESTORE_LR, patch_grid: int = 1,
                         test_dataset=None) -> RestorationResult:
    """Train the composed network on one distortion and report test PSNR.

    Training pairs are (distorted, clean) grayscale patches of the dataset
    images; distortion seeds derive from ``seed`` and the image index.
    Testing distorts the RGB test images the same way, restores each color
    channel with the trained network, and scores PSNR against the clean
    originals (restored values clamped to [0,1] so outputs remain images).
    ``test_dataset`` defaults to the training images.

    ``init`` is "fourier" or one of the random schemes.
    """
    images = _as_images(dataset)
    if not images:
        raise ValueError("empty dataset")
    if patch_grid not in (1, 2, 4):
        raise ValueError(f"patch_grid must be 1, 2 or 4, got {patch_grid}")
    size = images[0].shape[1]
    patch = size // patch_grid
    L = int(np.log2(patch))
    if 2**L != patch or L < 2:
        raise ValueError(f"patch size {patch} is not a power of two >= 4")

    inputs, targets = [], []
    for idx, img in enumerate(images):
        gray = to_grayscale(img)
        dist = apply_distortion(task, gray, seed=seed + idx)
        if patch_grid == 1:
            inputs.append(dist[0])
            targets.append(gray[0])
        else:
            inputs.extend(p[0] for p in crop_patches(dist, patch_grid))
            targets.extend(p[0] for p in crop_patches(gray, patch_grid))
    inputs = np.stack(inputs)
    targets = np.stack(targets)
    encoded = encode_grid(inputs[:, None, :, :])

    if init == "fourier":
        net = compose_identity(L)
    else:
        net = compose_random(L, init, seed)

    params = composed_params(net)
    state = init_optimizer(params, lr)
    rng = np.random.default_rng(seed + 77)
    losses: list[float] = []
    n = inputs.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        for b0 in range(0, n, batch):
            sel = order[b0 : b0 + batch]
            grid, (tape1, tape2) = composed_forward_tape(net, encoded[sel])
            pred = decode_grid(grid)[:, 0].real
            loss, dpred = loss_rel_l2_grad(pred, targets[sel])
            g2 = backward(net.second, tape2, upstream_from_complex(
                dpred.astype(np.complex128)))
            g1 = backward(net.first, tape1, g2.input_grad)
            flat = [a for pair in g1.by_layer for a in pair]
            flat += [a for pair in g2.by_layer for a in pair]
            adam_step(state, params, flat)
            plateau_schedule(state, loss)
            losses.append(loss)

    test_images = _as_images(test_dataset) if test_dataset is not None else images
    restored_all, distorted_all = [], []
    for idx, img in enumerate(test_images):
        dist = apply_distortion(task, img, seed=seed + 10_000 + idx)
        chans = []
        for c in range(img.shape[0]):
            if patch_grid == 1:
                rec = composed_apply(net, dist[c])[None]
            else:
                parts = crop_patches(dist[c][None], patch_grid)
                recs = [composed_apply(net, p[0])[None] for p in parts]
                rec = stitch_patches(recs, patch_grid)
            chans.append(rec[0])
        restored_all.append(np.clip(np.stack(chans), 0.0, 1.0))
        distorted_all.append(dist)
    clean = np.stack(test_images)
    psnr = psnr_batch(np.stack(restored_all), clean)
    baseline = psnr_batch(np.stack(distorted_all), clean)
    return RestorationResult(net=net, losses=losses, psnr=psnr,
                             baseline_psnr=baseline, task=task, init=init)
