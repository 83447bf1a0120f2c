"""Image I/O, distortions, PSNR, patching, and dataset handling.

Images are float64 arrays shaped (channels, height, width) with values in
[0, 1]; channels is 1 (grayscale) or 3 (RGB).  Supported file formats are
PNG (via Pillow) and binary PPM/PGM.  All distortions are deterministic
given (image, seed) and map [0,1] images to [0,1] images.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage

GRAY_WEIGHTS = (0.299, 0.587, 0.114)  # Rec.601 luma
NOISE_STD = 0.1
BLUR_SIGMA = 2.5
BLUR_SIZE = 5
INPAINT_BASE = 10  # mask side for a 32x32 picture; scales with the picture
WATERMARK_LINES = 8
PSNR_CAP_DB = 100.0


# ---------------------------------------------------------------------------
# I/O


def load_image(path) -> np.ndarray:
    """Load a PNG or binary PPM/PGM file into a (C, H, W) array in [0, 1]."""
    if not os.path.isfile(path):
        raise OSError(f"{path}: no such file")
    ext = os.path.splitext(str(path))[1].lower()
    try:
        if ext in (".ppm", ".pgm"):
            return _load_pnm(path)
        if ext == ".png":
            with PILImage.open(path) as im:
                if im.mode not in ("L", "RGB"):
                    im = im.convert("RGB" if im.mode not in ("1", "I;16") else "L")
                arr = np.asarray(im, dtype=np.float64) / 255.0
            if arr.ndim == 2:
                return arr[None]
            return np.ascontiguousarray(arr.transpose(2, 0, 1))
    except OSError:
        raise
    except Exception as exc:  # Pillow decode failures come in many flavors
        raise OSError(f"{path}: failed to decode image: {exc}") from exc
    raise OSError(f"{path}: unsupported image format {ext!r} (PNG/PPM/PGM only)")


def save_image(img: np.ndarray, path) -> None:
    """Write a (C, H, W) array in [0, 1] as 8-bit PNG or binary PPM/PGM."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[0] not in (1, 3):
        raise ValueError(f"expected (1|3, H, W) image, got shape {img.shape}")
    q = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    ext = os.path.splitext(str(path))[1].lower()
    if ext in (".ppm", ".pgm"):
        _save_pnm(q, path)
        return
    if ext == ".png":
        if q.shape[0] == 1:
            PILImage.fromarray(q[0], mode="L").save(path)
        else:
            PILImage.fromarray(q.transpose(1, 2, 0), mode="RGB").save(path)
        return
    raise OSError(f"{path}: unsupported image format {ext!r} (PNG/PPM/PGM only)")


def _load_pnm(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise OSError(f"{path}: truncated PNM header")
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    magic, wid, hei, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if magic not in (b"P5", b"P6"):
        raise OSError(f"{path}: only binary PGM (P5) and PPM (P6) are supported")
    if maxval != 255:
        raise OSError(f"{path}: only maxval 255 supported, got {maxval}")
    ch = 1 if magic == b"P5" else 3
    raw = np.frombuffer(data, dtype=np.uint8, count=wid * hei * ch, offset=pos)
    if raw.size != wid * hei * ch:
        raise OSError(f"{path}: pixel data truncated")
    arr = raw.reshape(hei, wid, ch).astype(np.float64) / 255.0
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def _save_pnm(q: np.ndarray, path) -> None:
    magic = b"P5" if q.shape[0] == 1 else b"P6"
    ext = os.path.splitext(str(path))[1].lower()
    if (magic == b"P6") != (ext == ".ppm"):
        raise OSError(f"{path}: extension does not match channel count")
    header = magic + b"\n%d %d\n255\n" % (q.shape[2], q.shape[1])
    with open(path, "wb") as f:
        f.write(header)
        f.write(q.transpose(1, 2, 0).tobytes())


# ---------------------------------------------------------------------------
# basic operations


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """Rec.601 luma of an RGB image, (3, H, W) -> (1, H, W)."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[0] != 3:
        raise ValueError(f"grayscale conversion expects (3, H, W), got {img.shape}")
    w = np.asarray(GRAY_WEIGHTS)
    return np.tensordot(w, img, axes=(0, 0))[None]


def crop_patches(img: np.ndarray, grid: int) -> list[np.ndarray]:
    """Split into grid x grid non-overlapping tiles, row-major order."""
    if grid not in (2, 4):
        raise ValueError(f"patch grid must be 2 or 4, got {grid}")
    c, h, w = img.shape
    if h % grid or w % grid:
        raise ValueError(f"image {h}x{w} not divisible into a {grid}x{grid} grid")
    ph, pw = h // grid, w // grid
    return [
        np.ascontiguousarray(img[:, i * ph : (i + 1) * ph, j * pw : (j + 1) * pw])
        for i in range(grid)
        for j in range(grid)
    ]


def stitch_patches(patches: list[np.ndarray], grid: int) -> np.ndarray:
    """Exact inverse of :func:`crop_patches`."""
    if len(patches) != grid * grid:
        raise ValueError(f"expected {grid * grid} patches, got {len(patches)}")
    c, ph, pw = patches[0].shape
    out = np.empty((c, ph * grid, pw * grid))
    for i in range(grid):
        for j in range(grid):
            out[:, i * ph : (i + 1) * ph, j * pw : (j + 1) * pw] = patches[i * grid + j]
    return out


# ---------------------------------------------------------------------------
# distortions


def _square_size(img: np.ndarray) -> int:
    if img.shape[1] != img.shape[2]:
        raise ValueError(f"distortion expects a square image, got {img.shape}")
    return img.shape[1]


def distort_inpaint(img: np.ndarray, seed: int = 0) -> np.ndarray:
    """Zero out a centered square mask scaling with the picture size."""
    size = _square_size(img)
    if size not in (32, 64, 128, 256):
        raise ValueError(f"inpainting mask defined for sizes 32..256, got {size}")
    mside = INPAINT_BASE * size // 32
    lo = (size - mside) // 2
    out = img.copy()
    out[:, lo : lo + mside, lo : lo + mside] = 0.0
    return out


def gaussian_kernel_2d(size: int = BLUR_SIZE, sigma: float = BLUR_SIGMA) -> np.ndarray:
    half = size // 2
    ax = np.arange(-half, half + 1)
    g = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * sigma**2))
    return g / g.sum()


def distort_blur(img: np.ndarray) -> np.ndarray:
    """Normalized 5x5 Gaussian blur with reflect padding."""
    kern = gaussian_kernel_2d()
    half = kern.shape[0] // 2
    pad = np.pad(img, ((0, 0), (half, half), (half, half)), mode="reflect")
    out = np.zeros_like(img, dtype=np.float64)
    h, w = img.shape[1], img.shape[2]
    for di in range(kern.shape[0]):
        for dj in range(kern.shape[1]):
            out += kern[di, dj] * pad[:, di : di + h, dj : dj + w]
    return out


def gaussian_noise_field(shape, seed: int, std: float = NOISE_STD) -> np.ndarray:
    return np.random.default_rng(seed).normal(0.0, std, size=shape)


def distort_noise(img: np.ndarray, seed: int = 0) -> np.ndarray:
    """Additive Gaussian noise (std 0.1), clamped back into [0, 1]."""
    return np.clip(img + gaussian_noise_field(img.shape, seed), 0.0, 1.0)


def distort_watermark(img: np.ndarray) -> np.ndarray:
    """Eight horizontal and eight vertical black lines; width grows with size."""
    size = _square_size(img)
    if size < 32:
        raise ValueError(f"watermark lines defined for sizes >= 32, got {size}")
    width = max(1, size // 32)
    spacing = size // WATERMARK_LINES
    offset = size // (2 * WATERMARK_LINES)
    out = img.copy()
    for k in range(WATERMARK_LINES):
        p = offset + k * spacing
        out[:, p : p + width, :] = 0.0
        out[:, :, p : p + width] = 0.0
    return out


DISTORTIONS = ("inpaint", "deblur", "denoise", "watermark")


def apply_distortion(task: str, img: np.ndarray, seed: int = 0) -> np.ndarray:
    """Distorted network input for the given restoration task."""
    if task == "inpaint":
        return distort_inpaint(img, seed)
    if task == "deblur":
        return distort_blur(img)
    if task == "denoise":
        return distort_noise(img, seed)
    if task == "watermark":
        return distort_watermark(img)
    raise ValueError(f"unknown task {task!r}; expected one of {DISTORTIONS}")


# ---------------------------------------------------------------------------
# PSNR


def psnr_batch(preds, targets) -> float:
    """Mean PSNR (dB) over a batch of RGB images; exact matches cap at 100."""
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if preds.shape != targets.shape:
        raise ValueError(f"shape mismatch: {preds.shape} vs {targets.shape}")
    if preds.ndim == 3:
        preds, targets = preds[None], targets[None]
    if preds.ndim != 4 or preds.shape[1] != 3:
        raise ValueError(f"expected (batch, 3, Sx, Sy) RGB images, got {preds.shape}")
    mse = ((preds - targets) ** 2).mean(axis=(1, 2, 3))
    vals = np.where(mse > 0.0, -10.0 * np.log10(np.maximum(mse, 1e-300)), PSNR_CAP_DB)
    return float(vals.mean())


# ---------------------------------------------------------------------------
# synthetic corpus and dataset manifests


def _synthetic_one(kind: str, size: int, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.meshgrid(np.arange(size) / size, np.arange(size) / size, indexing="ij")
    img = np.empty((3, size, size))
    if kind == "gradient":
        theta = rng.uniform(0, 2 * np.pi)
        base = xx * np.cos(theta) + yy * np.sin(theta)
        base = (base - base.min()) / (base.max() - base.min() + 1e-12)
        for c in range(3):
            lo, hi = sorted(rng.uniform(0.0, 1.0, 2))
            img[c] = lo + (hi - lo) * base
    elif kind == "checker":
        period = int(rng.integers(3, 7))
        phase = rng.integers(0, period, 2)
        cells = ((np.add.outer(np.arange(size) + phase[0], np.zeros(size, int)) // period)
                 + (np.add.outer(np.zeros(size, int), np.arange(size) + phase[1]) // period))
        pattern = (cells % 2).astype(np.float64)
        dark, light = rng.uniform(0.0, 0.35), rng.uniform(0.65, 1.0)
        for c in range(3):
            img[c] = dark + (light - dark) * pattern
    elif kind == "blobs":
        img[:] = rng.uniform(0.1, 0.4)
        for _ in range(int(rng.integers(3, 7))):
            cx, cy = rng.uniform(0.15, 0.85, 2)
            s = rng.uniform(0.02, 0.08)
            blob = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * s * s))
            col = rng.uniform(0.3, 1.0, 3)
            for c in range(3):
                img[c] = np.maximum(img[c], col[c] * blob)
    else:
        raise ValueError(f"unknown synthetic kind {kind!r}")
    return np.clip(img, 0.0, 1.0)


# Checkerboards and sharp blobs dominate so that blurring is genuinely
# destructive on most of the corpus; pure gradients stay in the mix but do
# not drown the benchmark in blur-invariant content.
_CORPUS_CYCLE = ("checker", "blobs", "checker", "gradient",
                 "checker", "blobs", "checker", "blobs")


def synthetic_corpus(n: int, size: int, seed: int) -> list[np.ndarray]:
    """Deterministic RGB test images: gradients, checkerboards, Gaussian blobs."""
    rng = np.random.default_rng(seed)
    return [_synthetic_one(_CORPUS_CYCLE[i % len(_CORPUS_CYCLE)], size, rng)
            for i in range(n)]


@dataclass
class DatasetManifest:
    """Directory of images plus the target size and split membership."""

    root: str
    entries: list[str]
    size: int
    split: str = "train"

    def __post_init__(self):
        if not self.entries:
            raise ValueError("dataset manifest has no entries")
        if self.split not in ("train", "test"):
            raise ValueError(f"split must be 'train' or 'test', got {self.split!r}")

    def load(self) -> list[np.ndarray]:
        imgs = []
        for name in self.entries:
            img = load_image(os.path.join(self.root, name))
            if img.shape[1] != self.size or img.shape[2] != self.size:
                raise ValueError(
                    f"{name}: expected {self.size}x{self.size}, got "
                    f"{img.shape[1]}x{img.shape[2]}"
                )
            imgs.append(img)
        return imgs


def save_manifest(manifest: DatasetManifest, path) -> None:
    with open(path, "w") as f:
        json.dump(
            {
                "root": manifest.root,
                "entries": manifest.entries,
                "size": manifest.size,
                "split": manifest.split,
            },
            f,
            indent=2,
        )


def load_manifest(path) -> DatasetManifest:
    try:
        with open(path) as f:
            d = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise OSError(f"{path}: cannot read manifest: {exc}") from exc
    return DatasetManifest(root=d["root"], entries=d["entries"], size=d["size"],
                           split=d["split"])


def scan_dataset_dir(root, size: int, split: str = "train") -> DatasetManifest:
    """Manifest over every PNG/PPM/PGM file directly inside ``root``."""
    names = sorted(
        n for n in os.listdir(root)
        if os.path.splitext(n)[1].lower() in (".png", ".ppm", ".pgm")
    )
    if not names:
        raise ValueError(f"{root}: no PNG/PPM/PGM images found")
    return DatasetManifest(root=str(root), entries=names, size=size, split=split)


def write_synthetic_dataset(root, n: int, size: int, seed: int,
                            split: str = "train") -> DatasetManifest:
    """Write a synthetic corpus into ``root`` and return its manifest."""
    os.makedirs(root, exist_ok=True)
    names = []
    for i, img in enumerate(synthetic_corpus(n, size, seed)):
        name = f"{split}_{i:04d}.png"
        save_image(img, os.path.join(root, name))
        names.append(name)
    manifest = DatasetManifest(root=str(root), entries=names, size=size, split=split)
    save_manifest(manifest, os.path.join(root, f"manifest_{split}.json"))
    return manifest
