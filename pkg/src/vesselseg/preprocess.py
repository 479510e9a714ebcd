"""Fundus preprocessing chain.

Green channel, inversion (vessels become bright), radial fake padding of
the field of view, white top-hat against a disk structuring element,
CLAHE, and a final [0,1] normalization over the padded FOV.

Every function is pure; inputs are never mutated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import postprocess
from .raster import (
    BinaryMask,
    GrayImage,
    RGBImage,
    invert,
    normalize01,
    shift_image,
)

_NEIGHBORS8 = ((-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1))


@dataclass(frozen=True)
class StructuringElement:
    """Discrete disk neighborhood: offsets {(dx, dy) : dx^2 + dy^2 <= r^2}."""

    radius: int
    offsets: tuple

    @classmethod
    def disk(cls, radius: int) -> "StructuringElement":
        if radius < 1:
            raise ValueError("structuring element radius must be >= 1")
        r2 = radius * radius
        offs = tuple(
            (dx, dy)
            for dy in range(-radius, radius + 1)
            for dx in range(-radius, radius + 1)
            if dx * dx + dy * dy <= r2
        )
        return cls(radius, offs)


@dataclass(frozen=True)
class PreprocessConfig:
    tophat_radius: int = 8
    pad_width: int = 30
    clahe_tiles_x: int = 8
    clahe_tiles_y: int = 8
    clahe_clip: float = 3.0
    clahe_bins: int = 256
    tophat_enabled: bool = True

    def __post_init__(self):
        if self.tophat_radius < 1:
            raise ValueError("preprocess.tophat_radius must be >= 1")
        if self.pad_width < 0:
            raise ValueError("preprocess.pad_width must be >= 0")
        if self.clahe_tiles_x < 1 or self.clahe_tiles_y < 1:
            raise ValueError("preprocess CLAHE tile counts must be >= 1")
        if self.clahe_clip < 1.0:
            raise ValueError("preprocess.clahe_clip must be >= 1")
        if self.clahe_bins < 2:
            raise ValueError("preprocess.clahe_bins must be >= 2")


@dataclass(frozen=True)
class PreprocessResult:
    """Final preprocessed image plus the padded FOV and stage intermediates."""

    image: GrayImage
    fov: BinaryMask
    stages: dict


def green_channel(img: RGBImage) -> GrayImage:
    """Green byte / 255 as a [0,1] grayscale image."""
    return img[:, :, 1].astype(np.float64) / 255.0


def derive_fov_mask(img: RGBImage, luminance_threshold: float) -> BinaryMask:
    """Fallback FOV estimate: mean-luminance threshold, largest 8-connected blob."""
    lum = img.astype(np.float64).mean(axis=2) / 255.0
    bright = lum > luminance_threshold
    if not bright.any():
        raise ValueError("derive_fov_mask: no pixel above the luminance threshold")
    lm = postprocess.connected_components(bright, connectivity=8)
    largest = int(np.argmax(lm.component_sizes[1:])) + 1
    return lm.labels == largest


def fake_pad(img: GrayImage, fov: BinaryMask, width: int) -> tuple[GrayImage, BinaryMask]:
    """Radially extend FOV border values outward by ``width`` pixels.

    Each iteration, every non-mask pixel 8-adjacent to the mask receives the
    mean of its masked 8-neighbors and joins the mask. Pixels inside the
    original FOV are never modified.
    """
    if img.shape != fov.shape:
        raise ValueError("image and FOV dimensions disagree")
    if not fov.any():
        raise ValueError("fake_pad requires a nonempty FOV")
    out = img.astype(np.float64).copy()
    mask = fov.copy()
    for _ in range(width):
        masked_vals = np.where(mask, out, 0.0)
        mask_f = mask.astype(np.float64)
        total = np.zeros_like(out)
        count = np.zeros_like(out)
        for dx, dy in _NEIGHBORS8:
            total += shift_image(masked_vals, dx, dy)
            count += shift_image(mask_f, dx, dy)
        ring = (count > 0) & ~mask
        if not ring.any():
            break
        out[ring] = total[ring] / count[ring]
        mask = mask | ring
    return out, mask


def _windowed_extremum(img, se, pad_value, reducer):
    h, w = img.shape
    r = se.radius
    padded = np.pad(img, r, mode="constant", constant_values=pad_value)
    out = np.full_like(img, pad_value, dtype=np.float64)
    for dx, dy in se.offsets:
        reducer(out, padded[r + dy : r + dy + h, r + dx : r + dx + w], out=out)
    return out


def gray_erode(img: GrayImage, se: StructuringElement) -> GrayImage:
    """Windowed minimum; offsets outside the raster are ignored."""
    return _windowed_extremum(img, se, np.inf, np.minimum)


def gray_dilate(img: GrayImage, se: StructuringElement) -> GrayImage:
    """Windowed maximum; offsets outside the raster are ignored."""
    return _windowed_extremum(img, se, -np.inf, np.maximum)


def gray_open(img: GrayImage, se: StructuringElement) -> GrayImage:
    return gray_dilate(gray_erode(img, se), se)


def white_top_hat(img: GrayImage, se: StructuringElement) -> GrayImage:
    """Image minus its grayscale opening; isolates bright structures thinner
    than the structuring element. Always nonnegative."""
    return img - gray_open(img, se)


def _interp_axis(n_pix: int, centers: np.ndarray):
    """Per-coordinate tile indices (lower, upper) and blend fraction."""
    pos = np.arange(n_pix, dtype=np.float64)
    n = len(centers)
    if n == 1:
        zero = np.zeros(n_pix, dtype=np.int64)
        return zero, zero, np.zeros(n_pix)
    i0 = np.clip(np.searchsorted(centers, pos, side="right") - 1, 0, n - 1)
    i1 = np.minimum(i0 + 1, n - 1)
    span = centers[i1] - centers[i0]
    safe = np.where(span > 0, span, 1.0)
    frac = np.clip((pos - centers[i0]) / safe, 0.0, 1.0)
    frac[span <= 0] = 0.0
    return i0, i1, frac


def clahe(img: GrayImage, cfg: PreprocessConfig) -> GrayImage:
    """Contrast-limited adaptive histogram equalization on a [0,1] image.

    Per-tile histograms of ``clahe_bins`` bins are clipped at
    ``clahe_clip * tile_pixels / clahe_bins`` with the excess redistributed
    uniformly; each pixel is mapped through the bilinear blend of the four
    nearest tile-center CDFs (clamped at the borders). A tile whose mass
    falls in a single bin maps identically, so flat regions pass through.
    """
    if img.size and (img.min() < 0.0 or img.max() > 1.0):
        raise ValueError("clahe expects values in [0, 1]")
    h, w = img.shape
    ty, tx, nb = cfg.clahe_tiles_y, cfg.clahe_tiles_x, cfg.clahe_bins
    bins = np.minimum((img * nb).astype(np.int64), nb - 1)
    ys = [i * h // ty for i in range(ty + 1)]
    xs = [j * w // tx for j in range(tx + 1)]

    luts = np.zeros((ty, tx, nb))
    identity = np.zeros((ty, tx), dtype=bool)
    for i in range(ty):
        for j in range(tx):
            sub = bins[ys[i] : ys[i + 1], xs[j] : xs[j + 1]]
            hist = np.bincount(sub.ravel(), minlength=nb).astype(np.float64)
            if np.count_nonzero(hist) <= 1:
                identity[i, j] = True
                continue
            npx = sub.size
            limit = cfg.clahe_clip * npx / nb
            excess = np.maximum(hist - limit, 0.0).sum()
            hist = np.minimum(hist, limit) + excess / nb
            luts[i, j] = np.cumsum(hist) / npx
    if identity.all():
        return img.copy()

    cy = np.array([(ys[i] + ys[i + 1] - 1) / 2.0 for i in range(ty)])
    cx = np.array([(xs[j] + xs[j + 1] - 1) / 2.0 for j in range(tx)])
    i0, i1, fy = _interp_axis(h, cy)
    j0, j1, fx = _interp_axis(w, cx)
    iy0, iy1, wy = i0[:, None], i1[:, None], fy[:, None]
    jx0, jx1, wx = j0[None, :], j1[None, :], fx[None, :]

    def corner(ti, tj):
        mapped = luts[ti, tj, bins]
        return np.where(identity[ti, tj], img, mapped)

    return (
        (1 - wy) * (1 - wx) * corner(iy0, jx0)
        + (1 - wy) * wx * corner(iy0, jx1)
        + wy * (1 - wx) * corner(iy1, jx0)
        + wy * wx * corner(iy1, jx1)
    )


def preprocess_pipeline(img: RGBImage, fov: BinaryMask, cfg: PreprocessConfig) -> PreprocessResult:
    """Full chain: green -> invert -> fake pad -> top-hat -> CLAHE -> normalize.

    Returns the [0,1]-normalized image, the padded FOV mask, and the stage
    intermediates keyed ``green``, ``inverted``, ``padded``, ``tophat``,
    ``clahe`` (for dumping).
    """
    if img.shape[:2] != fov.shape:
        raise ValueError("image and FOV dimensions disagree")
    green = green_channel(img)
    inverted = invert(green)
    padded, padded_fov = fake_pad(inverted, fov, cfg.pad_width)
    if cfg.tophat_enabled:
        tophat = white_top_hat(padded, StructuringElement.disk(cfg.tophat_radius))
    else:
        tophat = padded
    enhanced = clahe(tophat, cfg)
    final = normalize01(enhanced, padded_fov)
    stages = {
        "green": green,
        "inverted": inverted,
        "padded": padded,
        "tophat": tophat,
        "clahe": enhanced,
    }
    return PreprocessResult(final, padded_fov, stages)
