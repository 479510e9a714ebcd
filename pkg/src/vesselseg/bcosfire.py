"""Bar-selective COSFIRE filtering.

A line prototype is a set of difference-of-Gaussians probes (sigma, rho,
phi) arranged on concentric circles around a center. Each probe response
is blurred with a max-weighted Gaussian window, shifted back to the
center, and the probes are fused with a weighted geometric mean. Rotated
copies of the prototype are pooled with a per-pixel maximum, yielding an
orientation-independent vessel-strength response.

Angles follow the package raster convention (counterclockwise from +x
with y growing downward), so the direction of angle phi is the vector
(cos phi, -sin phi) in (column, row) indexing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .raster import GrayImage, shift_image

ResponseImage = np.ndarray

CENTER_ON = "center-on"
CENTER_OFF = "center-off"

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class FilterTuple:
    """One probe of the filter: DoG scale, circle radius, polar angle."""

    sigma: float
    rho: float
    phi: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("tuple sigma must be > 0")
        if self.rho < 0:
            raise ValueError("tuple rho must be >= 0")
        object.__setattr__(self, "phi", self.phi % _TWO_PI)

    def shift(self) -> tuple[int, int]:
        """Integer displacement (dx, dy) that recenters this probe's response."""
        dx = -self.rho * math.cos(self.phi)
        dy = self.rho * math.sin(self.phi)
        return int(np.rint(dx)), int(np.rint(dy))


@dataclass(frozen=True)
class TupleSet:
    tuples: tuple

    def __post_init__(self):
        if not self.tuples:
            raise ValueError("tuple set must be nonempty")
        if not any(t.rho == 0 for t in self.tuples):
            raise ValueError("tuple set must contain a center tuple (rho = 0)")

    def __len__(self) -> int:
        return len(self.tuples)


@dataclass(frozen=True)
class BCosfireConfig:
    sigma: float = 2.4
    rho_list: tuple = (0.0, 2.0, 4.0, 6.0, 8.0)
    sigma0: float = 3.0
    alpha: float = 0.7
    t: float = 0.0
    n_orientations: int = 12
    weight_exponent: int = 1
    dog_polarity: str = CENTER_ON
    dog_kernel_radius_factor: float = 3.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("filter.sigma must be > 0")
        if not self.rho_list:
            raise ValueError("filter.rho_list must be nonempty")
        if any(r < 0 for r in self.rho_list):
            raise ValueError("filter.rho_list entries must be >= 0")
        if 0.0 not in self.rho_list:
            raise ValueError("filter.rho_list must contain 0 (center probe)")
        if self.sigma0 < 0:
            raise ValueError("filter.sigma0 must be >= 0")
        if self.alpha < 0:
            raise ValueError("filter.alpha must be >= 0")
        if not 0.0 <= self.t <= 1.0:
            raise ValueError("filter.t must lie in [0, 1]")
        if self.n_orientations < 1:
            raise ValueError("filter.n_orientations must be >= 1")
        if self.weight_exponent not in (1, 2):
            raise ValueError("filter.weight_exponent must be 1 or 2")
        if self.dog_polarity not in (CENTER_ON, CENTER_OFF):
            raise ValueError("filter.dog_polarity must be center-on or center-off")
        if self.dog_kernel_radius_factor <= 0:
            raise ValueError("filter.dog_kernel_radius_factor must be > 0")


def dog_kernel(sigma: float, radius_factor: float = 3.0, polarity: str = CENTER_ON) -> np.ndarray:
    """Difference-of-Gaussians kernel on a square support of half-width
    ceil(radius_factor * sigma).

    Each sampled Gaussian is normalized to unit sum over the support, so
    the kernel itself sums to zero. Center-on has a positive central lobe
    (narrow minus wide); center-off is its negation.
    """
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    half = math.ceil(radius_factor * sigma)
    ax = np.arange(-half, half + 1, dtype=np.float64)
    r2 = ax[None, :] ** 2 + ax[:, None] ** 2

    def unit_gauss(s):
        g = np.exp(-r2 / (2.0 * s * s))
        return g / g.sum()

    kern = unit_gauss(0.5 * sigma) - unit_gauss(sigma)
    if polarity == CENTER_OFF:
        kern = -kern
    elif polarity != CENTER_ON:
        raise ValueError("polarity must be center-on or center-off")
    return kern


def dog_response(img: GrayImage, sigma: float, cfg: BCosfireConfig) -> ResponseImage:
    """Half-wave rectified correlation of the image with a DoG kernel
    (zero padding outside the raster)."""
    if not np.isfinite(img).all():
        raise ValueError("dog_response expects finite image values")
    kern = dog_kernel(sigma, cfg.dog_kernel_radius_factor, cfg.dog_polarity)
    resp = ndimage.correlate(img.astype(np.float64), kern, mode="constant", cval=0.0)
    return np.maximum(resp, 0.0)


def line_prototype_tuples(cfg: BCosfireConfig) -> TupleSet:
    """Vertical-bar prototype: a center probe plus a probe pair at phi =
    pi/2 and 3*pi/2 on each positive radius; rotation supplies the rest."""
    tuples = []
    for rho in cfg.rho_list:
        if rho == 0:
            tuples.append(FilterTuple(cfg.sigma, 0.0, 0.0))
        else:
            tuples.append(FilterTuple(cfg.sigma, float(rho), math.pi / 2))
            tuples.append(FilterTuple(cfg.sigma, float(rho), 3 * math.pi / 2))
    return TupleSet(tuple(tuples))


def rotate_tuples(tuple_set: TupleSet, psi: float) -> TupleSet:
    """Increment every probe's phi by psi (wrapped to [0, 2*pi))."""
    return TupleSet(
        tuple(FilterTuple(t.sigma, t.rho, t.phi + psi) for t in tuple_set.tuples)
    )


def _blur_sigma(cfg: BCosfireConfig, rho: float) -> float:
    return cfg.sigma0 + cfg.alpha * rho


def _weighted_max_blur(resp: ResponseImage, blur_sigma: float) -> ResponseImage:
    """Max over a square window of response * Gaussian weight (peak 1).

    The 2-D weighted max separates exactly into two 1-D passes because the
    weights are a nonnegative product over a square window and the
    response is nonnegative (out-of-raster reads are 0).
    """
    if blur_sigma <= 0:
        return resp.copy()
    k = math.ceil(3.0 * blur_sigma)
    offs = np.arange(-k, k + 1, dtype=np.float64)
    wts = np.exp(-(offs**2) / (2.0 * blur_sigma * blur_sigma))
    h, w = resp.shape
    horiz = np.zeros_like(resp)
    padded = np.pad(resp, ((0, 0), (k, k)))
    for i, wt in enumerate(wts):
        np.maximum(horiz, wt * padded[:, i : i + w], out=horiz)
    out = np.zeros_like(resp)
    padded = np.pad(horiz, ((k, k), (0, 0)))
    for i, wt in enumerate(wts):
        np.maximum(out, wt * padded[i : i + h, :], out=out)
    return out


def _shift_crop(padded_blur: ResponseImage, margin: int, dx: int, dy: int,
                shape: tuple[int, int]) -> ResponseImage:
    """Read the blurred map at displaced positions: out[y, x] = blur(x-dx, y-dy).

    ``padded_blur`` is the blur of the zero-padded response, so displaced
    positions just outside the raster still see the window reaching back in.
    """
    h, w = shape
    return padded_blur[margin - dy : margin - dy + h, margin - dx : margin - dx + w].copy()


def blur_shift(resp: ResponseImage, probe: FilterTuple, cfg: BCosfireConfig) -> ResponseImage:
    """Blur a DoG response with the probe's Gaussian max-window, then shift
    it so the probe position is read at the filter center."""
    dx, dy = probe.shift()
    margin = max(abs(dx), abs(dy))
    blurred = _weighted_max_blur(np.pad(resp, margin), _blur_sigma(cfg, probe.rho))
    return _shift_crop(blurred, margin, dx, dy, resp.shape)


def combine(tuples: TupleSet, shifted: list, cfg: BCosfireConfig) -> ResponseImage:
    """Weighted geometric mean of the blurred-shifted probe responses.

    Weights fall off with the probe radius: exp(-rho^e / (2 * sig^2)) with
    sig = max(rho)/3 (1 when all radii are 0) and e the configured weight
    exponent. Values below t * max are zeroed afterwards.
    """
    if len(shifted) != len(tuples.tuples):
        raise ValueError("one shifted response required per tuple")
    shape = shifted[0].shape
    if any(s.shape != shape for s in shifted):
        raise ValueError("shifted responses have mismatched dimensions")
    rhos = np.array([t.rho for t in tuples.tuples], dtype=np.float64)
    rho_max = rhos.max()
    sigma_hat = rho_max / 3.0 if rho_max > 0 else 1.0
    weights = np.exp(-(rhos**cfg.weight_exponent) / (2.0 * sigma_hat * sigma_hat))
    total = weights.sum()
    result = np.ones(shape, dtype=np.float64)
    for resp, wt in zip(shifted, weights):
        result *= np.power(resp, wt / total)
    if cfg.t > 0:
        peak = result.max()
        if peak > 0:
            result = np.where(result < cfg.t * peak, 0.0, result)
    return result


def orientation_responses(img: GrayImage, cfg: BCosfireConfig):
    """Yield (psi, response) for each orientation of the rotated prototype.

    DoG responses are computed once per distinct sigma and the blur step
    once per distinct (sigma, rho); rotations only change the recentring
    shift, which keeps the orientation sweep cheap.
    """
    prototype = line_prototype_tuples(cfg)
    dog_cache: dict[float, ResponseImage] = {}
    blur_cache: dict[tuple[float, float], tuple[ResponseImage, int]] = {}
    for t in prototype.tuples:
        if t.sigma not in dog_cache:
            dog_cache[t.sigma] = dog_response(img, t.sigma, cfg)
        key = (t.sigma, t.rho)
        if key not in blur_cache:
            margin = math.ceil(t.rho)  # covers any rotation's shift
            blurred = _weighted_max_blur(np.pad(dog_cache[t.sigma], margin),
                                         _blur_sigma(cfg, t.rho))
            blur_cache[key] = (blurred, margin)
    for k in range(cfg.n_orientations):
        psi = k * math.pi / cfg.n_orientations
        rotated = rotate_tuples(prototype, psi)
        shifted = []
        for t in rotated.tuples:
            dx, dy = t.shift()
            blurred, margin = blur_cache[(t.sigma, t.rho)]
            shifted.append(_shift_crop(blurred, margin, dx, dy, img.shape))
        yield psi, combine(rotated, shifted, cfg)


def respond(img: GrayImage, cfg: BCosfireConfig) -> ResponseImage:
    """Orientation-pooled response, rescaled to [0, 1] by its global max.

    The per-pixel max over orientations is accumulated in a fixed order so
    identical inputs give bit-identical outputs.
    """
    pooled = None
    for _, resp in orientation_responses(img, cfg):
        pooled = resp if pooled is None else np.maximum(pooled, resp)
    peak = pooled.max()
    if peak > 0:
        pooled = pooled / peak
    return pooled
