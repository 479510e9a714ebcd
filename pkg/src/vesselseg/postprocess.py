"""Binarization of the soft vessel response.

Global Otsu threshold computed inside the field of view, strict-> binarize,
then removal of small connected clusters of foreground pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import BinaryMask, GrayImage


@dataclass(frozen=True)
class LabelMap:
    """Connected-component labeling result.

    ``labels`` holds 0 for background and 1..n for components, numbered in
    raster-scan first-encounter order. ``component_sizes[k]`` is the pixel
    count of label k (entry 0 is unused and kept at 0).
    """

    width: int
    height: int
    labels: np.ndarray
    component_sizes: np.ndarray

    @property
    def n_components(self) -> int:
        return len(self.component_sizes) - 1


def otsu_threshold(img: GrayImage, region: BinaryMask, n_bins: int = 256) -> float:
    """Histogram threshold maximizing between-class variance over ``region``.

    Returns the upper edge of the winning bin; ties go to the lowest bin.
    The argmax is computed with exact integer arithmetic so results are
    reproducible bit-for-bit.
    """
    if img.shape != region.shape:
        raise ValueError("image and region dimensions disagree")
    vals = img[region]
    if vals.size == 0:
        raise ValueError("otsu_threshold requires a nonempty region")
    if vals.min() < 0.0 or vals.max() > 1.0:
        raise ValueError("otsu_threshold expects values in [0, 1]")
    if n_bins < 2:
        raise ValueError("n_bins must be at least 2")
    bins = np.minimum((vals * n_bins).astype(np.int64), n_bins - 1)
    hist = np.bincount(bins, minlength=n_bins)
    counts = [int(c) for c in hist]
    total = sum(counts)
    moment = sum(i * c for i, c in enumerate(counts))

    best_b = 0
    best_num = -1  # best variance as exact fraction best_num / best_den
    best_den = 1
    w0 = 0
    m0 = 0
    for b in range(n_bins):
        w0 += counts[b]
        m0 += b * counts[b]
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            num, den = 0, 1
        else:
            diff = m0 * w1 - (moment - m0) * w0
            num, den = diff * diff, w0 * w1
        if num * best_den > best_num * den:
            best_b, best_num, best_den = b, num, den
    return (best_b + 1) / n_bins


def binarize(img: GrayImage, threshold: float, region: BinaryMask) -> BinaryMask:
    """True where img > threshold and region holds; everything else is background."""
    if img.shape != region.shape:
        raise ValueError("image and region dimensions disagree")
    return (img > threshold) & region


def connected_components(mask: BinaryMask, connectivity: int = 8) -> LabelMap:
    """Label foreground components with run-based two-pass union-find."""
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    parent: list[int] = []

    def find(i: int) -> int:
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    reach = 1 if connectivity == 8 else 0
    all_runs: list[tuple[int, int, int, int]] = []  # (row, start, end, provisional)
    prev_runs: list[tuple[int, int, int]] = []
    for y in range(h):
        row = mask[y]
        if not row.any():
            prev_runs = []
            continue
        flags = row.astype(np.int8)
        edges = np.diff(flags)
        starts = list(np.flatnonzero(edges == 1) + 1)
        ends = list(np.flatnonzero(edges == -1) + 1)
        if row[0]:
            starts.insert(0, 0)
        if row[-1]:
            ends.append(w)
        runs: list[tuple[int, int, int]] = []
        j = 0
        for s, e in zip(starts, ends):
            while j < len(prev_runs) and prev_runs[j][1] + reach <= s:
                j += 1
            lbl = -1
            k = j
            while k < len(prev_runs) and prev_runs[k][0] < e + reach:
                root = find(prev_runs[k][2])
                if lbl < 0:
                    lbl = root
                elif root != lbl:
                    a, b = (lbl, root) if lbl < root else (root, lbl)
                    parent[b] = a
                    lbl = a
                k += 1
            if lbl < 0:
                lbl = len(parent)
                parent.append(lbl)
            runs.append((s, e, lbl))
            all_runs.append((y, s, e, lbl))
        prev_runs = runs

    remap: dict[int, int] = {}
    sizes = [0]
    for y, s, e, lbl in all_runs:
        root = find(lbl)
        fid = remap.get(root)
        if fid is None:
            fid = len(sizes)
            remap[root] = fid
            sizes.append(0)
        labels[y, s:e] = fid
        sizes[fid] += e - s
    return LabelMap(w, h, labels, np.asarray(sizes, dtype=np.int64))


def remove_small_clusters(mask: BinaryMask, min_size: int, connectivity: int = 8) -> BinaryMask:
    """Drop foreground components smaller than ``min_size`` pixels."""
    if min_size < 0:
        raise ValueError("min_size must be >= 0")
    if min_size == 0:
        return mask.copy()
    lm = connected_components(mask, connectivity)
    keep = lm.component_sizes >= min_size
    keep[0] = False
    return keep[lm.labels]


def postprocess_pipeline(
    response: GrayImage,
    fov: BinaryMask,
    min_size: int = 11,
    n_bins: int = 256,
    connectivity: int = 8,
) -> BinaryMask:
    """Otsu threshold inside the FOV, binarize, remove small clusters."""
    threshold = otsu_threshold(response, fov, n_bins)
    bw = binarize(response, threshold, fov)
    return remove_small_clusters(bw, min_size, connectivity)
