"""FOV-restricted confusion statistics, derived metrics, ROC/AUC and
per-dataset aggregation.

Metrics whose denominator vanishes are reported as ``None`` (absent), not
coerced to 0, so aggregation is never silently biased.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .raster import BinaryMask, GrayImage

METRIC_NAMES = ("sen", "spe", "acc", "auc", "kappa", "mcc")


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricsReport:
    sen: float | None
    spe: float | None
    acc: float | None
    kappa: float | None
    mcc: float | None
    auc: float | None = None

    def get(self, name: str) -> float | None:
        return getattr(self, name)

    def with_auc(self, auc: float) -> "MetricsReport":
        return replace(self, auc=auc)


@dataclass(frozen=True)
class AggregateReport:
    """Per-metric mean and sample std (n-1) over the defined entries."""

    reports: tuple
    mean: dict
    std: dict
    excluded: dict


def confusion(pred: BinaryMask, gt: BinaryMask, fov: BinaryMask) -> Confusion:
    """Pixel counts over the FOV only: tp/fp/fn/tn of pred against gt."""
    if not (pred.shape == gt.shape == fov.shape):
        raise ValueError("prediction, ground truth and FOV dimensions disagree")
    p = pred[fov]
    g = gt[fov]
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    tn = int(np.count_nonzero(~p & ~g))
    return Confusion(tp=tp, fp=fp, tn=tn, fn=fn)


def metrics(c: Confusion) -> MetricsReport:
    """Sensitivity, specificity, accuracy, Cohen's kappa and Matthews
    correlation from a confusion; zero-denominator metrics come back None."""
    n = c.n
    if n <= 0:
        raise ValueError("metrics require a nonempty confusion")
    tp, fp, tn, fn = c.tp, c.fp, c.tn, c.fn
    sen = tp / (tp + fn) if tp + fn > 0 else None
    spe = tn / (tn + fp) if tn + fp > 0 else None
    acc = (tp + tn) / n
    p_obs = acc
    p_exp = ((tp + fp) * (tp + fn) + (fn + tn) * (fp + tn)) / (n * n)
    kappa = (p_obs - p_exp) / (1.0 - p_exp) if p_exp != 1.0 else None
    mcc_den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    mcc = (tp * tn - fp * fn) / math.sqrt(mcc_den) if mcc_den > 0 else None
    return MetricsReport(sen=sen, spe=spe, acc=acc, kappa=kappa, mcc=mcc)


def roc_auc(
    response: GrayImage,
    gt: BinaryMask,
    fov: BinaryMask,
    n_thresholds: int = 256,
) -> tuple[float, list]:
    """Threshold-sweep ROC: binarize at j/n for j = 0..n with strict >,
    collect (FPR, TPR) plus the (0,0) and (1,1) endpoints, integrate by
    trapezoid. Requires both classes present inside the FOV."""
    if not (response.shape == gt.shape == fov.shape):
        raise ValueError("response, ground truth and FOV dimensions disagree")
    if n_thresholds < 1:
        raise ValueError("n_thresholds must be >= 1")
    vals = response[fov]
    if vals.size and (vals.min() < 0.0 or vals.max() > 1.0):
        raise ValueError("roc_auc expects a [0, 1] response")
    pos = np.sort(response[fov & gt])
    neg = np.sort(response[fov & ~gt])
    if pos.size == 0 or neg.size == 0:
        raise ValueError("roc_auc undefined: single-class ground truth inside FOV")
    thresholds = np.arange(n_thresholds + 1, dtype=np.float64) / n_thresholds
    tpr = 1.0 - np.searchsorted(pos, thresholds, side="right") / pos.size
    fpr = 1.0 - np.searchsorted(neg, thresholds, side="right") / neg.size
    points = sorted(zip(fpr.tolist(), tpr.tolist())) + [(0.0, 0.0), (1.0, 1.0)]
    points.sort()
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    return float(np.trapezoid(ys, xs)), points


def aggregate(reports: list) -> AggregateReport:
    """Mean and sample standard deviation per metric; undefined entries are
    excluded per metric and counted."""
    if not reports:
        raise ValueError("aggregate requires at least one report")
    mean: dict = {}
    std: dict = {}
    excluded: dict = {}
    for name in METRIC_NAMES:
        defined = [r.get(name) for r in reports if r.get(name) is not None]
        excluded[name] = len(reports) - len(defined)
        mean[name] = float(np.mean(defined)) if defined else None
        std[name] = float(np.std(defined, ddof=1)) if len(defined) >= 2 else None
    return AggregateReport(tuple(reports), mean, std, excluded)


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"


def metrics_csv(rows: list, agg: AggregateReport) -> str:
    """CSV text: header, one row per (case_id, report), then mean/std rows."""
    order = ("sen", "spe", "acc", "auc", "kappa", "mcc")
    lines = ["image," + ",".join(order)]
    for case_id, report in rows:
        lines.append(case_id + "," + ",".join(_fmt(report.get(m)) for m in order))
    lines.append("mean," + ",".join(_fmt(agg.mean[m]) for m in order))
    lines.append("std," + ",".join(_fmt(agg.std[m]) for m in order))
    return "\n".join(lines) + "\n"
