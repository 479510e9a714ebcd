"""End-to-end segmentation and per-case evaluation shared by the CLI."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from . import bcosfire
from .config import PipelineConfig
from .dataset import DriveCase
from .evaluation import MetricsReport, confusion, metrics, roc_auc
from .postprocess import postprocess_pipeline
from .preprocess import PreprocessResult, preprocess_pipeline
from .raster import BinaryMask, GrayImage, RGBImage, load_mask, load_rgb


@dataclass(frozen=True)
class SegmentResult:
    mask: BinaryMask
    response: GrayImage
    fov: BinaryMask
    pre: PreprocessResult


def segment_image(img: RGBImage, fov: BinaryMask, cfg: PipelineConfig) -> SegmentResult:
    """Preprocess, filter and binarize one fundus image against its FOV."""
    pre = preprocess_pipeline(img, fov, cfg.preprocess)
    response = bcosfire.respond(pre.image, cfg.filter)
    mask = postprocess_pipeline(
        response,
        fov,
        min_size=cfg.postprocess.min_cluster,
        n_bins=cfg.postprocess.otsu_bins,
        connectivity=cfg.postprocess.connectivity,
    )
    return SegmentResult(mask=mask, response=response, fov=fov, pre=pre)


def evaluate_case(case: DriveCase, cfg: PipelineConfig, with_auc: bool) -> tuple[str, MetricsReport]:
    """Segment one dataset case and score it against its ground truth."""
    img = load_rgb(case.image)
    fov = load_mask(case.fov_mask)
    gt = load_mask(case.gt_for(cfg.evaluation.gt_observer))
    result = segment_image(img, fov, cfg)
    report = metrics(confusion(result.mask, gt, fov))
    if with_auc:
        auc, _ = roc_auc(result.response, gt, fov, cfg.evaluation.auc_thresholds)
        report = report.with_auc(auc)
    return case.case_id, report


def _case_worker(args) -> tuple[str, MetricsReport]:
    return evaluate_case(*args)


def evaluate_cases(cases: list, cfg: PipelineConfig, with_auc: bool, jobs: int = 1) -> list:
    """Evaluate cases (optionally in parallel); results come back in case order."""
    work = [(case, cfg, with_auc) for case in cases]
    if jobs <= 1 or len(cases) <= 1:
        return [_case_worker(item) for item in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_case_worker, work))
