"""Retinal blood-vessel extraction.

Pipeline: top-hat based preprocessing of the inverted green channel,
bar-selective COSFIRE filtering pooled over orientations, Otsu
binarization inside the field of view with small-cluster removal, and
DRIVE-style FOV-restricted evaluation.
"""

from .bcosfire import BCosfireConfig, FilterTuple, TupleSet, respond
from .config import (
    ConfigError,
    EvaluationConfig,
    PipelineConfig,
    PostprocessConfig,
    default_config,
    parse_config,
    serialize_config,
)
from .dataset import DatasetError, DriveCase, index_drive
from .evaluation import (
    AggregateReport,
    Confusion,
    MetricsReport,
    aggregate,
    confusion,
    metrics,
    roc_auc,
)
from .pipeline import SegmentResult, evaluate_case, segment_image
from .postprocess import (
    LabelMap,
    binarize,
    connected_components,
    otsu_threshold,
    postprocess_pipeline,
    remove_small_clusters,
)
from .preprocess import (
    PreprocessConfig,
    PreprocessResult,
    StructuringElement,
    clahe,
    derive_fov_mask,
    fake_pad,
    gray_dilate,
    gray_erode,
    gray_open,
    green_channel,
    preprocess_pipeline,
    white_top_hat,
)
from .raster import (
    RasterFormatError,
    invert,
    load_gray,
    load_mask,
    load_rgb,
    normalize01,
    save_gray,
    save_mask,
)

__version__ = "0.1.0"
