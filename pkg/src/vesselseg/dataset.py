"""DRIVE-layout dataset discovery.

Expects the standard directory convention with files pre-converted to PNG
(original stems kept)::

    <root>/training/images/21_training.png
    <root>/training/1st_manual/21_manual1.png
    <root>/training/mask/21_training_mask.png
    <root>/test/images/01_test.png
    <root>/test/1st_manual/01_manual1.png
    <root>/test/2nd_manual/01_manual2.png
    <root>/test/mask/01_test_mask.png
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path


class DatasetError(ValueError):
    """Missing directories or incomplete cases in a dataset tree."""


@dataclass(frozen=True)
class DriveCase:
    case_id: str
    image: Path
    fov_mask: Path
    gt_first: Path
    gt_second: Path | None = None

    def gt_for(self, observer: int) -> Path:
        if observer == 1:
            return self.gt_first
        if observer == 2:
            if self.gt_second is None:
                raise DatasetError(f"case {self.case_id}: no second-observer ground truth")
            return self.gt_second
        raise ValueError("observer must be 1 or 2")


_SPLIT_DIRS = {"train": "training", "test": "test"}


def index_drive(root, split: str) -> list:
    """Index one DRIVE split; every referenced file must exist."""
    if split not in _SPLIT_DIRS:
        raise ValueError("split must be 'train' or 'test'")
    base = Path(root) / _SPLIT_DIRS[split]
    images_dir = base / "images"
    gt_dir = base / "1st_manual"
    mask_dir = base / "mask"
    gt2_dir = base / "2nd_manual" if split == "test" else None
    for d in (base, images_dir, gt_dir, mask_dir) + ((gt2_dir,) if gt2_dir else ()):
        if not d.is_dir():
            raise DatasetError(f"missing directory: {d}")

    cases = []
    for image in sorted(images_dir.glob("*.png")):
        case_id = image.stem.split("_")[0]
        fov_mask = mask_dir / f"{image.stem}_mask.png"
        gt_first = gt_dir / f"{case_id}_manual1.png"
        gt_second = gt2_dir / f"{case_id}_manual2.png" if gt2_dir else None
        for required in (fov_mask, gt_first) + ((gt_second,) if gt_second else ()):
            if not required.is_file():
                raise DatasetError(f"incomplete case {case_id}: missing {required}")
        cases.append(
            DriveCase(
                case_id=case_id,
                image=image,
                fov_mask=fov_mask,
                gt_first=gt_first,
                gt_second=gt_second,
            )
        )
    if not cases:
        raise DatasetError(f"no images found under {images_dir}")
    if len({c.case_id for c in cases}) != len(cases):
        raise DatasetError(f"duplicate case ids under {images_dir}")
    return cases
