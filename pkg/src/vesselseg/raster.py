"""Image containers, pixel-exact file I/O and elementwise utilities.

Images are plain numpy arrays throughout the package:

* RGB images: ``uint8`` arrays of shape ``(height, width, 3)``
* grayscale images: ``float64`` arrays of shape ``(height, width)``
* binary masks: ``bool`` arrays of shape ``(height, width)``

Coordinate convention shared by every module: ``x`` is the column index
growing rightward, ``y`` the row index growing downward; angles are
measured counterclockwise from +x in this grid.

Supported file formats are 8-bit PNG and binary PPM (P6) / PGM (P5).
Decoding is bit-exact: no color management, no gamma handling.
"""

from __future__ import annotations

import io
import os
import tempfile

import numpy as np
from PIL import Image, UnidentifiedImageError

# Conceptual aliases; functions document which flavour they expect.
RGBImage = np.ndarray
GrayImage = np.ndarray
BinaryMask = np.ndarray

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"

# PIL modes we refuse to interpret (spec'd formats are 8-bit gray/RGB only).
_MODE_REJECTIONS = {
    "P": "palette image",
    "PA": "palette image",
    "I": "16/32-bit image",
    "I;16": "16-bit image",
    "I;16B": "16-bit image",
    "I;16L": "16-bit image",
    "I;16N": "16-bit image",
    "F": "float image",
    "CMYK": "CMYK image",
    "RGBA": "image with alpha channel",
    "LA": "image with alpha channel",
    "RGBX": "extended RGB image",
    "YCbCr": "YCbCr image",
}


class RasterFormatError(ValueError):
    """Unsupported or malformed image file."""


def atomic_write_bytes(path, payload: bytes) -> None:
    """Write ``payload`` to ``path`` via a temp file + rename (no partial files)."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _read_file(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _netpbm_decode(data: bytes, path) -> tuple[str, np.ndarray]:
    """Decode binary PGM (P5) / PPM (P6). Returns (magic, uint8 array)."""
    magic = data[:2].decode("ascii", "replace")
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        if pos >= len(data):
            raise RasterFormatError(f"{path}: truncated netpbm header")
        ch = data[pos : pos + 1]
        if ch in b" \t\r\n":
            pos += 1
        elif ch == b"#":
            while pos < len(data) and data[pos : pos + 1] not in b"\r\n":
                pos += 1
        elif ch.isdigit():
            start = pos
            while pos < len(data) and data[pos : pos + 1].isdigit():
                pos += 1
            fields.append(int(data[start:pos]))
        else:
            raise RasterFormatError(f"{path}: malformed netpbm header")
    width, height, maxval = fields
    if maxval != 255:
        raise RasterFormatError(f"{path}: unsupported netpbm maxval {maxval} (8-bit only)")
    if width <= 0 or height <= 0:
        raise RasterFormatError(f"{path}: invalid netpbm dimensions {width}x{height}")
    pos += 1  # single whitespace byte separating header from raster data
    channels = 3 if magic == "P6" else 1
    need = width * height * channels
    raw = data[pos : pos + need]
    if len(raw) < need:
        raise RasterFormatError(f"{path}: truncated netpbm pixel stream")
    arr = np.frombuffer(raw, dtype=np.uint8)
    shape = (height, width, 3) if channels == 3 else (height, width)
    return magic, arr.reshape(shape).copy()


def _png_decode(path) -> Image.Image:
    try:
        img = Image.open(path)
        img.load()
    except UnidentifiedImageError as exc:
        raise RasterFormatError(f"{path}: not a decodable PNG") from exc
    except OSError as exc:
        raise RasterFormatError(f"{path}: truncated or corrupt stream ({exc})") from exc
    if img.mode in _MODE_REJECTIONS:
        raise RasterFormatError(f"{path}: unsupported format ({_MODE_REJECTIONS[img.mode]})")
    return img


def load_rgb(path) -> RGBImage:
    """Load an 8-bit RGB image from PNG or binary PPM (P6), bit-exact."""
    data = _read_file(path)
    if data[:2] == b"P6":
        return _netpbm_decode(data, path)[1]
    if data[:2] == b"P5":
        raise RasterFormatError(f"{path}: grayscale PGM where RGB expected")
    if data[:8] == _PNG_MAGIC:
        img = _png_decode(path)
        if img.mode != "RGB":
            raise RasterFormatError(f"{path}: expected 8-bit RGB, got mode {img.mode}")
        return np.asarray(img, dtype=np.uint8)
    raise RasterFormatError(f"{path}: unsupported file format (PNG/PPM only)")


def _load_gray_bytes(path) -> np.ndarray:
    """Byte-scale grayscale values (float64 in [0, 255]); RGB is channel-averaged."""
    data = _read_file(path)
    if data[:2] in (b"P5", b"P6"):
        magic, arr = _netpbm_decode(data, path)
        if magic == "P6":
            return arr.astype(np.float64).mean(axis=2)
        return arr.astype(np.float64)
    if data[:8] == _PNG_MAGIC:
        img = _png_decode(path)
        if img.mode == "1":  # 1-bit gray is losslessly widened to 8-bit
            img = img.convert("L")
        if img.mode == "L":
            return np.asarray(img, dtype=np.float64)
        if img.mode == "RGB":
            return np.asarray(img, dtype=np.float64).mean(axis=2)
        raise RasterFormatError(f"{path}: unsupported PNG mode {img.mode}")
    raise RasterFormatError(f"{path}: unsupported file format (PNG/PGM/PPM only)")


def load_gray(path) -> GrayImage:
    """Load a grayscale image scaled to [0, 1] (8-bit values divided by 255)."""
    return _load_gray_bytes(path) / 255.0


def load_mask(path, threshold: int = 127) -> BinaryMask:
    """Load a binary mask: true where the 8-bit gray value is strictly > threshold."""
    return _load_gray_bytes(path) > threshold


def _quantize(img: GrayImage) -> np.ndarray:
    # round-half-up on 255 * clamp(v, 0, 1)
    return np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def _encode_gray(arr: np.ndarray, path) -> bytes:
    ext = os.path.splitext(os.fspath(path))[1].lower()
    if ext == ".pgm":
        header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
        return header + arr.tobytes()
    buf = io.BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def save_gray(img: GrayImage, path) -> None:
    """Save a [0,1] grayscale image as 8-bit PNG (or PGM for *.pgm paths)."""
    if img.ndim != 2:
        raise ValueError("save_gray expects a 2-D image")
    atomic_write_bytes(path, _encode_gray(_quantize(img), path))


def save_mask(mask: BinaryMask, path) -> None:
    """Save a binary mask as 0/255 8-bit PNG (or PGM for *.pgm paths)."""
    if mask.ndim != 2:
        raise ValueError("save_mask expects a 2-D mask")
    arr = np.where(mask, np.uint8(255), np.uint8(0))
    atomic_write_bytes(path, _encode_gray(arr, path))


def invert(img: GrayImage) -> GrayImage:
    """Map each pixel v to 1 - v. Input must lie in [0, 1]."""
    if img.size and (img.min() < 0.0 or img.max() > 1.0):
        raise ValueError("invert expects values in [0, 1]")
    return 1.0 - img


def normalize01(img: GrayImage, region: BinaryMask) -> GrayImage:
    """Affinely map the min/max over ``region`` to 0/1; clamp outside pixels.

    A degenerate region (max == min) yields an all-zeros image.
    """
    if img.shape != region.shape:
        raise ValueError("image and region dimensions disagree")
    vals = img[region]
    if vals.size == 0:
        raise ValueError("normalize01 requires a nonempty region")
    lo = vals.min()
    hi = vals.max()
    if hi == lo:
        return np.zeros_like(img, dtype=np.float64)
    return np.clip((img - lo) / (hi - lo), 0.0, 1.0)


def shift_image(img: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Integer-shift a 2-D array: out[y, x] = img[y - dy, x - dx], zero fill."""
    out = np.zeros_like(img)
    h, w = img.shape
    y0, y1 = max(0, dy), min(h, h + dy)
    x0, x1 = max(0, dx), min(w, w + dx)
    if y0 < y1 and x0 < x1:
        out[y0:y1, x0:x1] = img[y0 - dy : y1 - dy, x0 - dx : x1 - dx]
    return out
