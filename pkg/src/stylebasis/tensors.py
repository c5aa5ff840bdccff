"""Dense tensor types, the SFT1 on-disk tensor format, and image I/O.

SFT1 layout (little-endian throughout):

    bytes 0..3    magic  b"SFT1"
    bytes 4..7    dtype code, uint32  (1 = float32, 2 = complex64 stored as
                  interleaved float32 pairs, real then imaginary)
    bytes 8..11   ndim, uint32
    then          ndim dims, uint32 each
    then          row-major payload, dims product * itemsize bytes

A write followed by a read is bit-exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    BadMagic,
    DecodeError,
    IoFailure,
    RangeViolation,
    ShapeMismatch,
    TruncatedPayload,
    UnsupportedDtype,
    UnsupportedFormat,
)

MAGIC = b"SFT1"
DTYPE_F32 = 1
DTYPE_C64 = 2

_CODE_TO_DTYPE = {DTYPE_F32: np.dtype("<f4"), DTYPE_C64: np.dtype("<c8")}


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FeatureMap:
    """One CNN layer activation: a dense (h, w, c) float32 grid, all finite."""

    data: np.ndarray
    layer_name: str = ""

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ShapeMismatch(f"feature map must be (h, w, c) with h,w,c >= 1, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise RangeViolation("feature map contains NaN or Inf")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def h(self) -> int:
        return self.data.shape[0]

    @property
    def w(self) -> int:
        return self.data.shape[1]

    @property
    def c(self) -> int:
        return self.data.shape[2]

    def matrix(self) -> np.ndarray:
        """Row-major (h*w, c) matricization; row x*w+y holds pixel (x, y)."""
        return self.data.reshape(self.h * self.w, self.c)

    def as_image(self, range_tag: str = "unit") -> "ImageTensor":
        if self.c != 3:
            raise ShapeMismatch(f"image view needs 3 channels, feature map has {self.c}")
        return ImageTensor(self.data, range_tag)


@dataclass(frozen=True)
class ImageTensor:
    """RGB image as (height, width, 3) float32.

    range_tag "unit" means every scalar lies in [0, 1]; "centered" means a
    preprocessing mean has been subtracted and no range is enforced.
    """

    data: np.ndarray
    range_tag: str = "unit"

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeMismatch(f"image must be (height, width, 3), got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise RangeViolation("image contains NaN or Inf")
        if self.range_tag not in ("unit", "centered"):
            raise RangeViolation(f"unknown range_tag {self.range_tag!r}")
        if self.range_tag == "unit" and (arr.min() < 0.0 or arr.max() > 1.0):
            raise RangeViolation("unit-range image has values outside [0, 1]")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def centered(self, mean) -> "ImageTensor":
        """Subtract a per-channel mean, yielding a centered-range image."""
        mean = np.asarray(mean, dtype=np.float32).reshape(1, 1, 3)
        return ImageTensor(self.data - mean, "centered")


# --- SFT1 read / write --------------------------------------------------------


def write_array(arr: np.ndarray, path) -> None:
    """Write a float32 or complex64 ndarray as an SFT1 file."""
    arr = np.asarray(arr)
    if arr.dtype == np.float32:
        code = DTYPE_F32
    elif arr.dtype == np.complex64:
        code = DTYPE_C64
    else:
        raise UnsupportedDtype(f"SFT1 stores float32 or complex64, got {arr.dtype}")
    header = MAGIC + struct.pack("<II", code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    payload = np.ascontiguousarray(arr).astype(_CODE_TO_DTYPE[code], copy=False).tobytes()
    try:
        Path(path).write_bytes(header + payload)
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e


def read_array(path) -> np.ndarray:
    """Read an SFT1 file into an ndarray with dims exactly as stored."""
    try:
        blob = Path(path).read_bytes()
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e
    if len(blob) < 4 or blob[:4] != MAGIC:
        raise BadMagic(f"{path}: not an SFT1 file")
    if len(blob) < 12:
        raise TruncatedPayload(f"{path}: header cut short")
    code, ndim = struct.unpack_from("<II", blob, 4)
    if code not in _CODE_TO_DTYPE:
        raise UnsupportedDtype(f"{path}: unknown dtype code {code}")
    if len(blob) < 12 + 4 * ndim:
        raise TruncatedPayload(f"{path}: dims cut short")
    dims = struct.unpack_from(f"<{ndim}I", blob, 12)
    dtype = _CODE_TO_DTYPE[code]
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    got = len(blob) - 12 - 4 * ndim
    if got != expected:
        raise TruncatedPayload(f"{path}: payload is {got} bytes, dims require {expected}")
    arr = np.frombuffer(blob, dtype=dtype, count=-1, offset=12 + 4 * ndim).reshape(dims)
    return arr.copy()


def write_tensor(t, path) -> None:
    """Write a FeatureMap, ImageTensor, or raw ndarray as SFT1."""
    arr = t.data if isinstance(t, (FeatureMap, ImageTensor)) else t
    write_array(arr, path)


def read_tensor(path, layer_name: str = "") -> FeatureMap:
    """Read a rank-3 real SFT1 file as a FeatureMap.

    Use read_image_tensor for image payloads and read_array for raw access
    (other ranks, complex spectra).
    """
    arr = read_array(path)
    if arr.ndim != 3 or arr.dtype != np.float32:
        raise UnsupportedDtype(
            f"{path}: expected rank-3 float32 tensor, got rank-{arr.ndim} {arr.dtype}; use read_array"
        )
    return FeatureMap(arr, layer_name)


def read_image_tensor(path, range_tag: str = "unit") -> ImageTensor:
    arr = read_array(path)
    if arr.ndim != 3 or arr.dtype != np.float32:
        raise UnsupportedDtype(f"{path}: image tensors are rank-3 float32")
    return ImageTensor(arr, range_tag)


# --- image I/O ------------------------------------------------------------------

_ALLOWED_IMAGE_FORMATS = {"PNG", "PPM"}


def bilinear_resize(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample (h, w, c) onto an (out_h, out_w) grid.

    Output pixel centers map to input coordinates (i + 0.5) * scale - 0.5,
    clamped at the borders, so affine images are reproduced exactly away
    from clamping.
    """
    h, w = arr.shape[:2]
    ys = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    xs = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    a = arr[np.ix_(y0, x0)]
    b = arr[np.ix_(y0, x1)]
    c = arr[np.ix_(y1, x0)]
    d = arr[np.ix_(y1, x1)]
    out = (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * c + fx * d)
    return out.astype(arr.dtype, copy=False)


def load_image(path, target_size: tuple[int, int] | None = None) -> ImageTensor:
    """Load a PNG or portable-pixmap file as a unit-range RGB tensor."""
    try:
        with Image.open(path) as im:
            fmt = im.format
            if fmt not in _ALLOWED_IMAGE_FORMATS:
                raise UnsupportedFormat(f"{path}: format {fmt} not supported (PNG or PPM only)")
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.float32) / 255.0
    except UnidentifiedImageError as e:
        raise DecodeError(f"{path}: not a decodable image") from e
    except OSError as e:
        raise DecodeError(f"{path}: {e}") from e
    if target_size is not None:
        th, tw = target_size
        if th < 1 or tw < 1:
            raise ShapeMismatch(f"target size must be positive, got {target_size}")
        arr = bilinear_resize(arr.astype(np.float64), th, tw).astype(np.float32)
        arr = np.clip(arr, 0.0, 1.0)
    return ImageTensor(arr, "unit")


def save_image(img: ImageTensor, path) -> None:
    """Write a unit-range image as 8-bit PNG; reload differs by at most 1/255."""
    if img.range_tag != "unit":
        raise RangeViolation("save_image needs a unit-range image; de-normalize first")
    quant = np.round(img.data * 255.0).astype(np.uint8)
    try:
        Image.fromarray(quant, mode="RGB").save(path, format="PNG")
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e
