"""Image containers, sRGB/CIELAB conversion and lossless image file I/O.

Rasters are plain numpy arrays:

* RGB raster: ``(H, W, 3)`` ``uint8``
* Lab raster: ``(H, W, 3)`` ``float64`` with L in [0, 100]
* scalar field: ``(H, W)`` ``float64``
"""
from __future__ import annotations

import io
import os
import struct
import zlib
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

MIN_SIDE = 13

# sRGB primaries, D65 white (IEC 61966-2-1)
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
_WHITE_D65 = _RGB_TO_XYZ.sum(axis=1)

_LAB_EPS = 216.0 / 24389.0
_LAB_KAPPA = 24389.0 / 27.0


class RasterError(Exception):
    """Base class for image I/O failures."""


class MissingFileError(RasterError, FileNotFoundError):
    pass


class UnsupportedFormatError(RasterError):
    pass


class CorruptImageError(RasterError):
    pass


class ContractViolation(RasterError, ValueError):
    """A value handed to a writer breaks the documented range contract."""


def check_rgb(img: np.ndarray, min_side: int = MIN_SIDE) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) raster, got shape {img.shape}")
    if img.dtype != np.uint8:
        raise ValueError(f"expected uint8 raster, got {img.dtype}")
    h, w = img.shape[:2]
    if h < min_side or w < min_side:
        raise ValueError(f"raster {w}x{h} is smaller than the {min_side}x{min_side} minimum")
    return img


# ---------------------------------------------------------------------------
# reading

def _read_pnm(data: bytes, path: str) -> np.ndarray:
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise UnsupportedFormatError(f"{path}: only binary PGM (P5) / PPM (P6) are supported")
    fields: list[bytes] = []
    pos = 2
    n = len(data)
    while len(fields) < 3:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise CorruptImageError(f"{path}: truncated PNM header")
        fields.append(data[start:pos])
    if pos >= n or not data[pos : pos + 1].isspace():
        raise CorruptImageError(f"{path}: malformed PNM header")
    pos += 1
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise CorruptImageError(f"{path}: non-numeric PNM header field") from exc
    if width <= 0 or height <= 0 or not 0 < maxval < 65536:
        raise CorruptImageError(f"{path}: invalid PNM dimensions or maxval")
    channels = 3 if magic == b"P6" else 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height * channels
    if len(data) - pos < count * dtype.itemsize:
        raise CorruptImageError(f"{path}: PNM pixel data truncated")
    arr = np.frombuffer(data, dtype=dtype, count=count, offset=pos).reshape(height, width, channels)
    if maxval > 255:
        arr = (arr.astype(np.uint32) // 257).astype(np.uint8)
    return arr.astype(np.uint8)


def _png_bit_depth(data: bytes) -> int:
    # IHDR is always the first chunk: signature(8) len(4) type(4) w(4) h(4) depth(1)
    if len(data) < 26 or data[12:16] != b"IHDR":
        raise CorruptImageError("PNG header missing IHDR")
    return data[24]


def _read_png16(data: bytes, path: str) -> np.ndarray:
    import cv2

    arr = cv2.imdecode(np.frombuffer(data, np.uint8), cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise CorruptImageError(f"{path}: cannot decode 16-bit PNG")
    if arr.ndim == 3:
        arr = arr[..., [2, 1, 0, 3][: arr.shape[2]]]  # BGR(A) -> RGB(A)
    else:
        arr = arr[..., None]
    return (arr.astype(np.uint32) // 257).astype(np.uint8)


def _read_png(data: bytes, path: str) -> np.ndarray:
    if _png_bit_depth(data) == 16:
        arr = _read_png16(data, path)
        if arr.shape[2] in (2, 4):
            arr = arr[..., :-1]
        return arr
    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
            if im.mode in ("I;16", "I;16B", "I"):
                arr = np.asarray(im).astype(np.uint32)
                return (arr // 257).astype(np.uint8)[..., None]
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGBA" if "A" in im.mode or im.mode == "P" else "RGB")
            arr = np.asarray(im)
    except (OSError, SyntaxError, zlib.error, struct.error) as exc:
        raise CorruptImageError(f"{path}: {exc}") from exc
    if arr.ndim == 2:
        arr = arr[..., None]
    if arr.shape[2] == 4:
        arr = arr[..., :3]
    return arr


def _read_any(path) -> np.ndarray:
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except FileNotFoundError as exc:
        raise MissingFileError(f"{path}: no such file") from exc
    except IsADirectoryError as exc:
        raise MissingFileError(f"{path}: is a directory") from exc
    if data.startswith(b"\x89PNG\r\n\x1a\n"):
        return _read_png(data, path)
    if data[:1] == b"P" and data[1:2] in b"1234567":
        return _read_pnm(data, path)
    try:
        with Image.open(io.BytesIO(data)) as im:
            fmt = im.format
    except (UnidentifiedImageError, OSError):
        fmt = None
    raise UnsupportedFormatError(f"{path}: unsupported image format {fmt or 'unknown'}")


def load_rgb(path) -> np.ndarray:
    """Read a PNG or binary PPM/PGM as an ``(H, W, 3)`` uint8 raster.

    Grayscale sources are replicated to three channels, alpha is dropped and
    16-bit samples are reduced with ``v // 257``.
    """
    arr = _read_any(path)
    if arr.shape[2] == 1:
        arr = np.repeat(arr, 3, axis=2)
    return np.ascontiguousarray(arr)


def load_gray(path) -> np.ndarray:
    """Read an 8-bit single channel image as raw uint8 bytes ``(H, W)``."""
    arr = _read_any(path)
    if arr.shape[2] != 1:
        raise UnsupportedFormatError(f"{os.fspath(path)}: expected a single-channel image")
    return np.ascontiguousarray(arr[..., 0])


def load_field(path) -> np.ndarray:
    """Read a grayscale image as a scalar field in [0, 1]."""
    return load_gray(path).astype(np.float64) / 255.0


# ---------------------------------------------------------------------------
# writing

def field_to_bytes(field: np.ndarray) -> np.ndarray:
    field = np.asarray(field, dtype=np.float64)
    if field.ndim != 2:
        raise ValueError(f"expected a 2-D field, got shape {field.shape}")
    if not np.all(np.isfinite(field)):
        raise ContractViolation("field contains NaN or Inf")
    lo, hi = field.min(), field.max()
    if lo < 0.0 or hi > 1.0:
        raise ContractViolation(f"field values must lie in [0, 1], got [{lo!r}, {hi!r}]")
    # round half up: 0.5 -> 128
    return np.floor(field * 255.0 + 0.5).astype(np.uint8)


def _write_bytes_image(arr: np.ndarray, path) -> None:
    path = Path(path)
    suffix = path.suffix.lower()
    try:
        if suffix in (".pgm", ".ppm", ".pnm"):
            save_pnm(arr, path)
            return
        mode = "L" if arr.ndim == 2 else "RGB"
        Image.fromarray(np.ascontiguousarray(arr), mode=mode).save(path, format="PNG")
    except OSError as exc:
        raise RasterError(f"{path}: cannot write ({exc})") from exc


def save_gray(field: np.ndarray, path) -> None:
    """Write a [0, 1] field as 8-bit grayscale, byte = round(value * 255)."""
    _write_bytes_image(field_to_bytes(field), path)


def save_gray_bytes(arr: np.ndarray, path) -> None:
    arr = np.asarray(arr)
    if arr.dtype != np.uint8 or arr.ndim != 2:
        raise ValueError("expected a 2-D uint8 array")
    _write_bytes_image(arr, path)


def save_rgb(img: np.ndarray, path) -> None:
    img = np.asarray(img)
    if img.dtype != np.uint8 or img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("expected an (H, W, 3) uint8 raster")
    _write_bytes_image(img, path)


def save_pnm(arr: np.ndarray, path) -> None:
    """Write P5 (2-D) or P6 (H, W, 3); uint16 data gets maxval 65535."""
    arr = np.asarray(arr)
    if arr.ndim == 2:
        magic, h, w = b"P5", arr.shape[0], arr.shape[1]
    elif arr.ndim == 3 and arr.shape[2] == 3:
        magic, h, w = b"P6", arr.shape[0], arr.shape[1]
    else:
        raise ValueError(f"cannot write shape {arr.shape} as PNM")
    if arr.dtype == np.uint16:
        maxval, payload = 65535, arr.astype(">u2").tobytes()
    elif arr.dtype == np.uint8:
        maxval, payload = 255, arr.tobytes()
    else:
        raise ValueError(f"PNM needs uint8 or uint16 data, got {arr.dtype}")
    with open(path, "wb") as fh:
        fh.write(b"%s\n%d %d\n%d\n" % (magic, w, h, maxval))
        fh.write(payload)


# ---------------------------------------------------------------------------
# color

def _srgb_to_linear(c: np.ndarray) -> np.ndarray:
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _linear_to_srgb(c: np.ndarray) -> np.ndarray:
    c = np.clip(c, 0.0, 1.0)
    return np.where(c <= 0.0031308, 12.92 * c, 1.055 * c ** (1.0 / 2.4) - 0.055)


def rgb_to_lab(img: np.ndarray) -> np.ndarray:
    """sRGB (8-bit) to CIELAB under D65, returns float64 ``(H, W, 3)``."""
    img = np.asarray(img)
    rgb = _srgb_to_linear(img.astype(np.float64) / 255.0)
    xyz = rgb @ _RGB_TO_XYZ.T
    t = xyz / _WHITE_D65
    f = np.where(t > _LAB_EPS, np.cbrt(t), (_LAB_KAPPA * t + 16.0) / 116.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def lab_to_rgb(lab: np.ndarray) -> np.ndarray:
    """Inverse of :func:`rgb_to_lab`, returns float RGB in [0, 1] (unrounded)."""
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    f = np.stack([fx, fy, fz], axis=-1)
    t = np.where(f ** 3 > _LAB_EPS, f ** 3, (116.0 * f - 16.0) / _LAB_KAPPA)
    xyz = t * _WHITE_D65
    return _linear_to_srgb(xyz @ _XYZ_TO_RGB.T)


def luminance_gray(lab: np.ndarray) -> np.ndarray:
    """Grayscale used by frequency-domain stages: L / 100."""
    return np.asarray(lab)[..., 0] / 100.0


# ---------------------------------------------------------------------------
# scalar fields

# ranges below this (relative to the field magnitude) are round-off, not signal
CONSTANT_RTOL = 1e-9


def normalize(field: np.ndarray) -> np.ndarray:
    """Affine rescale to [0, 1]; a constant field maps to all zeros."""
    field = np.asarray(field, dtype=np.float64)
    if not np.all(np.isfinite(field)):
        raise ValueError("cannot normalize a field containing NaN or Inf")
    if field.size == 0:
        return field.copy()
    lo = field.min()
    hi = field.max()
    span = hi - lo
    if span <= CONSTANT_RTOL * max(1.0, abs(lo), abs(hi)):
        return np.zeros_like(field)
    out = (field - lo) / span
    np.clip(out, 0.0, 1.0, out=out)
    return out
