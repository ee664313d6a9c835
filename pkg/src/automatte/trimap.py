"""Otsu binarisation, disk morphology and three-level trimap synthesis."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from automatte import kernels
from automatte.raster import load_gray, save_gray_bytes

BACKGROUND = 0
UNKNOWN = 1
FOREGROUND = 2

BG_BYTE = 0
FG_BYTE = 255
UNKNOWN_BYTE = 166  # round(0.65 * 255)


@dataclass(frozen=True)
class TrimapParams:
    erode_radius: int = 5
    dilate_radius: int = 10
    c: float = 0.65

    def __post_init__(self):
        if self.erode_radius < 1 or self.dilate_radius < 1:
            raise ValueError(f"radii must be >= 1, got ({self.erode_radius}, {self.dilate_radius})")
        if not 0.0 < self.c < 1.0:
            raise ValueError(f"c must satisfy 0 < c < 1, got {self.c}")


@dataclass
class Trimap:
    labels: np.ndarray  # (H, W) uint8 in {BACKGROUND, UNKNOWN, FOREGROUND}
    unknown_level: float = 0.65
    flags: set = field(default_factory=set)

    @property
    def shape(self):
        return self.labels.shape

    def value_field(self) -> np.ndarray:
        """C * SM_diff + SM_e, i.e. values in {0, C, 1}."""
        return np.choose(self.labels, [0.0, self.unknown_level, 1.0])

    def known_mask(self) -> np.ndarray:
        return self.labels != UNKNOWN

    def known_values(self) -> np.ndarray:
        return (self.labels == FOREGROUND).astype(np.float64)

    def fractions(self) -> tuple[float, float]:
        """(foreground fraction, unknown fraction)."""
        n = self.labels.size
        return float(np.count_nonzero(self.labels == FOREGROUND)) / n, float(np.count_nonzero(self.labels == UNKNOWN)) / n


class OtsuResult(NamedTuple):
    threshold: float  # in field units, t* / 255
    binary: np.ndarray  # (H, W) uint8 {0, 1}
    degenerate: bool
    bin: int  # t*, -1 when degenerate


def otsu_threshold_bin(hist: np.ndarray) -> int:
    """Bin t* maximising between-class variance for classes {<= t} and {> t}.

    Compared exactly in integers; ties go to the smallest t.  Returns -1 when
    no split separates two non-empty classes with distinct means.
    """
    hist = [int(v) for v in hist]
    total = sum(hist)
    total_sum = sum(i * h for i, h in enumerate(hist))
    best_t, best_num, best_den = -1, 0, 1
    n0 = s0 = 0
    for t in range(len(hist) - 1):
        n0 += hist[t]
        s0 += t * hist[t]
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        # sigma_b^2 * total^2 = (total*s0 - n0*S)^2 / (n0 * n1)
        num = (total * s0 - n0 * total_sum) ** 2
        den = n0 * n1
        if num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return best_t if best_num > 0 else -1


def quantize(field_: np.ndarray) -> np.ndarray:
    return np.floor(np.asarray(field_, dtype=np.float64) * 255.0 + 0.5).astype(np.intp)


def otsu_binarize(field_: np.ndarray) -> OtsuResult:
    q = quantize(field_)
    if q.min() < 0 or q.max() > 255:
        raise ValueError("otsu_binarize expects a field in [0, 1]")
    hist = np.bincount(q.ravel(), minlength=256)
    t = otsu_threshold_bin(hist)
    if t < 0:
        return OtsuResult(0.0, np.zeros(q.shape, dtype=np.uint8), True, -1)
    return OtsuResult(t / 255.0, (q > t).astype(np.uint8), False, t)


def morph_disk(binary: np.ndarray, radius: int, mode: str, n_threads: int = 1) -> np.ndarray:
    """Erode or dilate with the disk {dx^2 + dy^2 <= r^2}; outside the image counts as 0."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    if mode not in ("erode", "dilate"):
        raise ValueError(f"mode must be 'erode' or 'dilate', got {mode!r}")
    b = np.ascontiguousarray(np.asarray(binary) != 0, dtype=np.uint8)
    return kernels.morph_disk(b, int(radius), mode == "erode", n_threads)


def synthesize_trimap(binary: np.ndarray, params: TrimapParams = TrimapParams(), n_threads: int = 1, stages: dict | None = None) -> Trimap:
    """Foreground = eroded map, Unknown = dilated minus eroded, Background = rest.

    An empty erosion is retried with the erode radius halved; at radius 0 the
    binary map itself serves as the eroded map.
    """
    b = (np.asarray(binary) != 0).astype(np.uint8)
    flags = set()
    radius = params.erode_radius
    eroded = morph_disk(b, radius, "erode", n_threads)
    while not eroded.any() and radius > 0:
        radius //= 2
        flags.add("erosion_fallback")
        eroded = morph_disk(b, radius, "erode", n_threads) if radius > 0 else b.copy()
    if not eroded.any():
        flags.add("empty_foreground")
    dilated = morph_disk(b, params.dilate_radius, "dilate", n_threads)
    diff = dilated.astype(np.int8) - eroded.astype(np.int8)
    labels = np.full(b.shape, BACKGROUND, dtype=np.uint8)
    labels[diff > 0] = UNKNOWN
    labels[eroded > 0] = FOREGROUND
    if stages is not None:
        stages.update(eroded=eroded, dilated=dilated, difference=diff.astype(np.float64) * params.c, erode_radius_used=radius)
    return Trimap(labels=labels, unknown_level=params.c, flags=flags)


def unknown_byte(c: float) -> int:
    # kept inside the reader's Unknown window (64..192) so files always round-trip
    return int(min(192, max(64, np.floor(c * 255.0 + 0.5))))


def trimap_to_bytes(tm: Trimap) -> np.ndarray:
    lut = np.array([BG_BYTE, unknown_byte(tm.unknown_level), FG_BYTE], dtype=np.uint8)
    return lut[tm.labels]


def trimap_from_bytes(arr: np.ndarray, c: float = 0.65) -> Trimap:
    arr = np.asarray(arr)
    labels = np.full(arr.shape, UNKNOWN, dtype=np.uint8)
    labels[arr < 64] = BACKGROUND
    labels[arr > 192] = FOREGROUND
    return Trimap(labels=labels, unknown_level=c)


def save_trimap(tm: Trimap, path) -> None:
    save_gray_bytes(trimap_to_bytes(tm), path)


def load_trimap(path, c: float = 0.65) -> Trimap:
    return trimap_from_bytes(load_gray(path), c)
