"""Per-superpixel 13x13 patches and the 185-dimensional oriented texture descriptor.

The descriptor resamples a patch along 13 parallel lines in each of 8
orientations (0, 22.5, ..., 157.5 degrees), takes the RGB step magnitudes
between successive samples and pools them into a 23-bin histogram per
orientation, each step voting with its own magnitude.  A final entry holds
the luminance standard deviation, and the whole vector is L1-normalised.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from automatte.segmentation import SuperpixelMap

PATCH = 13
HALF = PATCH // 2
N_ORIENT = 8
N_BINS = 23
DIM = N_ORIENT * N_BINS + 1  # 185
MAX_STEP = 441.7  # just above 255 * sqrt(3)
BIN_WIDTH = MAX_STEP / N_BINS
_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class Patch:
    pixels: np.ndarray  # (13, 13, 3) float64 RGB
    label: int
    anchor: tuple[int, int]  # (x, y) of the top-left sample, may lie outside the image


def _snap(v: float) -> float:
    for exact in (-1.0, 0.0, 1.0):
        if abs(v - exact) < 1e-12:
            return exact
    return v


def _sampling_plan():
    """Bilinear gather indices/weights, each shaped (8, 13 lines, 13 samples)."""
    t = np.arange(PATCH, dtype=np.float64) - HALF
    y0s, x0s, y1s, x1s, ws = [], [], [], [], []
    for k in range(N_ORIENT):
        theta = k * math.pi / N_ORIENT
        ux, uy = _snap(math.cos(theta)), _snap(math.sin(theta))
        nx, ny = -uy, ux
        # lines indexed by offset o along the normal, samples by t along u
        xs = HALF + t[None, :] * ux + t[:, None] * nx
        ys = HALF + t[None, :] * uy + t[:, None] * ny
        xs = np.clip(xs, 0.0, PATCH - 1.0)
        ys = np.clip(ys, 0.0, PATCH - 1.0)
        x0 = np.floor(xs).astype(np.intp)
        y0 = np.floor(ys).astype(np.intp)
        fx = xs - x0
        fy = ys - y0
        x1 = np.minimum(x0 + 1, PATCH - 1)
        y1 = np.minimum(y0 + 1, PATCH - 1)
        y0s.append(y0)
        x0s.append(x0)
        y1s.append(y1)
        x1s.append(x1)
        ws.append(np.stack([(1 - fy) * (1 - fx), (1 - fy) * fx, fy * (1 - fx), fy * fx]))
    return (np.array(y0s), np.array(x0s), np.array(y1s), np.array(x1s), np.stack(ws, axis=1))


_Y0, _X0, _Y1, _X1, _W = _sampling_plan()


def extract_patch(img: np.ndarray, sp: SuperpixelMap, label: int) -> Patch:
    """13x13 window centred on the rounded centroid, edge-replicated at borders."""
    if not 0 <= label < sp.n_labels:
        raise KeyError(f"unknown superpixel label {label}")
    cx, cy = sp.centroids[label]
    x = int(math.floor(cx + 0.5))
    y = int(math.floor(cy + 0.5))
    h, w = img.shape[:2]
    rows = np.clip(np.arange(y - HALF, y + HALF + 1), 0, h - 1)
    cols = np.clip(np.arange(x - HALF, x + HALF + 1), 0, w - 1)
    pix = np.asarray(img, dtype=np.float64)[np.ix_(rows, cols)]
    return Patch(pixels=pix, label=label, anchor=(x - HALF, y - HALF))


def extract_patches(img: np.ndarray, sp: SuperpixelMap) -> np.ndarray:
    """All superpixel patches stacked as (K, 13, 13, 3)."""
    h, w = img.shape[:2]
    centers = np.floor(sp.centroids + 0.5).astype(np.intp)
    off = np.arange(PATCH) - HALF
    rows = np.clip(centers[:, 1, None] + off, 0, h - 1)
    cols = np.clip(centers[:, 0, None] + off, 0, w - 1)
    img = np.asarray(img, dtype=np.float64)
    return img[rows[:, :, None], cols[:, None, :]]


def otc_descriptors(patches: np.ndarray) -> np.ndarray:
    """Descriptors for a stack of patches (K, 13, 13, 3) -> (K, 185)."""
    p = np.asarray(patches, dtype=np.float64)
    if p.ndim == 3:
        p = p[None]
    if p.shape[1:] != (PATCH, PATCH, 3):
        raise ValueError(f"expected (K, 13, 13, 3) patches, got {p.shape}")
    # shifting by the per-channel minimum is exact for integer-valued patches,
    # which makes the descriptor exactly invariant to additive offsets
    p = p - p.min(axis=(1, 2), keepdims=True)
    samples = (
        _W[0][..., None] * p[:, _Y0, _X0]
        + _W[1][..., None] * p[:, _Y0, _X1]
        + _W[2][..., None] * p[:, _Y1, _X0]
        + _W[3][..., None] * p[:, _Y1, _X1]
    )  # (K, 8, 13, 13, 3)
    steps = np.diff(samples, axis=3)
    mags = np.sqrt((steps * steps).sum(-1)).reshape(p.shape[0], N_ORIENT, -1)
    bins = np.minimum((mags / BIN_WIDTH).astype(np.intp), N_BINS - 1)
    hist = np.zeros((p.shape[0], N_ORIENT, N_BINS))
    kk, oo, _ = np.indices(bins.shape)
    np.add.at(hist, (kk, oo, bins), mags)
    lum = p @ _LUMA
    out = np.concatenate([hist.reshape(p.shape[0], -1), lum.reshape(p.shape[0], -1).std(axis=1)[:, None]], axis=1)
    total = out.sum(axis=1, keepdims=True)
    np.divide(out, total, out=out, where=total > 0)
    return out


def otc_descriptor(patch) -> np.ndarray:
    """Descriptor of a single patch (a :class:`Patch` or a (13, 13, 3) array)."""
    pixels = patch.pixels if isinstance(patch, Patch) else patch
    return otc_descriptors(np.asarray(pixels)[None])[0]


def save_descriptor_table(desc: np.ndarray, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["label"] + [f"f{i}" for i in range(DIM)])
        for i, row in enumerate(desc):
            wr.writerow([i] + [f"{v:.8g}" for v in row])
