"""Pure numpy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_ckernels.pyx``.
The SLIC kernels evaluate the same floating point expressions in the same
order as the compiled versions, so both backends produce identical labels.
"""
from __future__ import annotations

import math

import numpy as np

# (dy, dx) offsets of the upper half of the 5x5 coupling stencil of a 3x3 window
UPPER_OFFSETS = [(0, 0), (0, 1), (0, 2)] + [(dy, dx) for dy in (1, 2) for dx in range(-2, 3)]
_OFFSET_INDEX = {o: i for i, o in enumerate(UPPER_OFFSETS)}


def slic_window(cy: float, cx: float, step: float, h: int, w: int) -> tuple[int, int, int, int]:
    y0 = max(0, int(math.floor(cy - step)))
    y1 = min(h - 1, int(math.floor(cy + step)))
    x0 = max(0, int(math.floor(cx - step)))
    x1 = min(w - 1, int(math.floor(cx + step)))
    return y0, y1, x0, x1


def slic_assign(lab, centers, step, spatial_weight, labels, dist):
    """One SLIC assignment sweep, updating ``labels``/``dist`` in place.

    ``centers`` rows are (L, a, b, y, x).  Centers are visited in index order
    and a pixel only moves on a strictly smaller distance, so equal distances
    resolve to the smaller label.
    """
    h, w = lab.shape[:2]
    dist[...] = np.inf
    for k in range(centers.shape[0]):
        cl, ca, cb, cy, cx = centers[k]
        y0, y1, x0, x1 = slic_window(cy, cx, step, h, w)
        if y0 > y1 or x0 > x1:
            continue
        win = lab[y0 : y1 + 1, x0 : x1 + 1]
        dl = win[..., 0] - cl
        da = win[..., 1] - ca
        db = win[..., 2] - cb
        dy = (np.arange(y0, y1 + 1, dtype=np.float64) - cy)[:, None]
        dx = (np.arange(x0, x1 + 1, dtype=np.float64) - cx)[None, :]
        d = dl * dl + da * da + db * db + (dy * dy + dx * dx) * spatial_weight
        dwin = dist[y0 : y1 + 1, x0 : x1 + 1]
        better = d < dwin
        dwin[better] = d[better]
        labels[y0 : y1 + 1, x0 : x1 + 1][better] = k


def slic_accumulate(lab, labels, n_labels):
    """Per-label sums of (L, a, b, y, x) in raster order, plus pixel counts."""
    h, w = labels.shape
    flat = labels.ravel()
    ok = flat >= 0
    idx = flat[ok]
    sums = np.zeros((n_labels, 5))
    feats = [
        lab[..., 0].ravel(),
        lab[..., 1].ravel(),
        lab[..., 2].ravel(),
        np.repeat(np.arange(h, dtype=np.float64), w),
        np.tile(np.arange(w, dtype=np.float64), h),
    ]
    for j, f in enumerate(feats):
        sums[:, j] = np.bincount(idx, weights=f[ok], minlength=n_labels)
    counts = np.bincount(idx, minlength=n_labels).astype(np.int64)
    return sums, counts


def _disk_offsets(radius):
    r2 = radius * radius
    return [(dy, dx) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1) if dy * dy + dx * dx <= r2]


def morph_disk(binary, radius, erode, n_threads=1):
    """Binary erosion/dilation with a Euclidean disk; outside the image is 0."""
    src = np.asarray(binary, dtype=bool)
    h, w = src.shape
    padded = np.zeros((h + 2 * radius, w + 2 * radius), dtype=bool)
    padded[radius : radius + h, radius : radius + w] = src
    out = np.ones((h, w), dtype=bool) if erode else np.zeros((h, w), dtype=bool)
    for dy, dx in _disk_offsets(radius):
        view = padded[radius + dy : radius + dy + h, radius + dx : radius + dx + w]
        if erode:
            out &= view
        else:
            out |= view
    return out.astype(np.uint8)


def window_laplacians(img, eps):
    """Per-window 9x9 blocks (I - F)^T (I - F) for every interior 3x3 window.

    Returns an array of shape (H-2, W-2, 9, 9).
    """
    h, w = img.shape[:2]
    win = np.lib.stride_tricks.sliding_window_view(img, (3, 3), axis=(0, 1))
    # (H-2, W-2, 3ch, 3, 3) -> (H-2, W-2, 9, 3)
    x = win.reshape(h - 2, w - 2, 3, 9).transpose(0, 1, 3, 2)
    x = np.concatenate([x, np.ones(x.shape[:-1] + (1,))], axis=-1)
    gram = np.einsum("...ki,...kj->...ij", x, x)
    reg = np.diag([eps, eps, eps, 0.0])
    inv = np.linalg.inv(gram + reg)
    f = np.einsum("...ik,...kl,...jl->...ij", x, inv, x)
    i_f = np.eye(9) - f
    m = np.einsum("...ki,...kj->...ij", i_f, i_f)
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def laplacian_bands(img, active, eps, chunk_rows=64):
    """Accumulate window blocks into the 13 upper stencil bands.

    ``bands[o, y, x]`` holds L[(y, x), (y + dy, x + dx)] for
    ``(dy, dx) = UPPER_OFFSETS[o]``.  Only windows flagged in ``active``
    (shape (H-2, W-2)) contribute.
    """
    h, w = img.shape[:2]
    active = np.asarray(active, dtype=bool)
    bands = np.zeros((len(UPPER_OFFSETS), h, w))
    pairs = []
    for a in range(9):
        ra, ca = divmod(a, 3)
        for b in range(9):
            rb, cb = divmod(b, 3)
            o = _OFFSET_INDEX.get((rb - ra, cb - ca))
            if o is not None:
                pairs.append((a, b, o, ra, ca))
    for r0 in range(0, h - 2, chunk_rows):
        r1 = min(h - 2, r0 + chunk_rows)
        act = active[r0:r1]
        if not act.any():
            continue
        blocks = window_laplacians(img[r0 : r1 + 2], eps) * act[..., None, None]
        for a, b, o, ra, ca in pairs:
            bands[o, r0 + ra : r1 + ra, ca : ca + w - 2] += blocks[..., a, b]
    return bands
