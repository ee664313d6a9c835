"""SLIC superpixels with connectivity enforcement, plus per-region statistics."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from automatte import kernels
from automatte.raster import save_pnm


@dataclass(frozen=True)
class SuperpixelMap:
    labels: np.ndarray  # (H, W) int32, contiguous 0..K-1
    counts: np.ndarray  # (K,) pixels per label
    centroids: np.ndarray  # (K, 2) as (x, y)
    mean_lab: np.ndarray  # (K, 3)
    bboxes: np.ndarray  # (K, 4) inclusive (x0, y0, x1, y1)
    step: float = 0.0

    @property
    def n_labels(self) -> int:
        return int(self.counts.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape


def build_regions(labels: np.ndarray, lab: np.ndarray, step: float = 0.0) -> SuperpixelMap:
    """Compute region metadata for an existing contiguous label map."""
    labels = np.ascontiguousarray(labels, dtype=np.int32)
    h, w = labels.shape
    k = int(labels.max()) + 1
    flat = labels.ravel()
    counts = np.bincount(flat, minlength=k)
    if np.any(counts == 0):
        raise ValueError("label map is not contiguous: some label owns no pixel")
    ys, xs = np.divmod(np.arange(h * w), w)
    cx = np.bincount(flat, weights=xs, minlength=k) / counts
    cy = np.bincount(flat, weights=ys, minlength=k) / counts
    mean_lab = np.stack(
        [np.bincount(flat, weights=lab[..., c].ravel(), minlength=k) / counts for c in range(3)], axis=1
    )
    x0 = np.full(k, w, dtype=np.int64)
    y0 = np.full(k, h, dtype=np.int64)
    x1 = np.full(k, -1, dtype=np.int64)
    y1 = np.full(k, -1, dtype=np.int64)
    np.minimum.at(x0, flat, xs)
    np.minimum.at(y0, flat, ys)
    np.maximum.at(x1, flat, xs)
    np.maximum.at(y1, flat, ys)
    return SuperpixelMap(
        labels=labels,
        counts=counts.astype(np.int64),
        centroids=np.stack([cx, cy], axis=1),
        mean_lab=mean_lab,
        bboxes=np.stack([x0, y0, x1, y1], axis=1),
        step=step,
    )


def _gradient(lab: np.ndarray) -> np.ndarray:
    p = np.pad(lab, ((1, 1), (1, 1), (0, 0)), mode="edge")
    gx = p[1:-1, 2:] - p[1:-1, :-2]
    gy = p[2:, 1:-1] - p[:-2, 1:-1]
    return (gx * gx).sum(-1) + (gy * gy).sum(-1)


def _init_centers(lab: np.ndarray, n_target: int) -> tuple[np.ndarray, float]:
    h, w = lab.shape[:2]
    step = math.sqrt(h * w / n_target)
    ny = max(1, int(round(h / step)))
    nx = max(1, int(round(w / step)))
    grad = _gradient(lab)
    centers = []
    for i in range(ny):
        for j in range(nx):
            cy = (i + 0.5) * h / ny - 0.5
            cx = (j + 0.5) * w / nx - 0.5
            py, px = int(round(cy)), int(round(cx))
            best = grad[py, px]
            by, bx = cy, cx
            # move only on a strictly lower gradient; scan order breaks ties
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    yy, xx = py + dy, px + dx
                    if 0 <= yy < h and 0 <= xx < w and grad[yy, xx] < best:
                        best = grad[yy, xx]
                        by, bx = float(yy), float(xx)
            centers.append((*lab[int(round(by)), int(round(bx))], by, bx))
    return np.ascontiguousarray(centers, dtype=np.float64), step


def pixel_components(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """4-connected components of equal label, numbered in raster order of first pixel."""
    h, w = labels.shape
    idx = np.arange(h * w).reshape(h, w)
    right = labels[:, :-1] == labels[:, 1:]
    down = labels[:-1, :] == labels[1:, :]
    rows = np.concatenate([idx[:, :-1][right], idx[:-1, :][down]])
    cols = np.concatenate([idx[:, 1:][right], idx[1:, :][down]])
    graph = coo_matrix((np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(h * w, h * w))
    n, comp = connected_components(graph, directed=False)
    _, first = np.unique(comp, return_index=True)
    order = np.empty(n, dtype=np.int64)
    order[np.argsort(first, kind="stable")] = np.arange(n)
    return order[comp].reshape(h, w), n


def enforce_connectivity(labels: np.ndarray, min_size: float) -> np.ndarray:
    """Merge stray and undersized components into their largest neighbour.

    Each label keeps its largest 4-connected component (ties: first in raster
    order) if that component has at least ``min_size`` pixels.  Every other
    component, including pixels labelled -1, is absorbed by the adjacent
    region with the most pixels at the time it is merged.  The result is
    renumbered 0..K-1 in raster order.
    """
    comp, n = pixel_components(labels)
    flat_comp = comp.ravel()
    sizes = np.bincount(flat_comp, minlength=n)
    _, first = np.unique(flat_comp, return_index=True)
    comp_label = labels.ravel()[first]

    keep = np.zeros(n, dtype=bool)
    by_label: dict[int, int] = {}
    for c in range(n):
        lbl = int(comp_label[c])
        if lbl < 0:
            continue
        best = by_label.get(lbl)
        if best is None or sizes[c] > sizes[best]:
            by_label[lbl] = c
    for c in by_label.values():
        if sizes[c] >= min_size:
            keep[c] = True
    if not keep.any():
        keep[int(np.argmax(sizes))] = True

    a = np.concatenate([comp[:, :-1].ravel(), comp[:-1, :].ravel()])
    b = np.concatenate([comp[:, 1:].ravel(), comp[1:, :].ravel()])
    diff = a != b
    pairs = np.unique(np.stack([np.concatenate([a[diff], b[diff]]), np.concatenate([b[diff], a[diff]])], axis=1), axis=0)
    neighbours: list[list[int]] = [[] for _ in range(n)]
    for u, v in pairs:
        neighbours[u].append(int(v))

    group = np.where(keep, np.arange(n), -1)
    group_size = {int(c): int(sizes[c]) for c in np.flatnonzero(keep)}
    pending = [c for c in range(n) if not keep[c]]
    while pending:
        still = []
        for c in pending:
            best_g = -1
            for v in neighbours[c]:
                g = int(group[v])
                if g < 0:
                    continue
                if best_g < 0 or group_size[g] > group_size[best_g] or (group_size[g] == group_size[best_g] and g < best_g):
                    best_g = g
            if best_g < 0:
                still.append(c)
                continue
            group[c] = best_g
            group_size[best_g] += int(sizes[c])
        if len(still) == len(pending):  # pragma: no cover - components always touch a kept one
            raise RuntimeError("connectivity enforcement made no progress")
        pending = still

    merged = group[comp]
    _, first_px, inverse = np.unique(merged.ravel(), return_index=True, return_inverse=True)
    rank = np.empty(first_px.size, dtype=np.int64)
    rank[np.argsort(first_px, kind="stable")] = np.arange(first_px.size)
    return rank[inverse].reshape(labels.shape).astype(np.int32)


def slic_segment(
    lab: np.ndarray,
    n_target: int = 300,
    compactness: float = 10.0,
    iters: int = 10,
    seed: int = 0,
) -> SuperpixelMap:
    """Over-segment a Lab image into roughly ``n_target`` superpixels.

    Initialization is a deterministic grid, so ``seed`` never changes the
    result; it is accepted to keep the stage signatures uniform.
    """
    lab = np.ascontiguousarray(lab, dtype=np.float64)
    if lab.ndim != 3 or lab.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) Lab image, got {lab.shape}")
    h, w = lab.shape[:2]
    if h * w == 0:
        raise ValueError("cannot segment a zero-area image")
    if n_target < 1:
        raise ValueError("n_target must be >= 1")
    if n_target > h * w:
        raise ValueError(f"n_target={n_target} exceeds the pixel count {h * w}")
    if compactness <= 0:
        raise ValueError("compactness must be > 0")
    if iters < 1:
        raise ValueError("iters must be >= 1")

    centers, step = _init_centers(lab, n_target)
    spatial_weight = (compactness / step) ** 2
    labels = np.full((h, w), -1, dtype=np.int32)
    dist = np.empty((h, w))
    for _ in range(iters):
        labels.fill(-1)
        kernels.slic_assign(lab, centers, step, spatial_weight, labels, dist)
        sums, counts = kernels.slic_accumulate(lab, labels, centers.shape[0])
        nz = counts > 0
        centers[nz] = sums[nz] / counts[nz, None]
        centers = np.ascontiguousarray(centers)
    labels = enforce_connectivity(labels, step * step / 4.0)
    return build_regions(labels, lab, step)


def region_median(sp: SuperpixelMap, field: np.ndarray) -> np.ndarray:
    """Per-label median of ``field``; even counts take the lower middle value."""
    field = np.asarray(field, dtype=np.float64)
    if field.shape != sp.labels.shape:
        raise ValueError(f"field shape {field.shape} does not match label map {sp.labels.shape}")
    flat = sp.labels.ravel()
    vals = field.ravel()
    order = np.lexsort((vals, flat))
    starts = np.concatenate([[0], np.cumsum(sp.counts)[:-1]])
    return vals[order][starts + (sp.counts - 1) // 2]


def boundary_map(labels: np.ndarray) -> np.ndarray:
    """1.0 on pixels whose right or lower neighbour carries another label."""
    out = np.zeros(labels.shape)
    out[:, :-1] += labels[:, :-1] != labels[:, 1:]
    out[:-1, :] += labels[:-1, :] != labels[1:, :]
    return np.minimum(out, 1.0)


def save_label_pgm(sp: SuperpixelMap, path) -> None:
    if sp.n_labels > 65535:
        raise ValueError("too many labels for a 16-bit PGM")
    save_pnm(sp.labels.astype(np.uint16), path)


def save_region_table(sp: SuperpixelMap, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["label", "count", "cx", "cy", "L", "a", "b"])
        for i in range(sp.n_labels):
            wr.writerow(
                [i, int(sp.counts[i])]
                + [f"{v:.6f}" for v in (*sp.centroids[i], *sp.mean_lab[i])]
            )
