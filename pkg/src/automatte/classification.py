"""Foreground/background superpixel classification and the modified saliency map."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from automatte.segmentation import SuperpixelMap


@dataclass(frozen=True)
class ClassifyParams:
    t1_fraction: float = 0.30
    gamma: float = 1.0
    k: int = 5
    seed: int = 0
    dfb_agg: str = "mean"

    def __post_init__(self):
        if not 0.0 < self.t1_fraction < 1.0:
            raise ValueError(f"t1_fraction must satisfy 0 < t1_fraction < 1, got {self.t1_fraction}")
        if not self.gamma > 0.0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.dfb_agg not in ("mean", "min"):
            raise ValueError(f"dfb_agg must be 'mean' or 'min', got {self.dfb_agg!r}")


@dataclass
class LabelAssignment:
    foreground: np.ndarray  # (K,) bool
    reassigned: np.ndarray  # (K,) bool, True where the flag was flipped

    @property
    def background(self) -> np.ndarray:
        return ~self.foreground

    def __len__(self) -> int:
        return int(self.foreground.shape[0])


@dataclass
class ClusterModel:
    centers: np.ndarray  # (k, D)
    inertia: float
    assignment: np.ndarray  # (n,)
    history: list = field(default_factory=list)  # inertia after every Lloyd step
    n_iter: int = 0


def initial_labels(medians: np.ndarray, sm_max: float, params: ClassifyParams) -> LabelAssignment:
    """Foreground iff the region median strictly exceeds t1_fraction * max(SM)."""
    medians = np.asarray(medians, dtype=np.float64)
    t1 = params.t1_fraction * sm_max
    fg = medians > t1
    return LabelAssignment(foreground=fg, reassigned=np.zeros_like(fg))


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    d = x[:, None, :] - c[None, :, :]
    return (d * d).sum(-1)


def _farthest_point_init(x: np.ndarray, k: int) -> np.ndarray:
    norms = (x * x).sum(1)
    chosen = [int(np.flatnonzero(norms == norms.max())[0])]
    mind = _sq_dists(x, x[chosen[0]][None])[:, 0]
    while len(chosen) < k:
        nxt = int(np.argmax(mind))  # argmax returns the first maximum
        chosen.append(nxt)
        mind = np.minimum(mind, _sq_dists(x, x[nxt][None])[:, 0])
    return x[chosen].copy()


def kmeans(features: np.ndarray, k: int = 5, seed: int = 0, tol: float = 1e-6, max_iter: int = 100) -> ClusterModel:
    """Lloyd's algorithm from a deterministic farthest-point start.

    ``k`` is capped at the number of points.  Empty clusters are reseeded
    with the point farthest from its own center.  ``seed`` does not affect
    the result (the initialisation is deterministic) and is kept for a
    uniform stage signature.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("kmeans needs at least one point")
    k = min(k, x.shape[0])
    centers = _farthest_point_init(x, k)
    history = []
    assign = np.zeros(x.shape[0], dtype=np.intp)
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d = _sq_dists(x, centers)
        assign = np.argmin(d, axis=1)
        history.append(float(d[np.arange(x.shape[0]), assign].sum()))
        new = centers.copy()
        counts = np.bincount(assign, minlength=k)
        for j in range(k):
            if counts[j]:
                new[j] = x[assign == j].mean(axis=0)
        for j in np.flatnonzero(counts == 0):
            own = ((x - new[assign]) ** 2).sum(1)
            far = int(np.argmax(own))
            new[j] = x[far]
            assign[far] = j
        shift = np.sqrt(((new - centers) ** 2).sum(1)).max()
        centers = new
        if shift < tol:
            break
    d = _sq_dists(x, centers)
    assign = np.argmin(d, axis=1)
    inertia = float(d[np.arange(x.shape[0]), assign].sum())
    history.append(inertia)
    return ClusterModel(centers=centers, inertia=inertia, assignment=assign, history=history, n_iter=n_iter)


@dataclass
class ReassignReport:
    distance: np.ndarray  # (K,) distance to the opposite side's centers (nan if disabled)
    threshold: np.ndarray  # (K,) T2 of the superpixel's initial side (nan if disabled)


def opposite_distance(feats: np.ndarray, model: ClusterModel, agg: str = "mean") -> np.ndarray:
    d = np.sqrt(_sq_dists(np.asarray(feats, dtype=np.float64), model.centers))
    return d.mean(axis=1) if agg == "mean" else d.min(axis=1)


def reassign(
    labels: LabelAssignment,
    feats: np.ndarray,
    fg_model: ClusterModel | None,
    bg_model: ClusterModel | None,
    params: ClassifyParams,
    report: ReassignReport | None = None,
) -> LabelAssignment:
    """Flip superpixels whose texture sits close to the opposite side's clusters.

    All flips are decided from the initial labels in one pass.  A side whose
    model is ``None`` (no superpixels) receives no flips.
    """
    feats = np.asarray(feats, dtype=np.float64)
    fg0 = labels.foreground.copy()
    new_fg = fg0.copy()
    dist = np.full(fg0.shape[0], np.nan)
    thr = np.full(fg0.shape[0], np.nan)
    for side_mask, model, becomes_fg in ((fg0, bg_model, False), (~fg0, fg_model, True)):
        idx = np.flatnonzero(side_mask)
        if idx.size == 0 or model is None:
            continue
        d = opposite_distance(feats[idx], model, params.dfb_agg)
        t2 = float(d.mean())
        dist[idx] = d
        thr[idx] = t2
        flip = d < params.gamma * t2
        new_fg[idx[flip]] = becomes_fg
    if report is not None:
        report.distance[...] = dist
        report.threshold[...] = thr
    return LabelAssignment(foreground=new_fg, reassigned=new_fg != fg0)


def modified_saliency(sm: np.ndarray, sp: SuperpixelMap, labels: LabelAssignment) -> np.ndarray:
    """Keep saliency on foreground superpixels, zero elsewhere (no renormalisation)."""
    sm = np.asarray(sm, dtype=np.float64)
    if sm.shape != sp.labels.shape:
        raise ValueError("saliency map and superpixel map dimensions differ")
    return np.where(labels.foreground[sp.labels], sm, 0.0)


def classify_superpixels(feats, medians, sm_max, params: ClassifyParams):
    """Initial thresholding, per-side k-means and one reassignment pass.

    Returns ``(initial, final, fg_model, bg_model, report)``.
    """
    init = initial_labels(medians, sm_max, params)
    fg_idx = np.flatnonzero(init.foreground)
    bg_idx = np.flatnonzero(~init.foreground)
    fg_model = kmeans(feats[fg_idx], params.k, params.seed) if fg_idx.size else None
    bg_model = kmeans(feats[bg_idx], params.k, params.seed) if bg_idx.size else None
    k = len(init)
    report = ReassignReport(distance=np.full(k, np.nan), threshold=np.full(k, np.nan))
    final = reassign(init, feats, fg_model, bg_model, params, report)
    return init, final, fg_model, bg_model, report


def save_classification_table(path, medians, initial: LabelAssignment, final: LabelAssignment, report: ReassignReport) -> None:
    def tag(fg):
        return "FG" if fg else "BG"

    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["label", "median_saliency", "initial", "D_opposite", "T2_side", "final"])
        for i in range(len(initial)):
            wr.writerow(
                [
                    i,
                    f"{medians[i]:.6f}",
                    tag(initial.foreground[i]),
                    "" if np.isnan(report.distance[i]) else f"{report.distance[i]:.6f}",
                    "" if np.isnan(report.threshold[i]) else f"{report.threshold[i]:.6f}",
                    tag(final.foreground[i]),
                ]
            )
