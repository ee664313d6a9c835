"""Learning-based alpha matting from an image and a trimap.

Each 3x3 window fits a ridge-regularised affine model alpha ~ w . rgb + b.
The residual operator of that fit, (I - F_w), accumulated over windows
gives a sparse symmetric PSD Laplacian L whose null space holds constants.
Alpha solves (L + lambda * D) alpha = lambda * D * v with D marking the
trimap's known pixels and v their values.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
from scipy import ndimage

from automatte import kernels
from automatte.trimap import UNKNOWN, Trimap

log = logging.getLogger(__name__)


class SingularSystemError(ValueError):
    """The trimap has no known pixel, so alpha is undetermined."""


@dataclass
class MattingSystem:
    laplacian: sps.csr_matrix
    known_mask: np.ndarray  # (H, W) bool
    known_values: np.ndarray  # (H, W) float
    lam: float
    eps: float

    @property
    def shape(self):
        return self.known_mask.shape


@dataclass
class SolveInfo:
    iterations: int = 0
    converged: bool = True
    residual_history: list = field(default_factory=list)  # scaled relative residuals
    true_residual: float = 0.0


@dataclass
class AlphaMatte:
    alpha: np.ndarray  # (H, W) in [0, 1]
    info: SolveInfo
    clamped_fraction: float = 0.0  # share of unknown pixels the clamp touched


def active_windows(tm: Trimap) -> np.ndarray:
    """Interior 3x3 windows (indexed by top-left) whose support touches Unknown."""
    unk = tm.labels == UNKNOWN
    touched = ndimage.maximum_filter(unk.astype(np.uint8), size=3, mode="constant") > 0
    return np.ascontiguousarray(touched[1:-1, 1:-1], dtype=np.uint8)


def bands_to_csr(bands: np.ndarray) -> sps.csr_matrix:
    _, h, w = bands.shape
    n = h * w
    idx = np.arange(n).reshape(h, w)
    rows, cols, vals = [], [], []
    for o, (dy, dx) in enumerate(kernels.UPPER_OFFSETS):
        ys = slice(0, h - dy)
        xs = slice(max(0, -dx), w - max(0, dx))
        band = bands[o, ys, xs]
        nz = band != 0
        p = idx[ys, xs][nz]
        q = idx[dy:, max(0, dx) : w + min(0, dx)][nz] if dy or dx else p
        v = band[nz]
        rows.append(p)
        cols.append(q)
        vals.append(v)
        if dy or dx:
            rows.append(q)
            cols.append(p)
            vals.append(v)
    mat = sps.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return mat.tocsr()


def build_system(img: np.ndarray, tm: Trimap, lam: float = 100.0, eps: float = 1e-5, all_windows: bool = False) -> MattingSystem:
    """Assemble the matting Laplacian and data term.

    Only windows touching the Unknown region contribute unless ``all_windows``
    is set; windows lying wholly inside known regions would only couple
    pixels whose values are already fixed.
    """
    img = np.asarray(img)
    if img.shape[:2] != tm.shape:
        raise ValueError(f"image {img.shape[:2]} and trimap {tm.shape} dimensions differ")
    h, w = tm.shape
    if h < 3 or w < 3:
        raise ValueError("matting needs an image of at least 3x3 pixels")
    if lam <= 0 or eps <= 0:
        raise ValueError("lambda and epsilon must be > 0")
    colors = np.ascontiguousarray(img, dtype=np.float64) / 255.0
    act = np.ones((h - 2, w - 2), dtype=np.uint8) if all_windows else active_windows(tm)
    bands = kernels.laplacian_bands(colors, act, float(eps))
    return MattingSystem(
        laplacian=bands_to_csr(bands),
        known_mask=tm.known_mask(),
        known_values=tm.known_values(),
        lam=float(lam),
        eps=float(eps),
    )


def conjugate_residual(a, b, x0=None, tol=1e-6, maxiter=2000):
    """Conjugate residual iteration for a symmetric positive definite ``a``.

    The step length minimises the residual 2-norm along each search
    direction, so the recorded residual norms never increase.
    """
    x = np.zeros_like(b) if x0 is None else x0.copy()
    bnorm = np.linalg.norm(b)
    info = SolveInfo()
    if bnorm == 0.0:
        info.residual_history.append(0.0)
        return np.zeros_like(b), info
    r = b - a @ x
    p = r.copy()
    ar = a @ r
    ap = ar.copy()
    rar = r @ ar
    info.residual_history.append(np.linalg.norm(r) / bnorm)
    info.converged = info.residual_history[-1] <= tol
    it = 0
    while not info.converged and it < maxiter:
        apap = ap @ ap
        if apap == 0.0:
            break
        step = (r @ ap) / apap
        x += step * p
        r -= step * ap
        it += 1
        res = np.linalg.norm(r) / bnorm
        info.residual_history.append(res)
        if res <= tol:
            info.converged = True
            break
        ar = a @ r
        rar_new = r @ ar
        beta = rar_new / rar
        rar = rar_new
        p = r + beta * p
        ap = ar + beta * ap
    info.iterations = it
    return x, info


def solve_alpha(system: MattingSystem, tol: float = 1e-6, maxiter: int = 2000) -> AlphaMatte:
    """Solve for alpha with a Jacobi-scaled conjugate residual iteration."""
    known = system.known_mask.ravel()
    if not known.any():
        raise SingularSystemError("trimap has no known pixels; the matting system is singular")
    values = system.known_values.ravel()
    lap = system.laplacian
    diag_l = lap.diagonal()
    active = diag_l > 0
    alpha = np.where(known, values, 0.0)
    info = SolveInfo()
    if active.any():
        sub = lap[active][:, active]
        d = system.lam * known[active].astype(np.float64)
        a = (sub + sps.diags(d)).tocsr()
        b = d * values[active]
        scale = 1.0 / np.sqrt(a.diagonal())
        s = sps.diags(scale)
        a_hat = (s @ a @ s).tocsr()
        y, info = conjugate_residual(a_hat, scale * b, tol=tol, maxiter=maxiter)
        x = scale * y
        bnorm = np.linalg.norm(b)
        info.true_residual = float(np.linalg.norm(b - a @ x) / bnorm) if bnorm > 0 else 0.0
        if not info.converged:
            log.warning("matting solve stopped after %d iterations (residual %.3g)", info.iterations, info.residual_history[-1])
        alpha[active] = x
    unknown = ~known
    raw = alpha[unknown]
    clamped = float(np.count_nonzero((raw < 0) | (raw > 1))) / max(1, raw.size)
    alpha = np.clip(alpha, 0.0, 1.0).reshape(system.shape)
    return AlphaMatte(alpha=alpha, info=info, clamped_fraction=clamped)


def composite_over(img: np.ndarray, alpha: np.ndarray, bg: np.ndarray) -> np.ndarray:
    """alpha * img + (1 - alpha) * bg, rounded half up to 8 bits."""
    img = np.asarray(img)
    bg = np.asarray(bg)
    a = np.asarray(alpha, dtype=np.float64)
    if img.shape != bg.shape or img.shape[:2] != a.shape:
        raise ValueError("image, alpha and background dimensions differ")
    out = a[..., None] * img.astype(np.float64) + (1.0 - a[..., None]) * bg.astype(np.float64)
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def ssd(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Sum of squared differences and its per-pixel mean."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"matte dimensions differ: {a.shape} vs {b.shape}")
    total = float(((a - b) ** 2).sum())
    return total, total / a.size
