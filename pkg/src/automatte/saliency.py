"""Three classical saliency estimators and their weighted fusion."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from automatte.raster import normalize, rgb_to_lab
from automatte.segmentation import SuperpixelMap

_BINOMIAL5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


@dataclass(frozen=True)
class FusionWeights:
    b1: float = 1.0 / 3.0
    b2: float = 1.0 / 3.0
    b3: float = 1.0 / 3.0

    def __post_init__(self):
        w = self.as_tuple()
        if any(not np.isfinite(v) or v < 0 for v in w):
            raise ValueError(f"fusion weights must be finite and >= 0, got {w}")
        if abs(sum(w) - 1.0) > 1e-9:
            raise ValueError(f"fusion weights must sum to 1, got {sum(w)!r}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.b1, self.b2, self.b3)


def saliency_frequency_tuned(img: np.ndarray, lab: np.ndarray | None = None) -> np.ndarray:
    """Distance of the 5x5 binomial-blurred Lab colour from the mean image colour."""
    if lab is None:
        lab = rgb_to_lab(img)
    mean = lab.reshape(-1, 3).mean(axis=0)
    blurred = ndimage.convolve1d(lab, _BINOMIAL5, axis=0, mode="nearest")
    blurred = ndimage.convolve1d(blurred, _BINOMIAL5, axis=1, mode="nearest")
    return normalize(np.sqrt(((blurred - mean) ** 2).sum(-1)))


def saliency_spectral_residual(gray: np.ndarray) -> np.ndarray:
    """Spectral residual saliency of a grayscale field.

    Frequencies with (numerically) zero amplitude carry no phase and are
    left at zero amplitude in the reconstruction.
    """
    gray = np.asarray(gray, dtype=np.float64)
    spec = np.fft.fft2(gray)
    amp = np.abs(spec)
    live = amp > 1e-12 * max(amp.max(), 1e-300)
    log_amp = np.log(np.where(live, amp, 1.0))
    residual = log_amp - ndimage.uniform_filter(log_amp, size=3, mode="wrap")
    phase = np.where(live, spec / np.where(live, amp, 1.0), 0.0)
    recon = np.fft.ifft2(np.where(live, np.exp(residual), 0.0) * phase)
    energy = recon.real ** 2 + recon.imag ** 2
    # 9x9 support at sigma 2.5: radius 4 = truncate * sigma
    smooth = ndimage.gaussian_filter(energy, sigma=2.5, truncate=4.0 / 2.5, mode="reflect")
    return normalize(smooth)


def saliency_region_contrast(lab: np.ndarray, sp: SuperpixelMap) -> np.ndarray:
    """Size-weighted, distance-attenuated Lab contrast of each superpixel."""
    if lab.shape[:2] != sp.labels.shape:
        raise ValueError("Lab image and superpixel map dimensions differ")
    h, w = sp.labels.shape
    sigma = 0.4 * np.hypot(h, w)
    c = sp.mean_lab
    color_d = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(-1))
    cent = sp.centroids
    space_d = np.sqrt(((cent[:, None, :] - cent[None, :, :]) ** 2).sum(-1))
    contrib = sp.counts[None, :] * color_d * np.exp(-space_d / sigma)
    np.fill_diagonal(contrib, 0.0)
    score = contrib.sum(axis=1)
    return normalize(score[sp.labels])


def fuse_saliency(maps, weights: FusionWeights = FusionWeights()) -> np.ndarray:
    """Weighted sum of three normalised maps, renormalised to [0, 1]."""
    maps = [np.asarray(m, dtype=np.float64) for m in maps]
    if len(maps) != 3:
        raise ValueError(f"expected 3 saliency maps, got {len(maps)}")
    shape = maps[0].shape
    if any(m.shape != shape for m in maps):
        raise ValueError(f"saliency map dimensions differ: {[m.shape for m in maps]}")
    b = weights.as_tuple()
    fused = b[0] * maps[0] + b[1] * maps[1] + b[2] * maps[2]
    return normalize(fused)
