"""Synthetic images shared by the pipeline, CLI and acceptance tests."""
import numpy as np

from automatte.trimap import BACKGROUND, FOREGROUND, UNKNOWN, Trimap
from conftest import disk_image


def textured_object(n=96):
    rng = np.random.default_rng(7)
    img = (rng.random((n, n, 3)) * 60 + 40).astype(np.uint8)
    yy, xx = np.mgrid[:n, :n]
    blob = ((yy - n * 0.55) / (n * 0.25)) ** 2 + ((xx - n * 0.45) / (n * 0.18)) ** 2 <= 1
    img[blob, 0] = 230
    img[blob, 1] = 120 + (xx[blob] % 7) * 10
    img[blob, 2] = 40
    return img


def square_on_gradient(h=80, w=100):
    g = np.linspace(20, 120, w)[None, :, None].repeat(h, 0).repeat(3, 2)
    img = g.astype(np.uint8)
    img[25:55, 35:70] = (40, 200, 250)
    return img


def fixtures():
    return {"disk": disk_image(), "textured": textured_object(), "square": square_on_gradient()}


def ramp_fixture(h=40, w=60, band=20):
    """White over black with alpha ramping linearly across ``band`` columns."""
    x = np.arange(w)
    x0 = (w - band) // 2
    alpha = np.tile(np.clip((x - x0 + 0.5) / band, 0.0, 1.0), (h, 1))
    img = np.floor(alpha[..., None] * 255.0 + 0.5).repeat(3, axis=2).astype(np.uint8)
    labels = np.full((h, w), UNKNOWN, np.uint8)
    labels[alpha == 0] = BACKGROUND
    labels[alpha == 1] = FOREGROUND
    return img, Trimap(labels), alpha
