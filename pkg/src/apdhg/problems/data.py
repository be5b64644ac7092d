"""Synthetic test images and noise models."""

from dataclasses import dataclass

import numpy as np

from ..exceptions import ConfigurationError

__all__ = ["ImageSpec", "circles_phantom", "smooth_edges_image", "two_region_image",
           "make_noise"]


@dataclass(frozen=True)
class ImageSpec:
    rows: int = 64
    cols: int = 64
    lo: float = 0.0
    hi: float = 255.0
    seed: int = 0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ConfigurationError("image dimensions must be positive")
        if self.lo >= self.hi:
            raise ConfigurationError("empty pixel range")


def _grid(spec):
    yy, xx = np.mgrid[0:spec.rows, 0:spec.cols].astype(float)
    return yy / max(spec.rows - 1, 1), xx / max(spec.cols - 1, 1)


def circles_phantom(spec=ImageSpec(), background=0.1, count=3):
    """Piecewise-constant discs on a flat background.

    Three groups of three discs arranged in a triangle (``count`` groups,
    at most 3), each disc at a seeded intensity. Values span ``[lo, hi]``.
    """
    rng = np.random.default_rng(spec.seed)
    yy, xx = _grid(spec)
    img = np.full((spec.rows, spec.cols), background)
    centers = [(0.3, 0.28), (0.3, 0.72), (0.72, 0.5)][:max(1, min(count, 3))]
    for cy, cx in centers:
        for dy, dx in ((-0.09, 0.0), (0.07, -0.09), (0.07, 0.09)):
            r = 0.075 + 0.01 * rng.random()
            inside = (yy - cy - dy) ** 2 + (xx - cx - dx) ** 2 <= r * r
            img[inside] = 0.55 + 0.45 * rng.random()
    return spec.lo + (spec.hi - spec.lo) * img


def smooth_edges_image(spec=ImageSpec()):
    """A smooth ramp overlaid with a rectangle and a disc (sharp edges)."""
    rng = np.random.default_rng(spec.seed)
    yy, xx = _grid(spec)
    img = 0.2 + 0.3 * xx + 0.1 * np.sin(3.0 * np.pi * yy)
    x0, y0 = 0.15 + 0.1 * rng.random(), 0.15 + 0.1 * rng.random()
    img[(xx > x0) & (xx < x0 + 0.35) & (yy > y0) & (yy < y0 + 0.3)] = 0.85
    cx, cy = 0.65 + 0.1 * rng.random(), 0.6 + 0.1 * rng.random()
    img[(xx - cx) ** 2 + (yy - cy) ** 2 < 0.04] = 0.05
    img = np.clip(img, 0.0, 1.0)
    return spec.lo + (spec.hi - spec.lo) * img


def two_region_image(spec=ImageSpec(), left=None, right=None):
    """Left half at ``left``, right half at ``right`` (defaults: range ends)."""
    left = spec.lo if left is None else left
    right = spec.hi if right is None else right
    img = np.full((spec.rows, spec.cols), float(right))
    img[:, : spec.cols // 2] = left
    return img


def make_noise(image, kind="gaussian", level=10.0, seed=0, lo=0.0, hi=255.0):
    """Return a noisy copy of ``image``.

    ``kind="gaussian"``: add i.i.d. ``N(0, level^2)`` (no clipping).
    ``kind="salt_pepper"``: set a ``level`` fraction of the pixels to ``lo``
    or ``hi`` with equal probability.
    """
    if level < 0:
        raise ConfigurationError("noise level must be nonnegative")
    rng = np.random.default_rng(seed)
    img = np.array(image, dtype=float)
    if kind == "gaussian":
        return img + level * rng.standard_normal(img.shape)
    if kind == "salt_pepper":
        if level > 1:
            raise ConfigurationError("salt-and-pepper fraction must be at most 1")
        flat = img.ravel()
        count = int(round(level * flat.size))
        idx = rng.choice(flat.size, size=count, replace=False)
        flat[idx] = np.where(rng.random(count) < 0.5, lo, hi)
        return flat.reshape(img.shape)
    raise ConfigurationError(f"unknown noise kind {kind!r}")
