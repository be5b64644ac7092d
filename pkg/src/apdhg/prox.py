"""Proximal operators and projections.

Every function here has the signature ``prox(v, t, ...)`` or
``project(v, ...)`` and returns a new array. ``ProxOperator`` binds the
extra parameters so the solver can call ``prox(v, t)`` uniformly.
"""

from dataclasses import dataclass
from typing import Callable, Sequence, Tuple

import numpy as np

from .exceptions import ConfigurationError, ShapeError

__all__ = [
    "ProxOperator",
    "BlockProx",
    "identity_prox",
    "prox_quadratic",
    "project_disc_field",
    "project_box",
    "project_linf_box",
    "project_l2_ball",
    "project_l1_ball",
    "prox_linf_norm",
    "prox_linear_nonneg",
    "prox_subsampled_quadratic",
]


@dataclass(frozen=True)
class ProxOperator:
    """A resolvent ``v, t -> argmin_x h(x) + ||x - v||^2 / (2t)``."""

    fn: Callable[[np.ndarray, float], np.ndarray]
    description: str = ""

    def __call__(self, v, t):
        return self.fn(v, t)


class BlockProx:
    """Apply separate resolvents to consecutive slices of a vector.

    ``blocks`` is a sequence of ``(length, prox)`` pairs whose lengths sum
    to the vector length.
    """

    def __init__(self, blocks: Sequence[Tuple[int, Callable]], description=""):
        self.blocks = list(blocks)
        self.size = sum(n for n, _ in self.blocks)
        self.description = description or " | ".join(
            getattr(p, "description", "prox") for _, p in self.blocks)

    def __call__(self, v, t):
        if v.shape[0] != self.size:
            raise ShapeError(f"block prox expects length {self.size}, got {v.shape[0]}")
        out = np.empty_like(v)
        start = 0
        for n, prox in self.blocks:
            out[start:start + n] = prox(v[start:start + n], t)
            start += n
        return out


identity_prox = ProxOperator(lambda v, t: np.array(v, copy=True), "identity")


def prox_quadratic(v, t, f, mu):
    """Resolvent of ``(mu/2)||x - f||^2``: ``(t / (t mu + 1)) (mu f + v / t)``."""
    if t <= 0 or mu < 0:
        raise ConfigurationError("prox_quadratic needs t > 0 and mu >= 0")
    return (t / (t * mu + 1.0)) * (mu * f + v / t)


def project_disc_field(y):
    """Project each pixel's 2-vector onto the unit disc.

    ``y`` is laid out as two channels of length N (all first components,
    then all second components), matching ``GradientOperator2D``.
    """
    y = np.asarray(y)
    if y.shape[0] % 2:
        raise ShapeError("disc projection needs an even-length field")
    n = y.shape[0] // 2
    mag = np.sqrt(np.abs(y[:n]) ** 2 + np.abs(y[n:]) ** 2)
    scale = np.maximum(mag, 1.0)
    return y / np.concatenate([scale, scale])


def project_box(v, lo, hi):
    """Componentwise clamp of ``v`` to ``[lo, hi]``."""
    if lo > hi:
        raise ConfigurationError(f"empty box: lo={lo} > hi={hi}")
    return np.clip(v, lo, hi)


def _clip_magnitude(v, bound):
    # complex entries keep their phase
    mag = np.abs(v)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        scale = np.where(mag > bound, bound / np.where(mag > 0, mag, 1.0), 1.0)
    return v * scale


def project_linf_box(v, mu):
    """Project onto ``{y : |y_i| <= mu}``."""
    if mu < 0:
        raise ConfigurationError("mu must be nonnegative")
    if np.iscomplexobj(v):
        return _clip_magnitude(v, mu)
    return np.clip(v, -mu, mu)


def project_l2_ball(v, center, radius):
    """Project ``v`` onto the Euclidean ball ``||z - center|| <= radius``."""
    if radius < 0:
        raise ConfigurationError("radius must be nonnegative")
    center = np.broadcast_to(np.asarray(center), np.shape(v))
    diff = v - center
    nrm = np.linalg.norm(diff)
    if nrm <= radius:
        return np.array(v, copy=True)
    return center + (radius / nrm) * diff


def _l1_ball_threshold(mag, radius):
    """Soft threshold that maps nonnegative ``mag`` onto the l1 ball of ``radius``.

    Assumes ``mag.sum() > radius``.
    """
    u = np.sort(mag)[::-1]
    css = np.cumsum(u) - radius
    j = np.arange(1, u.size + 1)
    active = np.nonzero(u - css / j > 0)[0]
    # rounding can empty ``active`` when radius is negligible against mag
    k = active[-1] if active.size else 0
    return css[k] / (k + 1)


def project_l1_ball(v, radius=1.0):
    """Project onto ``{z : ||z||_1 <= radius}`` by sorting magnitudes."""
    mag = np.abs(v)
    if mag.sum() <= radius:
        return np.array(v, copy=True)
    if radius == 0:
        return np.zeros_like(v)
    theta = _l1_ball_threshold(mag, radius)
    shrunk = np.maximum(mag - theta, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        phase = np.where(mag > 0, v / np.where(mag > 0, mag, 1.0), 0.0)
    return shrunk * phase


def prox_linf_norm(v, t):
    """Resolvent of ``||x||_inf`` with step ``t``.

    Moreau decomposition: ``v - t * P(v / t)`` where ``P`` projects onto the
    unit l1 ball, which comes down to clipping every magnitude at ``t * theta``.
    """
    if t <= 0:
        raise ConfigurationError("t must be positive")
    mag = np.abs(v)
    if mag.sum() <= t:
        return np.zeros_like(v)
    theta = _l1_ball_threshold(mag / t, 1.0)
    return _clip_magnitude(v, t * theta)


def prox_linear_nonneg(v, t, c):
    """Resolvent of ``c^T x`` restricted to ``x >= 0``: ``max(v - t c, 0)``."""
    return np.maximum(v - t * c, 0.0)


def prox_subsampled_quadratic(v, t, op, b, mu):
    """Resolvent of ``(mu/2)||R H x - b||^2`` for an orthonormal ``H``.

    ``op`` is a ``SubsampledOrthogonalOperator`` and ``b`` the compact vector
    of measured coefficients. The linear system is diagonal in the transform
    domain, so the solve is one forward and one inverse transform.
    """
    if t <= 0 or mu < 0:
        raise ConfigurationError("prox_subsampled_quadratic needs t > 0 and mu >= 0")
    coeffs = op.forward_full(v) / t + mu * op.scatter(b)
    coeffs /= mu * op.mask + 1.0 / t
    x = op.inverse_full(coeffs)
    if not np.iscomplexobj(v) and not np.iscomplexobj(b):
        x = np.real(x)
    return x
