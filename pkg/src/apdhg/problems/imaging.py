"""Total-variation imaging problems: ROF, TVL1, convex segmentation and
compressed sensing, all with ``A`` built around the image gradient."""

from functools import partial

import numpy as np

from ..exceptions import ConfigurationError
from ..linops import GradientOperator2D, IdentityOperator, StackedOperator, \
    SubsampledOrthogonalOperator
from ..prox import BlockProx, ProxOperator, identity_prox, project_box, \
    project_disc_field, project_linf_box, prox_quadratic, prox_subsampled_quadratic
from ..solver import SaddlePointProblem
from .data import ImageSpec, circles_phantom

__all__ = ["total_variation", "rof_energy", "rof_dual_energy", "rof_saddle_value",
           "tvl1_energy", "segmentation_energy", "cs_energy", "build_rof", "build_tvl1",
           "build_segmentation", "build_compressed_sensing"]

# rho(G^T G) < 8 for the forward-difference gradient on any grid
GRADIENT_RHO_BOUND = 8.0

_disc = ProxOperator(lambda v, t: project_disc_field(v), "project_disc")


def _as_image(f):
    f = np.asarray(f, dtype=float)
    if f.ndim != 2:
        raise ConfigurationError("image data must be a 2-D array")
    return f


def total_variation(grad, x):
    """Isotropic TV: sum over pixels of the gradient magnitude."""
    g = grad.apply(x)
    n = grad.domain_dim
    return float(np.sum(np.sqrt(g[:n] ** 2 + g[n:] ** 2)))


def rof_energy(grad, f, mu, x):
    return total_variation(grad, x) + 0.5 * mu * float(np.sum((x - f) ** 2))


def rof_saddle_value(grad, f, mu, x, y):
    return 0.5 * mu * float(np.sum((x - f) ** 2)) + float(y @ grad.apply(x))


def rof_dual_energy(grad, f, mu, y):
    """``min_x`` of the saddle function for fixed ``y`` (a lower bound on ROF)."""
    gty = grad.adjoint(y)
    return float(y @ grad.apply(f)) - float(gty @ gty) / (2.0 * mu)


def tvl1_energy(grad, f, mu, x):
    return total_variation(grad, x) + mu * float(np.sum(np.abs(x - f)))


def segmentation_energy(grad, l, x):
    return total_variation(grad, x) + float(l @ x)


def cs_energy(grad, op, b, mu, x):
    r = op.apply(x) - b
    return total_variation(grad, x) + 0.5 * mu * float(np.sum(r ** 2))


def _check_mu(mu):
    if not mu > 0:
        raise ConfigurationError(f"mu must be positive, got {mu}")


def build_rof(f, mu, s=1.0):
    """``min_x TV(x) + (mu/2)||x - f||^2`` with ``A`` the image gradient.

    ``f`` is a 2-D image; the problem works on its row-major flattening.
    """
    _check_mu(mu)
    f = _as_image(f)
    grad = GradientOperator2D(*f.shape)
    fv = f.ravel()
    prox_f = ProxOperator(lambda v, t: prox_quadratic(v, t, fv, mu), "prox_quadratic")
    return SaddlePointProblem(
        A=grad, prox_f=prox_f, prox_g=_disc, s=s, rho_bound=GRADIENT_RHO_BOUND,
        objective=partial(rof_energy, grad, fv, mu), name="rof",
        meta=dict(image_shape=f.shape, f=fv, mu=mu))


def build_tvl1(f, mu, s=1.0):
    """``min_x TV(x) + mu ||x - f||_1`` with both terms dualized.

    ``A = [grad; I]``; the dual is ``(y1, y2)`` with ``y1`` in the unit disc
    field and ``|y2| <= mu``. The linear term ``-y2^T f`` makes the ``y2``
    resolvent ``clip(v - t f, -mu, mu)``. The primal resolvent is the identity.
    """
    _check_mu(mu)
    f = _as_image(f)
    grad = GradientOperator2D(*f.shape)
    n = grad.domain_dim
    fv = f.ravel()
    A = StackedOperator([grad, IdentityOperator(n)])
    y2_prox = ProxOperator(lambda v, t: project_linf_box(v - t * fv, mu), "clip_shifted")
    prox_g = BlockProx([(2 * n, _disc), (n, y2_prox)])
    return SaddlePointProblem(
        A=A, prox_f=identity_prox, prox_g=prox_g, s=s,
        rho_bound=GRADIENT_RHO_BOUND + 1.0,
        objective=partial(tvl1_energy, grad, fv, mu), name="tvl1",
        meta=dict(image_shape=f.shape, f=fv, mu=mu))


def segmentation_weights(f, c1, c2, mu_weight=1.0):
    """``mu_weight * ((f - c1)^2 - (f - c2)^2)``; negative where ``f`` is nearer ``c1``."""
    f = np.asarray(f, dtype=float).ravel()
    return mu_weight * ((f - c1) ** 2 - (f - c2) ** 2)


def build_segmentation(f, c1, c2, mu_weight=1.0, s=1.0):
    """Two-phase convex segmentation ``min_{0<=x<=1} TV(x) + x^T l``.

    Pixels nearer ``c1`` are pulled toward ``x = 1``.
    """
    if c1 == c2:
        raise ConfigurationError("segmentation needs c1 != c2")
    if mu_weight < 0:
        raise ConfigurationError("mu_weight must be nonnegative")
    f = _as_image(f)
    grad = GradientOperator2D(*f.shape)
    l = segmentation_weights(f, c1, c2, mu_weight)
    prox_f = ProxOperator(lambda v, t: project_box(v - t * l, 0.0, 1.0), "box_shifted")
    return SaddlePointProblem(
        A=grad, prox_f=prox_f, prox_g=_disc, s=s, rho_bound=GRADIENT_RHO_BOUND,
        objective=partial(segmentation_energy, grad, l), name="segment",
        meta=dict(image_shape=f.shape, f=f.ravel(), l=l))


def _is_pow2(n):
    return n >= 1 and not n & (n - 1)


def build_compressed_sensing(spec=ImageSpec(), rate=0.1, mu=1.0, seed=0, truth=None,
                             transform="walsh_hadamard", s=1.0):
    """Recover an image from a random subset of its orthonormal transform
    coefficients: ``min_x TV(x) + (mu/2)||R H x - b||^2``.

    The ground truth defaults to a three-disc ``circles_phantom``. The DC
    coefficient is always measured (every other Walsh/Fourier row sums to
    zero, so without it the mean is unobservable); the remaining rows are
    drawn uniformly with ``seed``. Returns ``(problem, truth)``.
    """
    _check_mu(mu)
    if not _is_pow2(spec.rows) or not _is_pow2(spec.cols):
        raise ConfigurationError("compressed sensing needs power-of-two image sides")
    if not 0 <= rate <= 1:
        raise ConfigurationError("sampling rate must lie in [0, 1]")
    if truth is None:
        truth = circles_phantom(spec, background=0.25, count=1)
    truth = _as_image(truth)
    n = truth.size
    m = int(round(rate * n))
    op = SubsampledOrthogonalOperator.random(n, m, transform, seed,
                                             always_keep=(0,) if m else ())
    b = op.apply(truth.ravel())
    grad = GradientOperator2D(*truth.shape)
    prox_f = ProxOperator(lambda v, t: prox_subsampled_quadratic(v, t, op, b, mu),
                          "prox_subsampled_quadratic")
    problem = SaddlePointProblem(
        A=grad, prox_f=prox_f, prox_g=_disc, s=s, rho_bound=GRADIENT_RHO_BOUND,
        objective=partial(cs_energy, grad, op, b, mu), name="cs",
        meta=dict(image_shape=truth.shape, op=op, b=b, mu=mu))
    return problem, truth
