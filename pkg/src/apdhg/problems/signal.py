"""Peak-magnitude (l-infinity) signal representation."""

import numpy as np

from ..exceptions import ConfigurationError
from ..linops import HorizontalOperator, IdentityOperator, MatrixOperator, \
    ScaledOperator, SubsampledOrthogonalOperator
from ..prox import BlockProx, ProxOperator, project_l2_ball, prox_linf_norm
from ..solver import SaddlePointProblem

__all__ = ["random_fourier_rows", "random_signal", "build_linf_approx", "linf_split"]


def random_fourier_rows(n=512, m=100, seed=0):
    """``m`` uniformly chosen rows of the unitary ``n``-point DFT."""
    return SubsampledOrthogonalOperator.random(n, m, "fourier", seed)


def random_signal(m=100, seed=0):
    """Complex Gaussian test signal (unit variance per component)."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal(m) + 1j * rng.standard_normal(m)


def linf_split(problem, x):
    """Split the stacked primal vector into ``(x1, x2)``."""
    n = problem.meta["D"].domain_dim
    return x[:n], x[n:]


def build_linf_approx(D, z, epsilon):
    """``min ||x||_inf subject to ||D x - z|| <= epsilon``.

    Primal variable ``(x1, x2)`` with ``x2`` the residual ``D x1 - z``
    restricted to the epsilon-ball; ``A (x1, x2) = D x1 - x2``. The constant
    ``z`` is carried by the dual term ``g(y) = Re<y, z>``, whose resolvent
    is ``y - sigma z``.
    """
    if not epsilon > 0:
        raise ConfigurationError(f"epsilon must be positive, got {epsilon}")
    if not D.is_complex:
        raise ConfigurationError("D must be a complex-field operator")
    z = np.asarray(z, dtype=np.complex128)
    if z.shape != (D.range_dim,):
        raise ConfigurationError("z must have one entry per row of D")
    m, n = D.range_dim, D.domain_dim
    field = "complex"
    A = HorizontalOperator([D, ScaledOperator(IdentityOperator(m, field), -1.0)])
    prox_f = BlockProx([
        (n, ProxOperator(prox_linf_norm, "prox_linf_norm")),
        (m, ProxOperator(lambda v, t: project_l2_ball(v, 0.0, epsilon), "project_l2_ball")),
    ])
    prox_g = ProxOperator(lambda v, t: v - t * z, "shift_z")
    # rho(A A^H) = rho(D D^H) + 1; D D^H = I for rows of a unitary transform
    if isinstance(D, (SubsampledOrthogonalOperator, IdentityOperator)):
        rho = 2.0
    elif isinstance(D, MatrixOperator):
        rho = float(np.linalg.norm(D.matrix, 2)) ** 2 * (1 + 1e-12) + 1.0
    else:
        rho = None

    def objective(x):
        return float(np.max(np.abs(x[:n]))) if n else 0.0

    return SaddlePointProblem(
        A=A, prox_f=prox_f, prox_g=prox_g, s=1.0, rho_bound=rho, objective=objective,
        name="linf", meta=dict(D=D, z=z, epsilon=epsilon))
