"""Linear programs ``min c^T x  s.t.  A x <= b, x >= 0`` as saddle problems."""

from dataclasses import dataclass

import numpy as np

from ..exceptions import ConfigurationError
from ..linops import MatrixOperator
from ..prox import ProxOperator, prox_linear_nonneg
from ..solver import Iterate, SaddlePointProblem

__all__ = ["LPInstance", "diagonal_preconditioner", "build_lp", "random_packing_lp",
           "sc50b_like", "with_equalities", "lp_local_gap"]


@dataclass(frozen=True)
class LPInstance:
    """Inequality-form LP. Equalities are encoded as paired rows (see ``with_equalities``)."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float)
        if A.shape != (b.size, c.size):
            raise ConfigurationError(f"inconsistent LP sizes: A {A.shape}, b {b.size}, c {c.size}")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.A.shape[1]

    def objective(self, x):
        return float(self.c @ x)

    def max_violation(self, x):
        """Largest violation of ``A x <= b`` and ``x >= 0``."""
        return float(max(np.max(self.A @ x - self.b, initial=0.0), np.max(-x, initial=0.0)))


def with_equalities(c, A_ub, b_ub, A_eq, b_eq):
    """Stack ``A_eq x = b_eq`` as ``A_eq x <= b_eq`` and ``-A_eq x <= -b_eq``."""
    A = np.vstack([A_ub, A_eq, -np.asarray(A_eq)])
    b = np.concatenate([b_ub, b_eq, -np.asarray(b_eq)])
    return LPInstance(c, A, b)


def diagonal_preconditioner(A, scaling="printed"):
    """Row and column scalings ``(G, S)`` so that ``A_hat = diag(G) A diag(S)``.

    With ``Gamma_ii = sum_j |A_ij|`` and ``Sigma_jj = sum_i |A_ij|``,
    ``scaling="printed"`` gives ``G = Gamma^(1/2), S = Sigma^(1/2)`` and
    ``scaling="inverse"`` gives ``G = Gamma^(-1/2), S = Sigma^(-1/2)``.
    """
    A = np.asarray(A, dtype=float)
    rows = np.abs(A).sum(axis=1)
    cols = np.abs(A).sum(axis=0)
    if np.any(rows == 0) or np.any(cols == 0):
        raise ConfigurationError("preconditioning needs every row and column of A to be nonzero")
    if scaling == "printed":
        return np.sqrt(rows), np.sqrt(cols)
    if scaling == "inverse":
        return 1.0 / np.sqrt(rows), 1.0 / np.sqrt(cols)
    raise ConfigurationError(f"unknown preconditioner scaling {scaling!r}")


def _rho(M):
    # slight inflation keeps this an upper bound despite rounding in the SVD
    return float(np.linalg.norm(M, 2)) ** 2 * (1.0 + 1e-10)


def build_lp(instance, preconditioned=False, scaling="printed", s=1.0):
    """Saddle form ``max_{y>=0} min_{x>=0} c^T x + y^T (A x - b)``.

    With ``preconditioned=True`` the solver works on ``A_hat = G A S``,
    ``b_hat = G b``, ``c_hat = S c``; ``problem.solution`` maps back with
    ``x = S x_hat`` and ``y = G y_hat``.
    """
    if preconditioned:
        G, S = diagonal_preconditioner(instance.A, scaling)
    else:
        G, S = np.ones(instance.m), np.ones(instance.n)
    A_hat = G[:, None] * instance.A * S[None, :]
    b_hat = G * instance.b
    c_hat = S * instance.c

    prox_f = ProxOperator(lambda v, t: prox_linear_nonneg(v, t, c_hat), "nonneg_linear_c")
    prox_g = ProxOperator(lambda v, t: prox_linear_nonneg(v, t, b_hat), "nonneg_linear_b")

    def recover(u):
        return Iterate(S * u.x, G * u.y)

    return SaddlePointProblem(
        A=MatrixOperator(A_hat), prox_f=prox_f, prox_g=prox_g, s=s, rho_bound=_rho(A_hat),
        objective=instance.objective, recover=recover,
        name="lp", meta=dict(instance=instance, row_scale=G, col_scale=S,
                             preconditioned=preconditioned, scaling=scaling))


def random_packing_lp(n=10, m=6, seed=0):
    """``min c^T x`` with ``c < 0`` over ``{A x <= b, x >= 0}``, ``A > 0``, ``b > 0``.

    The positive constraint matrix makes the feasible set a bounded polytope
    containing the origin, so an optimum always exists.
    """
    rng = np.random.default_rng(seed)
    A = rng.uniform(0.1, 1.0, size=(m, n))
    b = rng.uniform(1.0, 2.0, size=m)
    c = -rng.uniform(0.5, 1.5, size=n)
    return LPInstance(c, A, b)


def sc50b_like(n=40, m_ineq=30, m_eq=20, seed=0):
    """Random feasible, bounded LP with the shape of the sc50b test problem.

    Primal feasibility comes from a planted ``x_feas >= 0``; boundedness from a
    planted dual point (``c + A^T y0 >= 0`` with ``y0 >= 0`` on the
    inequality rows and a free multiplier on the equalities).
    """
    rng = np.random.default_rng(seed)
    density = 0.15
    A_ub = rng.uniform(-1, 1, (m_ineq, n)) * (rng.random((m_ineq, n)) < density)
    A_eq = rng.uniform(-1, 1, (m_eq, n)) * (rng.random((m_eq, n)) < density)
    # make sure every row and column is populated
    for M in (A_ub, A_eq):
        for i in range(M.shape[0]):
            M[i, rng.integers(n)] = rng.uniform(0.5, 1.0)
    for j in range(n):
        A_ub[rng.integers(m_ineq), j] = rng.uniform(0.5, 1.0)
    x_feas = rng.uniform(0.0, 2.0, n)
    b_ub = A_ub @ x_feas + rng.uniform(0.1, 1.0, m_ineq)
    b_eq = A_eq @ x_feas
    y_ub = rng.uniform(0.0, 1.0, m_ineq)
    y_eq = rng.uniform(-1.0, 1.0, m_eq)
    c = rng.uniform(0.0, 1.0, n) - A_ub.T @ y_ub - A_eq.T @ y_eq
    return with_equalities(c, A_ub, b_ub, A_eq, b_eq)


def lp_local_gap(instance, iterate, radius=1.0):
    """Localized primal-dual gap of ``L(x, y) = c^T x + y^T (A x - b)``.

    ``max_y L(x~, y) - min_x L(x, y~)`` with ``x`` and ``y`` restricted to
    nonnegative boxes of half-width ``radius`` around ``(x~, y~)``. It is
    nonnegative and vanishes at a saddle point; both inner problems are
    separable, so the value is exact.
    """
    x, y = iterate.x, iterate.y
    r = instance.A @ x - instance.b
    g = instance.c + instance.A.T @ y
    y_lo, y_hi = np.maximum(y - radius, 0.0), y + radius
    x_lo, x_hi = np.maximum(x - radius, 0.0), x + radius
    upper = instance.c @ x + np.sum(np.maximum(y_lo * r, y_hi * r))
    lower = np.sum(np.minimum(x_lo * g, x_hi * g)) - y @ instance.b
    return float(upper - lower)
