"""Primal-dual hybrid gradient with residual balancing and backtracking.

The iteration solves ``min_x max_y f(x) + Re<y, A x> - g(y)`` through the
resolvents of ``f`` and ``g``. Each step applies ``A`` once and ``A^H``
once; residuals and the backtracking ratio are formed from the cached
products of consecutive iterates.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional

import numpy as np

from .exceptions import ConfigurationError, DivergenceError
from .linops import LinearOperator, inner

logger = logging.getLogger(__name__)

__all__ = [
    "SaddlePointProblem",
    "Iterate",
    "Products",
    "StepState",
    "ResidualReport",
    "TraceRecord",
    "SolverTrace",
    "SolverConfig",
    "ConvergenceDiagnostics",
    "POLICIES",
    "pdhg_step",
    "compute_residuals",
    "adapt_stepsizes",
    "backtrack_check",
    "backtrack_update",
    "init_stepsizes",
    "solve",
    "check_convergence_conditions",
    "ergodic_average",
    "m_norm_sq",
]

POLICIES = ("constant", "adaptive", "adaptive_backtracking")


@dataclass
class SaddlePointProblem:
    """``min_x max_y f(x) + Re<y, A x> - g(y)`` given through resolvents.

    Parameters
    ----------
    A : LinearOperator
    prox_f, prox_g : callable
        ``prox(v, t)`` resolvents of ``f`` (with the primal constraint set)
        and ``g`` (with the dual constraint set).
    s : float
        Residual balancing scale; the controller aims for ``p ~ s d``.
    rho_bound : float, optional
        Upper bound on ``rho(A^H A)``, needed by the known-``L`` policies.
    objective : callable, optional
        ``objective(x) -> float``, typically the primal energy; used only
        for tracing.
    recover : callable, optional
        Maps a solver ``Iterate`` to the variables of the original problem
        (e.g. undoing LP preconditioning).
    """

    A: LinearOperator
    prox_f: Callable
    prox_g: Callable
    s: float = 1.0
    rho_bound: Optional[float] = None
    objective: Optional[Callable] = None
    recover: Optional[Callable] = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.s > 0:
            raise ConfigurationError("residual scale s must be positive")
        for label, prox, n in (("prox_f", self.prox_f, self.A.domain_dim),
                               ("prox_g", self.prox_g, self.A.range_dim)):
            size = getattr(prox, "size", None)
            if size is not None and size != n:
                raise ConfigurationError(f"{label} acts on length {size}, operator needs {n}")

    @property
    def field(self):
        return self.A.field

    def zero_iterate(self):
        dt = self.A.dtype
        return Iterate(np.zeros(self.A.domain_dim, dt), np.zeros(self.A.range_dim, dt))

    def solution(self, iterate):
        """Iterate expressed in the original problem's variables."""
        return self.recover(iterate) if self.recover is not None else iterate


@dataclass(frozen=True)
class Iterate:
    x: np.ndarray
    y: np.ndarray

    def stacked(self):
        return np.concatenate([self.x, self.y])

    def is_finite(self):
        return bool(np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y)))


class Products(NamedTuple):
    """Cached ``A x`` and ``A^H y`` for one iterate."""

    Ax: np.ndarray
    ATy: np.ndarray

    @classmethod
    def of(cls, A, iterate):
        return cls(A.apply(iterate.x), A.adjoint(iterate.y))


@dataclass(frozen=True)
class StepState:
    """Stepsizes and controller parameters.

    ``L`` is the fixed stepsize product for the non-backtracking adaptive
    policy and ``None`` otherwise.
    """

    tau: float
    sigma: float
    alpha: float = 0.5
    L: Optional[float] = None
    backtrack_count: int = 0
    gamma: float = 0.75
    beta: float = 0.95
    delta: float = 1.5
    eta: float = 0.95

    def __post_init__(self):
        if not (self.tau > 0 and self.sigma > 0):
            raise ConfigurationError("stepsizes must be positive")
        if not 0 < self.alpha < 1 or not 0 < self.eta < 1:
            raise ConfigurationError("alpha and eta must lie in (0, 1)")
        if not 0 < self.gamma < 1 or not 0 < self.beta < 1:
            raise ConfigurationError("gamma and beta must lie in (0, 1)")
        if not self.delta > 1:
            raise ConfigurationError("delta must exceed 1")


@dataclass
class ResidualReport:
    p: float
    d: float
    primal_vec: Optional[np.ndarray] = None
    dual_vec: Optional[np.ndarray] = None


@dataclass
class TraceRecord:
    k: int
    tau: float
    sigma: float
    p: float
    d: float
    b: Optional[float] = None
    backtracked: bool = False
    objective: Optional[float] = None


@dataclass
class SolverConfig:
    """Solver settings. ``s=None`` means use the problem's scale.

    ``residual_norm="mean"`` stops when ``p / N <= tol`` and ``d / M <= tol``;
    ``"absolute"`` compares the raw l1 norms with ``tol``.
    """

    tol: float = 0.05
    max_iters: int = 10000
    alpha0: float = 0.5
    eta: float = 0.95
    delta: float = 1.5
    s: Optional[float] = None
    gamma: float = 0.75
    beta: float = 0.95
    seed: int = 0
    residual_norm: str = "mean"
    keep_history: bool = False
    log_objective: bool = False

    def __post_init__(self):
        if self.tol < 0:
            raise ConfigurationError("tol must be nonnegative")
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be >= 1")
        if self.residual_norm not in ("mean", "absolute"):
            raise ConfigurationError("residual_norm must be 'mean' or 'absolute'")


@dataclass
class SolverTrace:
    records: List[TraceRecord] = field(default_factory=list)
    status: str = "max_iters"
    policy: str = ""
    config: Optional[SolverConfig] = None
    history: Optional[List[Iterate]] = None
    initial_state: Optional[StepState] = None
    final_state: Optional[StepState] = None
    error: Optional[str] = None

    def __len__(self):
        return len(self.records)

    @property
    def converged(self):
        return self.status == "converged"

    @property
    def accepted(self):
        return [r for r in self.records if not r.backtracked]

    @property
    def iterations(self):
        """Number of accepted PDHG steps."""
        return sum(not r.backtracked for r in self.records)

    @property
    def backtracks(self):
        return sum(r.backtracked for r in self.records)

    def column(self, name, accepted_only=True):
        recs = self.accepted if accepted_only else self.records
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name)
                         for r in recs], dtype=float)

    @property
    def last(self):
        return self.records[-1] if self.records else None


def m_norm_sq(A, u, tau, sigma):
    """``u^T M u`` with ``M = [[I/tau, -A^H], [-A, I/sigma]]`` (may be negative)."""
    x, y = (u.x, u.y) if isinstance(u, Iterate) else u
    return (np.vdot(x, x).real / tau + np.vdot(y, y).real / sigma
            - 2.0 * inner(A.apply(x), y))


def pdhg_step(problem, iterate, step_state, products=None, k=0):
    """One PDHG step with the ``theta = 1`` prediction.

    Returns the new iterate and its cached ``Products``. The over-relaxed
    point is never formed explicitly: ``A(2 x_new - x) = 2 A x_new - A x``.
    """
    A = problem.A
    if products is None:
        products = Products.of(A, iterate)
    tau, sigma = step_state.tau, step_state.sigma
    # overflow is reported below as divergence, not as numpy warnings
    with np.errstate(over="ignore", invalid="ignore"):
        x_new = problem.prox_f(iterate.x - tau * products.ATy, tau)
        Ax_new = A.apply(x_new)
        y_new = problem.prox_g(iterate.y + sigma * (2.0 * Ax_new - products.Ax), sigma)
        ATy_new = A.adjoint(y_new)
    new = Iterate(x_new, y_new)
    if not new.is_finite():
        raise DivergenceError(k)
    return new, Products(Ax_new, ATy_new)


def compute_residuals(problem, old, new, step_state, old_products, new_products,
                      keep_vectors=False):
    """l1 norms of the primal and dual residuals from cached products only."""
    P = (old.x - new.x) / step_state.tau - (old_products.ATy - new_products.ATy)
    D = (old.y - new.y) / step_state.sigma - (old_products.Ax - new_products.Ax)
    p = float(np.sum(np.abs(P)))
    d = float(np.sum(np.abs(D)))
    if keep_vectors:
        return ResidualReport(p, d, P, D)
    return ResidualReport(p, d)


def _product_preserving(tau, product, direction=1.0):
    """Return ``(tau', sigma')`` with ``tau'`` near ``tau`` whose floating
    point product equals ``product`` bit for bit.

    When the representable products near ``product`` are coarser than its
    ulp, ``tau`` is perturbed by a growing relative amount (at most 2e-8)
    in the sign of ``direction`` until an exact pairing exists.
    """
    tau = float(tau)
    for scale in (1e-14, 1e-11, 1e-8):
        for j in range(21):
            if j == 0 and scale != 1e-14:
                continue
            t = tau * (1.0 + direction * j * scale)
            sigma = product / t
            for cand in (sigma, np.nextafter(sigma, math.inf), np.nextafter(sigma, -math.inf)):
                if t * float(cand) == product:
                    return t, float(cand)
    logger.debug("could not pair tau=%r with product %r exactly", tau, product)
    return tau, product / tau


# below this adaptivity level a balancing update only moves the stepsizes by
# rounding noise, so the controller stops adapting
ALPHA_FLOOR = 1e-10


def adapt_stepsizes(report, step_state, s=1.0):
    """Residual-balancing update.

    Primal residual too large: raise ``tau``, lower ``sigma`` by ``1 - alpha``.
    Dual residual too large: the reverse. Either change multiplies ``alpha``
    by ``eta``; the product ``tau * sigma`` is kept exactly. Once ``alpha``
    drops below ``ALPHA_FLOOR`` the state is returned unchanged.
    """
    st = step_state
    p, d = report.p, report.d
    if st.alpha < ALPHA_FLOOR:
        return st
    if p > s * d * st.delta:
        tau = st.tau / (1.0 - st.alpha)
    elif p < s * d / st.delta:
        tau = st.tau * (1.0 - st.alpha)
    else:
        return st
    # perturb against the change so no decrease exceeds the factor 1 - alpha
    tau, sigma = _product_preserving(tau, st.tau * st.sigma,
                                     -1.0 if tau > st.tau else 1.0)
    return dataclasses.replace(st, tau=float(tau), sigma=float(sigma), alpha=st.alpha * st.eta)


def backtrack_check(old, new, step_state, A_dx):
    """Backtracking ratio ``b``; the step is acceptable when ``b <= 1``.

    ``A_dx`` is ``A (x_new - x_old)``, available from cached products. For
    complex problems only the real part of the numerator counts. A step with
    no movement returns 0.
    """
    tau, sigma, gamma = step_state.tau, step_state.sigma, step_state.gamma
    dx = new.x - old.x
    dy = new.y - old.y
    denom = gamma * sigma * np.vdot(dx, dx).real + gamma * tau * np.vdot(dy, dy).real
    if denom == 0.0:
        return 0.0
    return 2.0 * tau * sigma * inner(A_dx, dy) / denom


def backtrack_update(step_state, b):
    """Shrink both stepsizes by ``beta / b`` after a failed check."""
    st = step_state
    factor = st.beta / b
    return dataclasses.replace(st, tau=st.tau * factor, sigma=st.sigma * factor,
                               backtrack_count=st.backtrack_count + 1)


def init_stepsizes(op, mode="known_L", rho_bound=None, seed=0, **params):
    """Initial ``StepState``.

    ``known_L``: ``tau = sigma = 0.95 / sqrt(rho_bound)`` and the product is
    held fixed afterwards. ``backtracking``: ``tau = sigma =
    sqrt(2 ||x_r|| / ||A^H A x_r||)`` for a seeded Gaussian ``x_r``, which
    deliberately overshoots ``1 / rho(A^H A)``.
    """
    if mode == "known_L":
        if rho_bound is None or not rho_bound > 0:
            raise ConfigurationError("known_L initialization needs a positive rho_bound")
        tau = 0.95 / math.sqrt(rho_bound)
        return StepState(tau=tau, sigma=tau, L=tau * tau, **params)
    if mode == "backtracking":
        rng = np.random.default_rng(seed)
        xr = rng.standard_normal(op.domain_dim)
        if op.is_complex:
            xr = xr + 1j * rng.standard_normal(op.domain_dim)
        ratio = np.linalg.norm(op.adjoint(op.apply(xr)))
        if ratio == 0.0:
            raise ConfigurationError("operator maps the random probe to zero; "
                                     "cannot initialize backtracking stepsizes")
        tau = math.sqrt(2.0 * np.linalg.norm(xr) / ratio)
        return StepState(tau=tau, sigma=tau, L=None, **params)
    raise ConfigurationError(f"unknown initialization mode {mode!r}")


def _initial_state(problem, policy, config, tau, sigma):
    params = dict(alpha=config.alpha0, gamma=config.gamma, beta=config.beta,
                  delta=config.delta, eta=config.eta)
    if tau is not None or sigma is not None:
        if tau is None or sigma is None:
            raise ConfigurationError("give both tau and sigma or neither")
        L = tau * sigma if policy == "adaptive" else None
        return StepState(tau=float(tau), sigma=float(sigma), L=L, **params)
    if policy == "adaptive_backtracking":
        return init_stepsizes(problem.A, "backtracking", seed=config.seed, **params)
    if problem.rho_bound is None:
        raise ConfigurationError(f"policy {policy!r} needs rho_bound or explicit stepsizes")
    if policy == "adaptive":
        return init_stepsizes(problem.A, "known_L", problem.rho_bound, **params)
    step = 1.0 / math.sqrt(problem.rho_bound)
    return StepState(tau=step, sigma=step, **params)


def solve(problem, policy="adaptive", config=None, tau=None, sigma=None, start=None):
    """Run PDHG on ``problem``.

    Parameters
    ----------
    problem : SaddlePointProblem
    policy : {"constant", "adaptive", "adaptive_backtracking"}
        ``constant`` keeps ``tau, sigma`` fixed (default ``1/sqrt(rho_bound)``
        each); ``adaptive`` balances residuals with a fixed product (default
        start ``0.95/sqrt(rho_bound)``); ``adaptive_backtracking`` also
        enforces ``b <= 1`` on every accepted step and needs no spectral
        bound.
    config : SolverConfig, optional
    tau, sigma : float, optional
        Override the policy's initial stepsizes.
    start : Iterate, optional
        Starting point; zeros by default.

    Returns
    -------
    (Iterate, SolverTrace)
        The last accepted iterate (in solver variables; use
        ``problem.solution`` to map back) and the per-step trace. A rejected
        backtracking step appears in the trace flagged ``backtracked`` and
        consumes one unit of ``max_iters``.
    """
    if policy not in POLICIES:
        raise ConfigurationError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    config = config or SolverConfig()
    s = problem.s if config.s is None else config.s
    state = _initial_state(problem, policy, config, tau, sigma)
    backtracking = policy == "adaptive_backtracking"
    adaptive = policy != "constant"

    A = problem.A
    it = start if start is not None else problem.zero_iterate()
    prods = Products.of(A, it)
    n_primal, n_dual = max(A.domain_dim, 1), max(A.range_dim, 1)
    trace = SolverTrace(policy=policy, config=config, initial_state=state,
                        history=[] if config.keep_history else None)

    for k in range(config.max_iters):
        try:
            new, new_prods = pdhg_step(problem, it, state, prods, k)
        except DivergenceError as exc:
            trace.status, trace.error = "diverged", str(exc)
            logger.warning("diverged at record %d", k)
            break

        b = None
        if backtracking:
            b = backtrack_check(it, new, state, new_prods.Ax - prods.Ax)
            if b > 1.0:
                trace.records.append(TraceRecord(k, state.tau, state.sigma, math.nan,
                                                 math.nan, b, True))
                state = backtrack_update(state, b)
                continue

        rep = compute_residuals(problem, it, new, state, prods, new_prods)
        obj = None
        if config.log_objective and problem.objective is not None:
            obj = float(problem.objective(problem.solution(new).x))
        trace.records.append(TraceRecord(k, state.tau, state.sigma, rep.p, rep.d, b, False, obj))
        it, prods = new, new_prods
        if trace.history is not None:
            trace.history.append(new)

        if not (math.isfinite(rep.p) and math.isfinite(rep.d)):
            trace.status, trace.error = "diverged", f"non-finite residual at record {k}"
            break
        if config.residual_norm == "mean":
            done = rep.p / n_primal <= config.tol and rep.d / n_dual <= config.tol
        else:
            done = rep.p <= config.tol and rep.d <= config.tol
        if done:
            trace.status = "converged"
            break
        if adaptive:
            state = adapt_stepsizes(rep, state, s)

    trace.final_state = state
    return it, trace


@dataclass
class ConvergenceDiagnostics:
    """Runtime checks of the stepsize conditions on a completed trace.

    ``phi_balance`` sums the relative stepsize decreases caused by residual
    balancing; ``phi_backtrack`` those caused by backtracking events.
    ``c1``/``c2`` are ``None`` when not applicable.
    """

    max_tau: float
    max_sigma: float
    bounded: bool
    phi_balance: float
    phi_backtrack: float
    phi_bound: float
    summable: bool
    c1: Optional[bool]
    c2: Optional[bool]
    backtrack_events: int
    last_backtrack: Optional[int]
    product_drift: float

    @property
    def ok(self):
        return self.bounded and self.summable and self.c1 is not False and self.c2 is not False


def check_convergence_conditions(trace, rho_bound=None, alpha0=None, eta=None):
    """Check boundedness, summability of stepsize decreases, and stability.

    ``product_drift`` is ``max_k |tau_k sigma_k - tau_0 sigma_0|`` over all
    records, which is exactly zero for non-backtracking adaptive runs.
    """
    cfg = trace.config or SolverConfig()
    alpha0 = cfg.alpha0 if alpha0 is None else alpha0
    eta = cfg.eta if eta is None else eta
    recs = trace.records
    taus = np.array([r.tau for r in recs], dtype=float)
    sigmas = np.array([r.sigma for r in recs], dtype=float)
    max_tau = float(taus.max()) if len(recs) else 0.0
    max_sigma = float(sigmas.max()) if len(recs) else 0.0

    phi_balance = 0.0
    phi_backtrack = 0.0
    for prev, cur in zip(recs[:-1], recs[1:]):
        phi = max((prev.tau - cur.tau) / prev.tau, (prev.sigma - cur.sigma) / prev.sigma, 0.0)
        if prev.backtracked:
            phi_backtrack += phi
        else:
            phi_balance += phi
    phi_bound = alpha0 / (1.0 - eta)

    c1 = None
    if rho_bound is not None:
        c1 = bool(np.all(taus * sigmas < 1.0 / rho_bound))
    events = [i for i, r in enumerate(recs) if r.backtracked]
    c2 = None
    if trace.policy == "adaptive_backtracking":
        c2 = all(r.b is not None and r.b <= 1.0 for r in recs if not r.backtracked)
    drift = float(np.max(np.abs(taus * sigmas - taus[0] * sigmas[0]))) if len(recs) else 0.0
    return ConvergenceDiagnostics(
        max_tau=max_tau, max_sigma=max_sigma,
        bounded=bool(np.isfinite(max_tau) and np.isfinite(max_sigma)),
        phi_balance=phi_balance, phi_backtrack=phi_backtrack, phi_bound=phi_bound,
        summable=phi_balance <= phi_bound, c1=c1, c2=c2,
        backtrack_events=len(events), last_backtrack=events[-1] if events else None,
        product_drift=drift)


def ergodic_average(history, t):
    """Mean of the first ``t`` accepted iterates ``u_1 .. u_t``."""
    if history is None:
        raise ConfigurationError("iterate history was not retained; "
                                 "solve with SolverConfig(keep_history=True)")
    if not 1 <= t <= len(history):
        raise ConfigurationError(f"t={t} outside 1..{len(history)}")
    x = np.mean([u.x for u in history[:t]], axis=0)
    y = np.mean([u.y for u in history[:t]], axis=0)
    return Iterate(x, y)
