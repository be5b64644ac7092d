"""Linear operators with forward and adjoint application.

Every operator acts on flat 1-D numpy vectors. Complex operators use the
Hermitian adjoint, so ``inner(A x, y) == inner(x, A.adjoint(y))`` holds with
``inner(a, b) = vdot(b, a)`` in both the real and complex case.
"""

import numpy as np

from .exceptions import ShapeError

__all__ = [
    "LinearOperator",
    "IdentityOperator",
    "MatrixOperator",
    "ScaledOperator",
    "GradientOperator2D",
    "SubsampledOrthogonalOperator",
    "StackedOperator",
    "HorizontalOperator",
    "apply",
    "apply_adjoint",
    "inner",
    "fwht",
    "estimate_spectral_norm",
]


def inner(a, b):
    """Real part of the Hermitian inner product ``<a, b>``."""
    return float(np.real(np.vdot(b, a)))


class LinearOperator:
    """Base class for a linear map from a length-``domain_dim`` vector space
    to a length-``range_dim`` one.

    Subclasses implement ``_apply`` and ``_adjoint``; the public methods
    validate shapes (and field) before dispatching.
    """

    def __init__(self, domain_dim, range_dim, field="real"):
        if domain_dim < 1 or range_dim < 0:
            raise ShapeError("operator dimensions must be positive")
        if field not in ("real", "complex"):
            raise ValueError(f"unknown field {field!r}")
        self.domain_dim = int(domain_dim)
        self.range_dim = int(range_dim)
        self.field = field

    @property
    def is_complex(self):
        return self.field == "complex"

    @property
    def dtype(self):
        return np.complex128 if self.is_complex else np.float64

    @property
    def shape(self):
        return (self.range_dim, self.domain_dim)

    def _check(self, v, n, what):
        v = np.asarray(v)
        if v.ndim != 1 or v.shape[0] != n:
            raise ShapeError(f"{type(self).__name__}.{what} expects a vector of length {n}, "
                             f"got shape {v.shape}")
        if not self.is_complex and np.iscomplexobj(v):
            raise ShapeError(f"{type(self).__name__} is real but received a complex vector")
        return v

    def apply(self, x):
        return self._apply(self._check(x, self.domain_dim, "apply"))

    def adjoint(self, y):
        return self._adjoint(self._check(y, self.range_dim, "adjoint"))

    __call__ = apply

    def _apply(self, x):
        raise NotImplementedError

    def _adjoint(self, y):
        raise NotImplementedError

    def to_dense(self):
        """Materialize the operator column by column (tests and small problems only)."""
        cols = [self.apply(e.astype(self.dtype)) for e in np.eye(self.domain_dim)]
        return np.array(cols, dtype=self.dtype).T

    def __neg__(self):
        return ScaledOperator(self, -1.0)

    def __repr__(self):
        return f"{type(self).__name__}({self.range_dim}x{self.domain_dim}, {self.field})"


def apply(op, x):
    """Return ``op @ x``."""
    return op.apply(x)


def apply_adjoint(op, y):
    """Return ``op^H @ y``."""
    return op.adjoint(y)


class IdentityOperator(LinearOperator):
    def __init__(self, n, field="real"):
        super().__init__(n, n, field)

    def _apply(self, x):
        return np.array(x, dtype=np.result_type(x, self.dtype))

    _adjoint = _apply


class ScaledOperator(LinearOperator):
    """``scale * op`` for a real scalar ``scale``."""

    def __init__(self, op, scale):
        super().__init__(op.domain_dim, op.range_dim, op.field)
        self.op = op
        self.scale = float(scale)

    def _apply(self, x):
        return self.scale * self.op.apply(x)

    def _adjoint(self, y):
        return self.scale * self.op.adjoint(y)


class MatrixOperator(LinearOperator):
    """Dense matrix operator."""

    def __init__(self, matrix):
        matrix = np.atleast_2d(np.asarray(matrix))
        field = "complex" if np.iscomplexobj(matrix) else "real"
        matrix = matrix.astype(np.complex128 if field == "complex" else np.float64)
        super().__init__(matrix.shape[1], matrix.shape[0], field)
        self.matrix = matrix
        self._matrix_h = matrix.conj().T

    def _apply(self, x):
        return self.matrix @ x

    def _adjoint(self, y):
        return self._matrix_h @ y

    def to_dense(self):
        return self.matrix.copy()


class GradientOperator2D(LinearOperator):
    """Forward-difference image gradient with replicated (Neumann) boundary.

    The image is the row-major flattening of a ``rows x cols`` array. The
    output stacks the horizontal differences (along columns) followed by the
    vertical differences (along rows); the last column / last row difference
    is zero. ``rho(G^T G) < 8`` for every grid size.
    """

    def __init__(self, rows, cols):
        self.rows = int(rows)
        self.cols = int(cols)
        n = self.rows * self.cols
        super().__init__(n, 2 * n)

    def _apply(self, x):
        u = x.reshape(self.rows, self.cols)
        dx = np.zeros_like(u)
        dy = np.zeros_like(u)
        dx[:, :-1] = u[:, 1:] - u[:, :-1]
        dy[:-1, :] = u[1:, :] - u[:-1, :]
        return np.concatenate([dx.ravel(), dy.ravel()])

    def _adjoint(self, y):
        # negative divergence of the field (px, py)
        n = self.domain_dim
        px = y[:n].reshape(self.rows, self.cols)
        py = y[n:].reshape(self.rows, self.cols)
        out = np.zeros_like(px)
        out[:, :-1] -= px[:, :-1]
        out[:, 1:] += px[:, :-1]
        out[:-1, :] -= py[:-1, :]
        out[1:, :] += py[:-1, :]
        return out.ravel()

    def exact_rho(self):
        """Closed-form largest eigenvalue of ``G^T G`` for this grid."""
        def lam(m):
            return 4.0 * np.sin(np.pi * (m - 1) / (2 * m)) ** 2 if m > 1 else 0.0
        return lam(self.rows) + lam(self.cols)


def fwht(x):
    """Orthonormal fast Walsh-Hadamard transform (natural/Hadamard order).

    The transform is symmetric and orthogonal, hence its own inverse:
    ``fwht(fwht(x)) == x``. Runs in ``O(n log n)``.

    Raises
    ------
    ShapeError
        If ``len(x)`` is not a power of two.
    """
    a = np.array(x, dtype=np.result_type(x, np.float64))
    if a.ndim != 1:
        raise ShapeError("fwht expects a 1-D vector")
    n = a.shape[0]
    if n < 1 or n & (n - 1):
        raise ShapeError(f"fwht length must be a power of two, got {n}")
    h = 1
    while h < n:
        a = a.reshape(-1, 2, h)
        top = a[:, 0, :] + a[:, 1, :]
        bot = a[:, 0, :] - a[:, 1, :]
        a = np.stack([top, bot], axis=1).reshape(n)
        h *= 2
    return a / np.sqrt(n)


class SubsampledOrthogonalOperator(LinearOperator):
    """``R H`` where ``H`` is an orthonormal transform and ``R`` keeps the
    rows flagged in ``mask``.

    The range is the compact vector of kept coefficients, so
    ``range_dim == mask.sum()``. ``scatter`` and ``gather`` move between the
    compact vector and the full length-``n`` coefficient vector.
    """

    def __init__(self, mask, transform="walsh_hadamard"):
        mask = np.asarray(mask, dtype=bool)
        n = mask.shape[0]
        if n & (n - 1):
            raise ShapeError(f"transform size must be a power of two, got {n}")
        if transform not in ("walsh_hadamard", "fourier"):
            raise ValueError(f"unknown transform {transform!r}")
        self.mask = mask
        self.n = n
        self.transform = transform
        self.index = np.flatnonzero(mask)
        field = "complex" if transform == "fourier" else "real"
        # an empty mask is allowed: the measurement vector is then empty
        super().__init__(n, len(self.index), field)

    @classmethod
    def random(cls, n, m, transform="walsh_hadamard", seed=0, always_keep=()):
        """Keep ``m`` of the ``n`` rows, chosen uniformly without replacement."""
        rng = np.random.default_rng(seed)
        mask = np.zeros(n, dtype=bool)
        keep = list(always_keep)
        mask[keep] = True
        rest = np.setdiff1d(np.arange(n), keep)
        mask[rng.choice(rest, size=max(m - len(keep), 0), replace=False)] = True
        return cls(mask, transform)

    def forward_full(self, x):
        """``H x``."""
        if self.transform == "fourier":
            return np.fft.fft(x, norm="ortho")
        return fwht(x)

    def inverse_full(self, c):
        """``H^H c``."""
        if self.transform == "fourier":
            return np.fft.ifft(c, norm="ortho")
        return fwht(c)

    def scatter(self, y):
        full = np.zeros(self.n, dtype=np.result_type(y, self.dtype))
        full[self.index] = y
        return full

    def gather(self, c):
        return c[self.index]

    def _apply(self, x):
        return self.gather(self.forward_full(x))

    def _adjoint(self, y):
        return self.inverse_full(self.scatter(y))


class StackedOperator(LinearOperator):
    """Vertical stack ``[A_1; A_2; ...]`` of operators sharing a domain."""

    def __init__(self, blocks):
        blocks = list(blocks)
        dims = {b.domain_dim for b in blocks}
        if len(dims) != 1:
            raise ShapeError("stacked blocks must share domain_dim")
        field = "complex" if any(b.is_complex for b in blocks) else "real"
        super().__init__(blocks[0].domain_dim, sum(b.range_dim for b in blocks), field)
        self.blocks = blocks
        self.offsets = np.cumsum([0] + [b.range_dim for b in blocks])

    def split(self, y):
        return [y[a:b] for a, b in zip(self.offsets[:-1], self.offsets[1:])]

    def _apply(self, x):
        return np.concatenate([b.apply(x) for b in self.blocks])

    def _adjoint(self, y):
        parts = self.split(y)
        out = self.blocks[0].adjoint(parts[0])
        for b, part in zip(self.blocks[1:], parts[1:]):
            out = out + b.adjoint(part)
        return out


class HorizontalOperator(LinearOperator):
    """Horizontal concatenation ``[A_1, A_2, ...]`` acting on ``(x_1, x_2, ...)``."""

    def __init__(self, blocks):
        blocks = list(blocks)
        dims = {b.range_dim for b in blocks}
        if len(dims) != 1:
            raise ShapeError("horizontal blocks must share range_dim")
        field = "complex" if any(b.is_complex for b in blocks) else "real"
        super().__init__(sum(b.domain_dim for b in blocks), blocks[0].range_dim, field)
        self.blocks = blocks
        self.offsets = np.cumsum([0] + [b.domain_dim for b in blocks])

    def split(self, x):
        return [x[a:b] for a, b in zip(self.offsets[:-1], self.offsets[1:])]

    def _apply(self, x):
        parts = self.split(x)
        out = self.blocks[0].apply(parts[0])
        for b, part in zip(self.blocks[1:], parts[1:]):
            out = out + b.apply(part)
        return out

    def _adjoint(self, y):
        return np.concatenate([b.adjoint(y) for b in self.blocks])


def _random_vector(rng, n, is_complex):
    v = rng.standard_normal(n)
    if is_complex:
        v = v + 1j * rng.standard_normal(n)
    return v


def estimate_spectral_norm(op, iters=100, seed=0):
    """Estimate ``rho(A^T A)`` (the squared operator norm) by power iteration.

    Each iterate ``x`` yields the lower bound ``||A^T A x|| / ||x||``; the
    running maximum is returned, so the estimate never exceeds
    ``rho(A^T A)`` and is nondecreasing in ``iters``. Returns 0 for the zero
    operator.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    rng = np.random.default_rng(seed)
    x = _random_vector(rng, op.domain_dim, op.is_complex)
    x /= np.linalg.norm(x)
    best = 0.0
    for _ in range(iters):
        z = op.adjoint(op.apply(x))
        nz = np.linalg.norm(z)
        if nz == 0.0:
            break
        best = max(best, float(nz))
        x = z / nz
    return best
