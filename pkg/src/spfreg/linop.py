"""Matrix-free difference operators and operator-norm estimation.

Images are vectorized column by column (Fortran order): pixel ``(i, j)`` of
an ``N x N`` image sits at index ``i + N j``. With this convention the 2-D
gradient is ``B = [I (x) D ; D (x) I]``. The top half, ``I (x) D``, applies
the 1-D difference ``D`` inside every column. The bottom half, ``D (x) I``,
differences neighbouring columns. ``D`` has a zero first row, so
``(Dx)_0 = 0`` and ``(Dx)_i = x_i - x_{i-1}``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .penalty import Partition

__all__ = [
    "LinearOperator",
    "MatrixOperator",
    "DiffOp1D",
    "GradOperator2D",
    "PowerIterationError",
    "apply",
    "apply_adjoint",
    "op_norm_sq",
    "safe_norm_sq",
]


class PowerIterationError(RuntimeError):
    pass


class LinearOperator:
    """Base class: a linear map ``R^domain_dim -> R^range_dim``."""

    domain_dim: int
    range_dim: int

    def _apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _apply_adjoint(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.domain_dim,):
            raise ValueError(f"expected input of length {self.domain_dim}, got shape {x.shape}")
        return self._apply(x)

    def apply_adjoint(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.range_dim,):
            raise ValueError(f"expected input of length {self.range_dim}, got shape {y.shape}")
        return self._apply_adjoint(y)

    __call__ = apply

    @property
    def T(self) -> "_Adjoint":
        return _Adjoint(self)

    def default_partition(self) -> Partition:
        """Partition of the range used by the TV-type penalty on this operator."""
        return Partition.singletons(self.range_dim)

    def to_dense(self) -> np.ndarray:
        """Dense matrix, column by column. Meant for small operators in tests."""
        eye = np.eye(self.domain_dim)
        return np.column_stack([self._apply(e) for e in eye])

    def norm_sq(self, tol: float = 1e-8) -> float:
        return op_norm_sq(self, tol)


class _Adjoint(LinearOperator):
    def __init__(self, op: LinearOperator):
        self.op = op
        self.domain_dim, self.range_dim = op.range_dim, op.domain_dim

    def _apply(self, x):
        return self.op._apply_adjoint(x)

    def _apply_adjoint(self, y):
        return self.op._apply(y)


class MatrixOperator(LinearOperator):
    """Explicit dense matrix, e.g. ``B = [1]`` for scalar toy problems."""

    def __init__(self, matrix):
        m = np.atleast_2d(np.asarray(matrix, dtype=float))
        m.setflags(write=False)
        self.matrix = m
        self.range_dim, self.domain_dim = m.shape

    def _apply(self, x):
        return self.matrix @ x

    def _apply_adjoint(self, y):
        return self.matrix.T @ y

    def __repr__(self):
        return f"MatrixOperator(shape={self.matrix.shape})"


class DiffOp1D(LinearOperator):
    """1-D forward difference with a zero first row, ``n x n``."""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("n must be positive")
        self.n = self.domain_dim = self.range_dim = int(n)

    def _apply(self, x):
        out = np.zeros_like(x)
        np.subtract(x[1:], x[:-1], out=out[1:])
        return out

    def _apply_adjoint(self, y):
        out = np.zeros_like(y)
        out[:-1] -= y[1:]
        out[1:] += y[1:]
        return out

    def __repr__(self):
        return f"DiffOp1D(n={self.n})"


class GradOperator2D(LinearOperator):
    """Stacked 2-D gradient ``[I (x) D ; D (x) I]`` for ``N x N`` images.

    Entries ``0 .. N^2-1`` of the output are vertical (within-column)
    differences, entries ``N^2 .. 2N^2-1`` horizontal ones; the TV block of
    pixel ``j`` is ``{j, N^2 + j}``.
    """

    def __init__(self, n_side: int):
        if n_side < 1:
            raise ValueError("n_side must be positive")
        self.n_side = int(n_side)
        self.domain_dim = self.n_side ** 2
        self.range_dim = 2 * self.domain_dim

    # A column-major vector read in C order is the transposed image, so
    # ``t[j, i]`` is pixel (i, j). Vertical differences run along axis 1 of t.
    def _apply(self, x):
        n = self.n_side
        t = x.reshape(n, n)
        out = np.zeros(self.range_dim)
        vert = out[: self.domain_dim].reshape(n, n)
        horiz = out[self.domain_dim:].reshape(n, n)
        np.subtract(t[:, 1:], t[:, :-1], out=vert[:, 1:])
        np.subtract(t[1:, :], t[:-1, :], out=horiz[1:, :])
        return out

    def _apply_adjoint(self, y):
        n = self.n_side
        vert = y[: self.domain_dim].reshape(n, n)
        horiz = y[self.domain_dim:].reshape(n, n)
        out = np.zeros((n, n))
        out[:, :-1] -= vert[:, 1:]
        out[:, 1:] += vert[:, 1:]
        out[:-1, :] -= horiz[1:, :]
        out[1:, :] += horiz[1:, :]
        return out.ravel()

    def default_partition(self) -> Partition:
        return Partition.pairs(self.domain_dim)

    def closed_form_norm_sq(self) -> float:
        """``8 sin^2((N-1) pi / (2N))``, the largest eigenvalue of ``B^T B``."""
        n = self.n_side
        return 8.0 * np.sin((n - 1) * np.pi / (2 * n)) ** 2

    def __repr__(self):
        return f"GradOperator2D(n_side={self.n_side})"


def apply(op: LinearOperator, x) -> np.ndarray:
    return op.apply(x)


def apply_adjoint(op: LinearOperator, y) -> np.ndarray:
    return op.apply_adjoint(y)


def op_norm_sq(op: LinearOperator, tol: float = 1e-8, max_iter: int = 10_000, seed: int = 0) -> float:
    """Largest eigenvalue of ``op^T op`` by power iteration.

    Iterates from a seeded random start until the relative change of the
    Rayleigh quotient drops below ``tol``. Deterministic for a given seed.

    Raises
    ------
    PowerIterationError
        If the estimate has not settled after ``max_iter`` iterations.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.domain_dim)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = op.apply_adjoint(op.apply(v))
        new = float(np.dot(v, w))
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        if abs(new - est) <= tol * abs(new):
            return new
        est = new
    raise PowerIterationError(f"power iteration did not converge in {max_iter} iterations")


@lru_cache(maxsize=32)
def _grad2d_norm_sq(n_side: int) -> float:
    return op_norm_sq(GradOperator2D(n_side))


def safe_norm_sq(op: LinearOperator, margin: float = 1e-6) -> float:
    """Power-iteration estimate of ``||op||^2`` inflated by a relative margin.

    Step-size conditions are strict inequalities, so solvers use this value.
    Gradient operators are cached by image size.
    """
    if isinstance(op, GradOperator2D):
        base = _grad2d_norm_sq(op.n_side)
    else:
        base = op_norm_sq(op)
    return base * (1.0 + margin)
