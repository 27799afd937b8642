"""Sparsity promoting penalties built from a convex SPF and its Moreau envelope.

For a convex sparsity promoting function ``phi`` and an envelope index
``alpha > 0`` the structured penalty is ``phi_alpha = phi - env_alpha(phi)``.
Two families are implemented:

* ``phi = |.|`` on the real line, where ``phi_alpha`` is the minimax concave
  penalty (MCP) with plateau ``alpha / 2``;
* ``phi`` a compositional norm ``sum_j ||x[omega_j]||`` over a partition of
  the coordinates, which contains isotropic total variation as the case of
  two-element blocks.

Scalar functions accept numpy arrays and act elementwise unless stated
otherwise. The threshold set of ``phi`` is its subdifferential at the origin:
``[-1, 1]`` for the absolute value, the product of unit balls for a
compositional norm.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "ProxResult",
    "ScalarMCP",
    "Partition",
    "CompositionalPenalty",
    "SetValuedProxError",
    "prox_abs",
    "env_abs",
    "eval_mcp",
    "prox_mcp",
    "prox_mcp_select",
    "prox_l2",
    "prox_l2_mcp",
    "eval_compositional",
    "env_compositional",
    "prox_compositional",
    "prox_compositional_mcp",
    "prox_compositional_conjugate",
    "env_gradient",
]


class SetValuedProxError(ValueError):
    """Raised when a vector prox is requested in a set-valued regime."""


# ---------------------------------------------------------------------------
# scalar case: phi = |.|
# ---------------------------------------------------------------------------


def prox_abs(x, beta):
    """Soft thresholding, the proximity operator of ``beta * |.|``."""
    return np.sign(x) * np.maximum(np.abs(x) - beta, 0.0)


def env_abs(x, alpha):
    """Moreau envelope of ``|.|`` with index ``alpha`` (the Huber function)."""
    ax = np.abs(x)
    return np.where(ax <= alpha, 0.5 * ax * ax / alpha, ax - 0.5 * alpha)


def eval_mcp(x, alpha):
    """MCP value ``|x| - env_abs(x, alpha)``.

    Equal to ``|x| - x**2 / (2 alpha)`` on ``(-alpha, alpha)`` and to the
    plateau ``alpha / 2`` elsewhere.
    """
    ax = np.abs(x)
    # the plateau branch at |x| == alpha keeps the value exactly alpha / 2
    return np.where(ax < alpha, ax - 0.5 * ax * ax / alpha, 0.5 * alpha)


@dataclass(frozen=True)
class ProxResult:
    """Minimizer set of a (possibly nonconvex) scalar prox problem.

    ``kind`` is ``"single"``, ``"finite-set"`` or ``"interval"``. For an
    interval the two entries of ``points`` are its endpoints ``lo <= hi``.
    Entries are floats for scalar problems and arrays for vector problems.
    """

    kind: str
    points: tuple

    def __post_init__(self):
        if self.kind == "single" and len(self.points) != 1:
            raise ValueError("single prox result needs exactly one point")
        if self.kind == "finite-set" and not 1 <= len(self.points) <= 2:
            raise ValueError("finite-set prox result needs one or two points")
        if self.kind == "interval" and len(self.points) != 2:
            raise ValueError("interval prox result needs two endpoints")
        if self.kind not in ("single", "finite-set", "interval"):
            raise ValueError(f"unknown prox result kind {self.kind!r}")

    def select(self):
        """Return the minimizer of smallest magnitude (the sparsest one)."""
        return min(self.points, key=lambda p: float(np.linalg.norm(p)))

    def contains(self, w, atol: float = 0.0) -> bool:
        """Membership test; intervals are checked against the segment."""
        w = np.asarray(w, dtype=float)
        if self.kind != "interval":
            return any(np.allclose(w, p, rtol=0.0, atol=atol) for p in self.points)
        lo, hi = (np.asarray(p, dtype=float) for p in self.points)
        seg = hi - lo
        den = float(np.dot(np.ravel(seg), np.ravel(seg)))
        if den == 0.0:
            return bool(np.allclose(w, lo, rtol=0.0, atol=atol))
        t = float(np.clip(np.dot(np.ravel(w - lo), np.ravel(seg)) / den, 0.0, 1.0))
        return bool(np.allclose(w, lo + t * seg, rtol=0.0, atol=atol))


def prox_mcp(x: float, alpha: float, beta: float) -> ProxResult:
    """Proximity operator of ``beta * eval_mcp(., alpha)`` at a scalar.

    The result depends on how ``beta`` compares with ``alpha``:

    * ``beta < alpha``: single valued, a firm threshold that scales the soft
      threshold by ``alpha / (alpha - beta)`` on ``|x| <= alpha`` and is the
      identity beyond;
    * ``beta == alpha``: ``{0}`` below ``alpha``, the segment between 0 and
      ``x`` at ``|x| == alpha``, ``{x}`` above;
    * ``beta > alpha``: hard thresholding at ``sqrt(alpha * beta)`` with the
      two-point set ``{0, x}`` exactly at the threshold.
    """
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    x = float(x)
    ax = abs(x)
    if beta < alpha:
        if ax > alpha:
            return ProxResult("single", (x,))
        w = alpha / (alpha - beta) * np.sign(x) * max(ax - beta, 0.0)
        return ProxResult("single", (float(w),))
    if beta == alpha:
        if ax < alpha:
            return ProxResult("single", (0.0,))
        if ax == alpha:
            return ProxResult("interval", (0.0, x)) if x > 0 else ProxResult("interval", (x, 0.0))
        return ProxResult("single", (x,))
    thresh = np.sqrt(alpha * beta)
    if ax < thresh:
        return ProxResult("single", (0.0,))
    if ax == thresh:
        return ProxResult("finite-set", (0.0, x))
    return ProxResult("single", (x,))


def prox_mcp_select(x, alpha, beta):
    """Elementwise MCP prox, taking the sparsest point where it is set valued."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    if beta < alpha:
        firm = alpha / (alpha - beta) * np.sign(x) * np.maximum(ax - beta, 0.0)
        return np.where(ax <= alpha, firm, x)
    thresh = alpha if beta == alpha else np.sqrt(alpha * beta)
    return np.where(ax <= thresh, 0.0, x)


@dataclass(frozen=True)
class ScalarMCP:
    """The MCP ``|.|_alpha`` as a penalty object."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    def eval(self, x):
        return eval_mcp(x, self.alpha)

    def env(self, x):
        """Envelope of the convex part ``|.|``."""
        return env_abs(x, self.alpha)

    def prox(self, x: float, beta: float) -> ProxResult:
        return prox_mcp(x, self.alpha, beta)


# ---------------------------------------------------------------------------
# Euclidean norm on a single block
# ---------------------------------------------------------------------------


def _direction(x: np.ndarray):
    nrm = float(np.linalg.norm(x))
    if nrm == 0.0:
        return nrm, np.zeros_like(x)
    return nrm, x / nrm


def prox_l2(x, beta: float) -> np.ndarray:
    """Block soft thresholding: prox of ``beta * ||.||`` (``0/||0|| = 0``)."""
    x = np.asarray(x, dtype=float)
    nrm, u = _direction(x)
    return prox_abs(nrm, beta) * u


def prox_l2_mcp(x, alpha: float, beta: float) -> ProxResult:
    """Prox of ``beta * |.|_alpha(||.||)``.

    The penalty is isotropic, so each scalar minimizer ``p`` of the norm
    problem gives the vector minimizer ``p * x / ||x||``. Interval results
    keep the ``"interval"`` tag with endpoints materialized as vectors.
    """
    x = np.asarray(x, dtype=float)
    nrm, u = _direction(x)
    scalar = prox_mcp(nrm, alpha, beta)
    return ProxResult(scalar.kind, tuple(p * u for p in scalar.points))


# ---------------------------------------------------------------------------
# compositional norms
# ---------------------------------------------------------------------------


class Partition:
    """A partition of ``{0, ..., d-1}`` into nonempty disjoint blocks.

    Blocks are kept as index arrays; extraction is a gather and no selection
    matrix is ever formed. Partitions whose block ``j`` is
    ``{j, m + j, ..., (k - 1) m + j}`` (``d = k m``) are recognized and use
    reshapes instead of scatter/gather. Both TV pairs and singletons have
    this layout.
    """

    def __init__(self, blocks: Iterable[Sequence[int]], d: Optional[int] = None):
        blocks = tuple(np.asarray(b, dtype=np.intp).ravel() for b in blocks)
        if not blocks:
            raise ValueError("a partition needs at least one block")
        if any(b.size == 0 for b in blocks):
            raise ValueError("partition blocks must be nonempty")
        flat = np.concatenate(blocks)
        if d is None:
            d = int(flat.max()) + 1
        if flat.size != d or np.any(np.sort(flat) != np.arange(d)):
            raise ValueError("blocks must be disjoint and cover {0, ..., d-1}")
        for b in blocks:
            b.setflags(write=False)
        self.blocks = blocks
        self.d = int(d)
        labels = np.empty(d, dtype=np.intp)
        for j, b in enumerate(blocks):
            labels[b] = j
        labels.setflags(write=False)
        self.labels = labels
        self._stride = self._detect_stride()

    @classmethod
    def _strided(cls, k: int, m: int) -> "Partition":
        idx = np.arange(k * m).reshape(k, m)
        return cls((idx[:, j] for j in range(m)), d=k * m)

    @classmethod
    def singletons(cls, d: int) -> "Partition":
        """One block per coordinate: the compositional norm is ``||.||_1``."""
        return cls._strided(1, d)

    @classmethod
    def pairs(cls, m: int) -> "Partition":
        """Blocks ``{j, m + j}``, pairing the two gradient components of TV."""
        return cls._strided(2, m)

    def _detect_stride(self):
        k = self.blocks[0].size
        m = len(self.blocks)
        if k * m != self.d:
            return None
        expected = np.arange(self.d).reshape(k, m)
        for j, b in enumerate(self.blocks):
            if b.size != k or np.any(b != expected[:, j]):
                return None
        return k, m

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def __len__(self) -> int:
        return len(self.blocks)

    def __repr__(self) -> str:
        return f"Partition(d={self.d}, n_blocks={self.n_blocks})"

    def check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.size != self.d:
            raise ValueError(f"expected a vector of length {self.d}, got shape {x.shape}")
        return x

    def block_norms(self, x) -> np.ndarray:
        """Euclidean norm of every block, in block order."""
        x = self.check(x)
        if self._stride is not None:
            k, m = self._stride
            if k == 1:
                return np.abs(x)
            x2 = x.reshape(k, m)
            return np.sqrt(np.einsum("ij,ij->j", x2, x2))
        return np.sqrt(np.bincount(self.labels, weights=x * x, minlength=self.n_blocks))

    def scale_blocks(self, x, factors) -> np.ndarray:
        """Multiply every entry of block ``j`` by ``factors[j]``."""
        x = self.check(x)
        if self._stride is not None:
            k, m = self._stride
            return (x.reshape(k, m) * factors).ravel()
        return x * np.asarray(factors)[self.labels]

    def radial_map(self, x, fn) -> np.ndarray:
        """Replace each block ``v`` by ``fn(||v||) v / ||v||`` (``0/||0|| = 0``)."""
        r = self.block_norms(x)
        out = fn(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            factors = np.where(r > 0, out / r, 0.0)
        return self.scale_blocks(x, factors)


def eval_compositional(x, p: Partition, alpha: Optional[float] = None) -> float:
    """Compositional norm, or its structured penalty when ``alpha`` is given."""
    r = p.block_norms(x)
    if alpha is None or alpha == 0:
        return float(r.sum())
    return float(eval_mcp(r, alpha).sum())


def env_compositional(x, p: Partition, alpha: float) -> float:
    """Moreau envelope of the compositional norm, summed blockwise."""
    return float(env_abs(p.block_norms(x), alpha).sum())


def prox_compositional(x, p: Partition, beta: float) -> np.ndarray:
    """Prox of ``beta`` times the compositional norm (block soft threshold)."""
    return p.radial_map(x, lambda r: np.maximum(r - beta, 0.0))


def prox_compositional_mcp(x, p: Partition, alpha: float, beta: float) -> np.ndarray:
    """Prox of ``beta * phi_alpha`` for a compositional norm, ``beta < alpha``.

    Blocks are independent; each gets the isotropic MCP prox of its norm.
    """
    if not 0 < beta < alpha:
        raise SetValuedProxError(
            "set-valued regime; use blockwise prox_l2_mcp directly"
        )
    return p.radial_map(x, lambda r: prox_mcp_select(r, alpha, beta))


def prox_compositional_conjugate(u, p: Partition, radius: float = 1.0) -> np.ndarray:
    """Prox of ``sigma * phi*`` for any ``sigma > 0``: project each block on a ball.

    ``phi*`` is the indicator of the product of unit balls, so its prox is
    a projection and does not depend on ``sigma``. For the scaled penalty
    ``lam * phi`` pass ``radius=lam``.
    """
    return p.radial_map(u, lambda r: np.minimum(r, radius))


def env_gradient(x, p: Partition, alpha: float) -> np.ndarray:
    """Gradient of ``env_alpha(phi)``: ``(x - prox_{alpha phi}(x)) / alpha``.

    Computed as the block projection of ``x / alpha`` onto unit balls.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return prox_compositional_conjugate(np.asarray(x, dtype=float) / alpha, p)


@dataclass(frozen=True)
class CompositionalPenalty:
    """Compositional norm over ``partition``; with ``alpha`` set, its SPF ``phi_alpha``."""

    partition: Partition
    alpha: Optional[float] = None

    def __post_init__(self):
        if self.alpha is not None and self.alpha < 0:
            raise ValueError("alpha must be positive")

    @property
    def is_convex(self) -> bool:
        return not self.alpha

    def eval(self, x) -> float:
        return eval_compositional(x, self.partition, self.alpha)

    def prox(self, x, beta: float) -> np.ndarray:
        if self.is_convex:
            return prox_compositional(x, self.partition, beta)
        return prox_compositional_mcp(x, self.partition, self.alpha, beta)

    def prox_conjugate(self, u, radius: float = 1.0) -> np.ndarray:
        return prox_compositional_conjugate(u, self.partition, radius)

    def env(self, x) -> float:
        if self.is_convex:
            raise ValueError("envelope index alpha is not set")
        return env_compositional(x, self.partition, self.alpha)

    def env_gradient(self, x) -> np.ndarray:
        if self.is_convex:
            raise ValueError("envelope index alpha is not set")
        return env_gradient(x, self.partition, self.alpha)
