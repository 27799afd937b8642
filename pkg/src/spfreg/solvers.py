"""Solvers for ``min 1/(2 lam) ||x - z||^2 + phi_alpha(B x)`` over a box ``C``.

``phi`` is a compositional norm (isotropic TV for the 2-D gradient, the
l1 norm for 1-D differences) and ``phi_alpha = phi - env_alpha(phi)``.

Four schemes are provided:

``rof``
    The convex ROF-TV baseline (``phi`` in place of ``phi_alpha``) solved by
    Condat's primal-dual splitting.
``pd``
    The same splitting with the envelope moved into the smooth part:
    ``F = 1/(2 lam)||x - z||^2 - env_alpha(phi)(B x)``, ``H = phi``.
``dca``
    Difference-of-convex iterations. Each step linearizes the envelope and
    solves an ROF problem on shifted data ``z + lam B^T grad env(B x_k)``.
``pdhg``
    Primal-dual hybrid gradient for semiconvex ``P = phi_alpha``, using the
    closed form MCP prox.

ROF, PD and DCA work on the objective multiplied by ``lam``
(``F = 1/2||x - z||^2 - lam env``, ``H = lam phi``). The gradient of the
smooth part is then 1-Lipschitz and ``tau = 0.99 / (0.5 + sigma ||B||^2)``
satisfies the step condition ``1/tau - sigma ||B||^2 > 1/2``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Optional, Tuple

import numpy as np

from .linop import DiffOp1D, GradOperator2D, LinearOperator, safe_norm_sq
from .penalty import (
    Partition,
    env_compositional,
    env_gradient,
    eval_compositional,
    prox_compositional_conjugate,
    prox_compositional_mcp,
)

__all__ = [
    "ALGORITHMS",
    "ProblemSpec",
    "SolverParams",
    "SolveReport",
    "RegimeError",
    "DivergenceError",
    "objective",
    "rof_objective",
    "smooth_part",
    "convexity_regime",
    "grad_F",
    "default_params",
    "solve",
    "solve_rof",
    "solve_pd",
    "solve_dca",
    "solve_pdhg",
]

ALGORITHMS = ("rof", "pd", "dca", "pdhg")

STRICTLY_CONVEX = "strictly-convex"
CONVEX = "convex"
NONCONVEX = "nonconvex-possible"


class RegimeError(ValueError):
    """Parameters outside the range where a solver is known to converge."""


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    """Data, weights, operator and constraint box of a denoising problem.

    ``alpha=None`` selects ``alpha_factor * lam * ||B||^2`` (1.5 by default),
    which keeps the model strictly convex. ``partition=None`` uses the
    operator's natural blocks (pixel pairs for the 2-D gradient, singletons
    otherwise).
    """

    z: np.ndarray
    lam: float
    operator: LinearOperator
    alpha: Optional[float] = None
    partition: Optional[Partition] = None
    box: Optional[Tuple[float, float]] = None
    alpha_factor: float = 1.5

    def __post_init__(self):
        z = np.array(self.z, dtype=float).ravel()
        z.setflags(write=False)
        object.__setattr__(self, "z", z)
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if z.size != self.operator.domain_dim:
            raise ValueError(
                f"data has length {z.size}, operator expects {self.operator.domain_dim}"
            )
        if self.partition is None:
            object.__setattr__(self, "partition", self.operator.default_partition())
        if self.partition.d != self.operator.range_dim:
            raise ValueError("partition does not match the operator range")
        if self.box is not None:
            lo, hi = self.box
            if lo > hi:
                raise ValueError("empty box")
            object.__setattr__(self, "box", (float(lo), float(hi)))
        if self.alpha is None:
            object.__setattr__(self, "alpha", self.alpha_factor * self.lam * self.norm_sq)
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    @classmethod
    def for_image(cls, z, lam: float, n_side: Optional[int] = None, **kw) -> "ProblemSpec":
        """TV denoising of a square image (column-major vector or 2-D array).

        The box defaults to ``[0, 255]``.
        """
        if hasattr(z, "vectorize"):
            z = z.vectorize()
        z = np.asarray(z, dtype=float)
        if z.ndim == 2:
            n_side = z.shape[0]
            z = z.ravel(order="F")
        if n_side is None:
            n_side = int(round(np.sqrt(z.size)))
        kw.setdefault("box", (0.0, 255.0))
        return cls(z=z, lam=lam, operator=GradOperator2D(n_side), **kw)

    @classmethod
    def for_signal(cls, z, lam: float, **kw) -> "ProblemSpec":
        """1-D piecewise-constant denoising with the difference operator."""
        z = np.asarray(z, dtype=float).ravel()
        return cls(z=z, lam=lam, operator=DiffOp1D(z.size), **kw)

    @cached_property
    def norm_sq(self) -> float:
        """``||B||^2`` (power iteration, inflated by a 1e-6 relative margin)."""
        return safe_norm_sq(self.operator)

    @property
    def d(self) -> int:
        return self.z.size

    def project(self, x) -> np.ndarray:
        if self.box is None:
            return np.asarray(x, dtype=float)
        return np.clip(x, self.box[0], self.box[1])

    def with_data(self, z) -> "ProblemSpec":
        return replace(self, z=z)


@dataclass(frozen=True)
class SolverParams:
    """Step sizes, relaxation and stopping rule of an iterative scheme."""

    sigma: float
    tau: float
    rho: float = 1.0
    max_iter: int = 300
    tol: float = 1e-4
    dca_outer_max: int = 10
    dca_inner_max: int = 100


@dataclass
class SolveReport:
    """Outcome of a solve.

    For DCA, ``iterations`` counts outer steps and the histories have one
    entry per outer step (``objective_history[0]`` is the starting value).
    """

    x_final: np.ndarray
    iterations: int
    converged: bool
    objective_history: list
    rel_change_history: list
    wall_seconds: float
    algorithm: str = ""
    extras: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# objective pieces
# ---------------------------------------------------------------------------


def _check_x(spec: ProblemSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.d,):
        raise ValueError(f"expected a vector of length {spec.d}, got shape {x.shape}")
    return x


def objective(spec: ProblemSpec, x) -> float:
    """``1/(2 lam) ||x - z||^2 + phi_alpha(B x)``; box membership is not checked."""
    x = _check_x(spec, x)
    r = x - spec.z
    return 0.5 / spec.lam * float(r @ r) + eval_compositional(
        spec.operator.apply(x), spec.partition, spec.alpha
    )


def rof_objective(spec: ProblemSpec, x) -> float:
    """Convex ROF objective ``1/(2 lam) ||x - z||^2 + phi(B x)``."""
    x = _check_x(spec, x)
    r = x - spec.z
    return 0.5 / spec.lam * float(r @ r) + eval_compositional(spec.operator.apply(x), spec.partition)


def smooth_part(spec: ProblemSpec, x) -> float:
    """``F(x) = 1/(2 lam) ||x - z||^2 - env_alpha(phi)(B x)``."""
    x = _check_x(spec, x)
    r = x - spec.z
    return 0.5 / spec.lam * float(r @ r) - env_compositional(
        spec.operator.apply(x), spec.partition, spec.alpha
    )


def grad_F(spec: ProblemSpec, x) -> np.ndarray:
    """``(x - z)/lam - B^T proj(B x / alpha)``, the gradient of :func:`smooth_part`."""
    x = _check_x(spec, x)
    op = spec.operator
    g = env_gradient(op.apply(x), spec.partition, spec.alpha)
    return (x - spec.z) / spec.lam - op.apply_adjoint(g)


def convexity_regime(spec: Optional[ProblemSpec] = None, *, lam=None, alpha=None, norm_sq=None) -> str:
    """Classify the model by ``lam ||B||^2`` against ``alpha``.

    Below: strictly convex; equal (relative 1e-12): convex; above: the
    objective may be nonconvex.
    """
    if spec is not None:
        lam = spec.lam if lam is None else lam
        alpha = spec.alpha if alpha is None else alpha
        norm_sq = spec.norm_sq if norm_sq is None else norm_sq
    lhs = lam * norm_sq
    if abs(lhs - alpha) <= 1e-12 * max(abs(alpha), abs(lhs)):
        return CONVEX
    return STRICTLY_CONVEX if lhs < alpha else NONCONVEX


def default_params(spec: ProblemSpec, algo: str) -> SolverParams:
    """Standard step sizes and stopping rules for ``algo``.

    ROF, PD, DCA: ``sigma = 0.1``, ``tau = 0.99 / (0.5 + sigma ||B||^2)``.
    PDHG: ``sigma = 2 / alpha``, ``tau = 0.99 / (sigma ||B||^2)``.
    All: ``rho = 1``, 300 iterations, ``tol = 1e-4``; DCA caps its outer
    loop at 10 and each inner solve at 100.
    """
    nb = spec.norm_sq
    if algo in ("rof", "pd", "dca"):
        sigma = 0.1
        return SolverParams(sigma=sigma, tau=0.99 / (0.5 + sigma * nb))
    if algo == "pdhg":
        sigma = 2.0 / spec.alpha
        return SolverParams(sigma=sigma, tau=0.99 / (sigma * nb))
    raise ValueError(f"unknown algorithm {algo!r}; expected one of {ALGORITHMS}")


# ---------------------------------------------------------------------------
# iteration helpers
# ---------------------------------------------------------------------------


def _rel_change(new: np.ndarray, old: np.ndarray) -> float:
    diff = float(np.linalg.norm(new - old))
    den = float(np.linalg.norm(old))
    return diff / den if den >= 1e-12 else diff


def _check_finite(x: np.ndarray, where: str):
    if not np.all(np.isfinite(x)):
        raise DivergenceError(f"divergence detected ({where})")


def _check_pd_params(spec: ProblemSpec, params: SolverParams):
    if not (params.sigma > 0 and params.tau > 0):
        raise RegimeError("sigma and tau must be positive")
    if not 0 < params.rho <= 1:
        raise RegimeError("rho must lie in (0, 1]")
    if not 1.0 / params.tau - params.sigma * spec.norm_sq > 0.5:
        raise RegimeError("step sizes violate 1/tau - sigma ||B||^2 > 1/2")
    if params.max_iter < 0 or not params.tol > 0:
        raise RegimeError("max_iter must be >= 0 and tol > 0")


def _condat(
    spec: ProblemSpec,
    z: np.ndarray,
    params: SolverParams,
    x0: np.ndarray,
    y0: np.ndarray,
    *,
    envelope: bool,
    max_iter: int,
    record: Optional[Callable[[np.ndarray, np.ndarray], float]],
    callback=None,
):
    """Primal-dual splitting on the lam-scaled objective.

    ``x <- proj_C(x - tau (x - z) + tau B^T (lam g(Bx) - y))`` where
    ``g = grad env_alpha(phi)`` if ``envelope`` else 0, then
    ``y <- proj_{lam-balls}(y + sigma B (2 x_new - x))``, then relaxation.
    """
    op, part, lam = spec.operator, spec.partition, spec.lam
    sigma, tau, rho = params.sigma, params.tau, params.rho
    x = np.array(x0, dtype=float)
    y = np.array(y0, dtype=float)
    # From y = 0 the first primal step can be trivially stationary (data
    # already in C, no envelope term); such cold starts test from k = 2.
    cold = not np.any(y)
    bx = op.apply(x)
    objs, rels = [], []
    converged = False
    k = 0
    for k in range(1, max_iter + 1):
        dual_dir = -y
        if envelope:
            dual_dir = lam * prox_compositional_conjugate(bx / spec.alpha, part) - y
        xt = spec.project(x - tau * (x - z) + tau * op.apply_adjoint(dual_dir))
        bxt = op.apply(xt)
        yt = prox_compositional_conjugate(y + sigma * (2.0 * bxt - bx), part, radius=lam)
        if rho == 1.0:
            x_new, y_new, bx_new = xt, yt, bxt
        else:
            x_new = rho * xt + (1.0 - rho) * x
            y_new = rho * yt + (1.0 - rho) * y
            bx_new = rho * bxt + (1.0 - rho) * bx
        _check_finite(x_new, f"iteration {k}")
        rel = _rel_change(x_new, x)
        x, y, bx = x_new, y_new, bx_new
        rels.append(rel)
        if record is not None:
            objs.append(record(x, bx))
        if callback is not None:
            callback(k, {"x": x, "y": y, "Bx": bx})
        if rel <= params.tol and (k >= 2 or not cold):
            converged = True
            break
    return x, y, k, converged, objs, rels


def _model_objective(spec: ProblemSpec, z: np.ndarray, alpha: Optional[float]):
    inv = 0.5 / spec.lam

    def record(x, bx):
        r = x - z
        return inv * float(r @ r) + eval_compositional(bx, spec.partition, alpha)

    return record


# ---------------------------------------------------------------------------
# solvers
# ---------------------------------------------------------------------------


def solve_rof(spec: ProblemSpec, params: Optional[SolverParams] = None, *, x0=None, y0=None, callback=None) -> SolveReport:
    """ROF-TV baseline: minimize ``1/(2 lam)||x - z||^2 + phi(B x)`` over ``C``.

    ``objective_history`` holds the ROF objective of every iterate.
    """
    params = params or default_params(spec, "rof")
    _check_pd_params(spec, params)
    t0 = time.perf_counter()
    x0 = spec.z if x0 is None else x0
    y0 = np.zeros(spec.operator.range_dim) if y0 is None else y0
    x, y, k, conv, objs, rels = _condat(
        spec, spec.z, params, x0, y0, envelope=False, max_iter=params.max_iter,
        record=_model_objective(spec, spec.z, None), callback=callback,
    )
    return SolveReport(
        x_final=spec.project(x), iterations=k, converged=conv,
        objective_history=objs, rel_change_history=rels,
        wall_seconds=time.perf_counter() - t0, algorithm="rof", extras={"y": y},
    )


def solve_pd(spec: ProblemSpec, params: Optional[SolverParams] = None, *, callback=None) -> SolveReport:
    """Primal-dual splitting for the structured model.

    Requires ``lam ||B||^2 < alpha``: ``F`` is then convex with a
    1-Lipschitz (scaled) gradient and the iterates converge to the unique
    minimizer.
    """
    params = params or default_params(spec, "pd")
    regime = convexity_regime(spec)
    if regime != STRICTLY_CONVEX:
        raise RegimeError(
            f"PD needs lam ||B||^2 < alpha (got lam={spec.lam}, alpha={spec.alpha}, "
            f"||B||^2={spec.norm_sq:.6g}: {regime})"
        )
    _check_pd_params(spec, params)
    t0 = time.perf_counter()
    x, y, k, conv, objs, rels = _condat(
        spec, spec.z, params, spec.z, np.zeros(spec.operator.range_dim),
        envelope=True, max_iter=params.max_iter,
        record=_model_objective(spec, spec.z, spec.alpha), callback=callback,
    )
    return SolveReport(
        x_final=spec.project(x), iterations=k, converged=conv,
        objective_history=objs, rel_change_history=rels,
        wall_seconds=time.perf_counter() - t0, algorithm="pd", extras={"y": y},
    )


_DCA_EXTRA_ROUNDS = 5


def solve_dca(spec: ProblemSpec, params: Optional[SolverParams] = None, *, callback=None) -> SolveReport:
    """DC algorithm: linearize ``env_alpha(phi)(B .)`` and solve the convex rest.

    Outer step ``k`` sets ``g = B^T grad env_alpha(phi)(B x_k)`` and solves
    the ROF problem with data ``z + lam g`` by the splitting of
    :func:`solve_rof`, warm started from ``x_k`` and the previous dual
    variable, for at most ``dca_inner_max`` iterations.
    """
    params = params or default_params(spec, "dca")
    if params.dca_outer_max < 1 or params.dca_inner_max < 1:
        raise RegimeError("dca_outer_max and dca_inner_max must be >= 1")
    _check_pd_params(spec, params)
    t0 = time.perf_counter()
    op, part = spec.operator, spec.partition
    x = spec.project(spec.z)
    y = np.zeros(op.range_dim)
    objs = [objective(spec, x)]
    rels, inner_counts = [], []
    converged = stalled = False
    k = 0
    for k in range(1, params.dca_outer_max + 1):
        g = op.apply_adjoint(env_gradient(op.apply(x), part, spec.alpha))
        shifted = spec.z + spec.lam * g
        if callback is not None:
            callback(k - 1, {"x": x, "shifted_data": shifted})
        # An exact inner minimizer cannot increase the objective; an inexact one
        # is refined a few more rounds, and rejected if it still does.
        x_new, y_new, n_inner = x, y, 0
        obj_new = np.inf
        for _ in range(1 + _DCA_EXTRA_ROUNDS):
            try:
                x_new, y_new, n, _, _, _ = _condat(
                    spec, shifted, params, x_new, y_new, envelope=False,
                    max_iter=params.dca_inner_max, record=None,
                )
            except DivergenceError as exc:
                raise DivergenceError(
                    f"inner solver diverged at outer iteration {k}: {exc}"
                ) from exc
            n_inner += n
            obj_new = objective(spec, x_new)
            if obj_new <= objs[-1]:
                break
        inner_counts.append(n_inner)
        if obj_new > objs[-1]:
            stalled = True
            break
        rel = _rel_change(x_new, x)
        x, y = x_new, y_new
        objs.append(obj_new)
        rels.append(rel)
        if rel <= params.tol:
            converged = True
            break
    return SolveReport(
        x_final=spec.project(x), iterations=k, converged=converged,
        objective_history=objs, rel_change_history=rels,
        wall_seconds=time.perf_counter() - t0, algorithm="dca",
        extras={"y": y, "inner_iterations": inner_counts, "stalled": stalled},
    )


def _check_pdhg_params(spec: ProblemSpec, params: SolverParams):
    if spec.alpha < spec.lam * spec.norm_sq * (1.0 - 1e-12):
        raise RegimeError("PDHG needs alpha >= lam ||B||^2")
    if not (params.sigma > 0 and params.tau > 0):
        raise RegimeError("sigma and tau must be positive")
    if abs(params.sigma * spec.alpha - 2.0) > 1e-9:
        raise RegimeError("PDHG needs sigma * alpha = 2")
    if params.tau * params.sigma * spec.norm_sq > 1.0:
        raise RegimeError("PDHG needs tau sigma ||B||^2 <= 1")
    if not 0 <= params.rho <= 1:
        raise RegimeError("rho must lie in [0, 1]")
    if params.max_iter < 0 or not params.tol > 0:
        raise RegimeError("max_iter must be >= 0 and tol > 0")


def solve_pdhg(spec: ProblemSpec, params: Optional[SolverParams] = None, *, callback=None) -> SolveReport:
    """Primal-dual hybrid gradient with the explicit prox of ``phi_alpha``.

    Iterates ``u = prox_{phi_alpha / sigma}(B xbar + theta / sigma)``,
    ``theta += sigma (B xbar - u)``,
    ``x = proj_C((lam x + tau z - tau lam B^T theta) / (tau + lam))`` and
    ``xbar = x + rho (x - x_prev)``. With ``sigma alpha = 2`` the prox
    index ``alpha / 2`` is below ``alpha``, so the prox is single valued.
    """
    params = params or default_params(spec, "pdhg")
    _check_pdhg_params(spec, params)
    t0 = time.perf_counter()
    op, part, lam, alpha = spec.operator, spec.partition, spec.lam, spec.alpha
    sigma, tau, rho = params.sigma, params.tau, params.rho
    beta = 1.0 / sigma
    c_x, c_z, c_t = lam / (tau + lam), tau / (tau + lam), tau * lam / (tau + lam)
    x = np.array(spec.z, dtype=float)
    xbar = x.copy()
    theta = np.zeros(op.range_dim)
    record = _model_objective(spec, spec.z, alpha)
    objs, rels = [], []
    converged = False
    k = 0
    for k in range(1, params.max_iter + 1):
        bxbar = op.apply(xbar)
        v = bxbar + theta / sigma
        u = prox_compositional_mcp(v, part, alpha, beta)
        theta = theta + sigma * (bxbar - u)
        x_new = spec.project(c_x * x + c_z * spec.z - c_t * op.apply_adjoint(theta))
        _check_finite(x_new, f"iteration {k}")
        rel = _rel_change(x_new, x)
        xbar = x_new + rho * (x_new - x)
        x = x_new
        rels.append(rel)
        objs.append(record(x, op.apply(x)))
        if callback is not None:
            callback(k, {"x": x, "theta": theta, "u": u, "prox_input": v})
        if rel <= params.tol:
            converged = True
            break
    return SolveReport(
        x_final=spec.project(x), iterations=k, converged=converged,
        objective_history=objs, rel_change_history=rels,
        wall_seconds=time.perf_counter() - t0, algorithm="pdhg",
        extras={"theta": theta},
    )


_SOLVERS = {"rof": solve_rof, "pd": solve_pd, "dca": solve_dca, "pdhg": solve_pdhg}


def solve(spec: ProblemSpec, algo: str, params: Optional[SolverParams] = None, **kw) -> SolveReport:
    """Dispatch to ``solve_<algo>`` with :func:`default_params` unless given."""
    try:
        fn = _SOLVERS[algo]
    except KeyError:
        raise ValueError(f"unknown algorithm {algo!r}; expected one of {ALGORITHMS}") from None
    return fn(spec, params, **kw)
