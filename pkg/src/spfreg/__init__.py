"""Structured sparsity-promoting penalties and solvers for TV-type denoising.

``phi_alpha = phi - env_alpha(phi)`` turns a convex norm ``phi`` into a
semiconvex, sparsity-promoting penalty. For ``phi = |.|`` this is the minimax
concave penalty. The package provides its proximity operators, the 1-D and
2-D difference operators, and four denoising solvers (``rof``, ``pd``,
``dca``, ``pdhg``).
"""

from .imaging import (
    ImageGray,
    NoiseSpec,
    add_gaussian_noise,
    load_test_image,
    project_box,
    psnr,
    read_pgm,
    write_pgm,
)
from .linop import DiffOp1D, GradOperator2D, MatrixOperator, op_norm_sq
from .penalty import (
    CompositionalPenalty,
    Partition,
    ProxResult,
    ScalarMCP,
    env_abs,
    env_compositional,
    env_gradient,
    eval_compositional,
    eval_mcp,
    prox_abs,
    prox_compositional,
    prox_compositional_conjugate,
    prox_compositional_mcp,
    prox_mcp,
    prox_mcp_select,
)
from .solvers import (
    ALGORITHMS,
    DivergenceError,
    ProblemSpec,
    RegimeError,
    SolveReport,
    SolverParams,
    convexity_regime,
    default_params,
    objective,
    solve,
)

__version__ = "0.1.0"
