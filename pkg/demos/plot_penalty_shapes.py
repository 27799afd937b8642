"""
The MCP, its envelope and its three prox regimes
================================================

The structured penalty ``phi_alpha = phi - env_alpha(phi)`` of the absolute
value is the minimax concave penalty. It grows like ``|x|`` near the origin
and flattens to ``alpha / 2`` once ``|x| >= alpha``, so large values are not
shrunk. This script tabulates the penalty and its proximity operator for
each ordering of ``beta`` against ``alpha``.

Run::

    python demos/plot_penalty_shapes.py

A figure is saved to ``penalty_shapes.png`` if matplotlib is installed.
"""

import numpy as np

from spfreg.penalty import env_abs, eval_mcp, prox_abs, prox_mcp, prox_mcp_select

alpha = 2.0
x = np.linspace(-4, 4, 9)

# %%
# Penalty values
# --------------
# ``|x| = env(x) + mcp(x)``. The envelope is the Huber function.
print("    x     |x|   huber    mcp")
for xi in x:
    print(f"{xi:5.1f}  {abs(xi):5.2f}  {env_abs(xi, alpha):6.3f}  {eval_mcp(xi, alpha):5.3f}")

# %%
# Proximity operators
# -------------------
# With ``beta < alpha`` the prox is a firm threshold: zero below ``beta``,
# linear in between, the identity beyond ``alpha``. At ``beta == alpha``
# it jumps at ``alpha``, and above that it is a hard threshold at
# ``sqrt(alpha * beta)``. Soft thresholding is shown for contrast; it
# subtracts ``beta`` from every large entry.
print("\n    x    soft(b=1)  firm(b=1)  b=a   hard(b=4.5)")
for xi in x:
    print(f"{xi:5.1f}  {prox_abs(xi, 1.0):8.3f}  {prox_mcp_select(xi, alpha, 1.0):8.3f}"
          f"  {prox_mcp_select(xi, alpha, alpha):6.2f}  {prox_mcp_select(xi, alpha, 4.5):8.3f}")

# %%
# Set-valued points
# -----------------
# Where the prox objective has several minimizers the full set is returned.
for args in [(2.0, alpha, alpha), (3.0, alpha, 4.5)]:
    r = prox_mcp(*args)
    print(f"prox_mcp{args} -> {r.kind} {r.points}")

# %%
# Figure
# ------
try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    t = np.linspace(-4, 4, 801)
    fig, ax = plt.subplots(1, 2, figsize=(9, 3.5))
    ax[0].plot(t, np.abs(t), label="|x|")
    ax[0].plot(t, env_abs(t, alpha), label="huber")
    ax[0].plot(t, eval_mcp(t, alpha), label="mcp")
    ax[0].legend()
    ax[1].plot(t, prox_abs(t, 1.0), label="soft, b=1")
    ax[1].plot(t, prox_mcp_select(t, alpha, 1.0), label="mcp, b=1")
    ax[1].plot(t, prox_mcp_select(t, alpha, 4.5), label="mcp, b=4.5")
    ax[1].legend()
    fig.tight_layout()
    fig.savefig("penalty_shapes.png", dpi=120)
    print("saved penalty_shapes.png")
