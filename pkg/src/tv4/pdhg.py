"""Over-relaxed primal-dual iteration shared by the solvers and TV evaluators.

Solves ``min_x g(x) + h(K x)`` through the saddle problem
``min_x max_u g(x) + <K x, u> - h*(u)``. One iteration::

    x~ = prox_{tau g}(x - tau K* u)
    u~ = prox_{sigma h*}(u + sigma K (2 x~ - x))
    (x, u) <- rho (x~, u~) + (1 - rho) (x, u)

This is the relaxed Chambolle-Pock scheme (Condat's form without a smooth
term); it converges for ``tau * sigma * ||K||^2 <= 1`` and ``0 < rho < 2``.
The primal-first ordering is fixed and covered by regression tests.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

__all__ = ["SolverDivergence", "primal_dual"]

Prox = Callable[[np.ndarray, float], np.ndarray]


class SolverDivergence(RuntimeError):
    """Raised when an iterate becomes NaN or Inf."""


def primal_dual(
    prox_g: Prox,
    prox_hconj: Prox,
    K: Callable[[np.ndarray], np.ndarray],
    K_adj: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    u0: np.ndarray,
    tau: float,
    sigma: float,
    rho: float = 1.0,
    iters: int = 1000,
    callback: Callable[[int, np.ndarray, np.ndarray, float], bool | None] | None = None,
):
    """Run the iteration; returns ``(x, u, iterations_done)``.

    ``callback(k, x, u, step)`` runs after iteration ``k`` (1-based) with the
    relative primal change ``step``; returning True stops early.
    """
    x = np.array(x0, dtype=np.float64)
    u = np.array(u0, dtype=np.float64)
    k = 0
    for k in range(1, iters + 1):
        x_t = prox_g(x - tau * K_adj(u), tau)
        u_t = prox_hconj(u + sigma * K(2.0 * x_t - x), sigma)
        if rho == 1.0:
            x_new, u = x_t, u_t
        else:
            # overflow here is caught by the finiteness check below
            with np.errstate(over="ignore", invalid="ignore"):
                x_new = rho * x_t + (1.0 - rho) * x
                u = rho * u_t + (1.0 - rho) * u
        if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(u))):
            raise SolverDivergence(
                f"non-finite iterate at iteration {k} (tau={tau:g}, sigma={sigma:g}, rho={rho:g})"
            )
        with np.errstate(over="ignore", invalid="ignore"):
            step = float(np.linalg.norm(x_new - x) / max(np.linalg.norm(x_new), 1e-300))
        x = x_new
        if callback is not None and callback(k, x, u, step):
            break
    return x, u, k
