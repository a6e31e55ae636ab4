"""Batch group-LASSO solver used as an independent check on the streaming
path, plus the shared objective definitions.

The canonical objective over rows Z (first column all ones), targets Y
and per-row weights w is

    G(beta) = 0.5 * sum_t w_t (y_t - z_t beta)^2 + lam * sum_i ||beta_i||

with the intercept unpenalized.  The streaming EM with statistics built
from the same weights converges to the same minimizer; this solver never
touches those statistics, it works from (Z, Y) directly via proximal
gradient steps with backtracking line search.
"""

import numpy as np

from ._kernels_py import group_shrink


def group_lasso_objective(Z, Y, weights, lam, beta, v):
    """G(beta) as defined in the module docstring."""
    resid = Y - Z @ beta
    quad = 0.5 * float(weights @ (resid * resid))
    body = beta[1:].reshape(-1, v)
    pen = lam * float(np.sum(np.sqrt(np.einsum("ij,ij->i", body, body))))
    return quad + pen


def quadratic_objective(A, B, lam, beta, v):
    """Moment form 0.5 beta'A beta - B'beta + lam * sum ||beta_i||; equals
    G(beta) up to a beta-independent constant when A, B come from (Z, Y,
    weights)."""
    quad = 0.5 * float(beta @ (A @ beta)) - float(B @ beta)
    body = beta[1:].reshape(-1, v)
    pen = lam * float(np.sum(np.sqrt(np.einsum("ij,ij->i", body, body))))
    return quad + pen


def kkt_residual(Z, Y, weights, lam, beta, v):
    """Largest blockwise violation of the stationarity conditions.

    Active blocks must satisfy grad_i + lam beta_i/||beta_i|| = 0; inactive
    blocks need ||grad_i|| <= lam; the intercept needs zero gradient.
    """
    grad = -(Z.T @ (weights * (Y - Z @ beta)))
    worst = abs(float(grad[0]))
    n_groups = (beta.shape[0] - 1) // v
    for i in range(n_groups):
        sl = slice(1 + i * v, 1 + (i + 1) * v)
        g = grad[sl]
        b = beta[sl]
        norm_b = float(np.linalg.norm(b))
        if norm_b > 0:
            worst = max(worst, float(np.linalg.norm(g + lam * b / norm_b)))
        else:
            worst = max(worst, max(0.0, float(np.linalg.norm(g)) - lam))
    return worst


def batch_group_lasso(Z, Y, weights, lam, v, tol=1e-10, beta0=None,
                      max_iters=100000):
    """Minimize G(beta) by proximal gradient with backtracking.

    Stops when the blockwise KKT residual drops to 10*tol; raises
    RuntimeError (reporting the residual reached) if the iteration cap is
    hit first.  Returns (beta, info dict).
    """
    Z = np.asarray(Z, dtype=float)
    Y = np.asarray(Y, dtype=float).ravel()
    weights = np.asarray(weights, dtype=float).ravel()
    T, n = Z.shape
    if Y.shape[0] != T or weights.shape[0] != T:
        raise ValueError("Z, Y and weights disagree on the sample count")
    if (n - 1) % v:
        raise ValueError("row length minus intercept must be a multiple of v")
    beta = np.zeros(n) if beta0 is None else np.asarray(beta0, dtype=float).copy()

    wZ = weights[:, None] * Z

    def smooth(b):
        r = Y - Z @ b
        return 0.5 * float(weights @ (r * r))

    def grad(b):
        return -(wZ.T @ (Y - Z @ b))

    step = 1.0
    target = 10.0 * tol
    f = smooth(beta)
    iters = 0
    for iters in range(1, max_iters + 1):
        g = grad(beta)
        # backtracking on the quadratic upper bound of the smooth part
        while True:
            cand = group_shrink(beta - step * g, lam * step, v)
            diff = cand - beta
            f_cand = smooth(cand)
            bound = f + float(g @ diff) + float(diff @ diff) / (2.0 * step)
            if f_cand <= bound + 1e-15 * max(1.0, abs(bound)):
                break
            step *= 0.5
            if step < 1e-18:
                raise RuntimeError("line search collapsed")
        beta = cand
        f = f_cand
        if iters % 10 == 0 or float(np.linalg.norm(diff)) <= tol:
            if kkt_residual(Z, Y, weights, lam, beta, v) <= target:
                break
    else:
        resid = kkt_residual(Z, Y, weights, lam, beta, v)
        raise RuntimeError(
            f"batch solver did not certify optimality in {max_iters} "
            f"iterations (KKT residual {resid:.3e}, target {target:.3e})"
        )
    info = {
        "iterations": iters,
        "kkt_residual": kkt_residual(Z, Y, weights, lam, beta, v),
        "objective": group_lasso_objective(Z, Y, weights, lam, beta, v),
        "step": step,
    }
    return beta, info
