"""Numpy implementations of the inner-loop kernels.

These are the fallback used when the compiled extension is unavailable.
Both backends implement the same arithmetic; results agree to rounding
noise and every test tolerance in the suite covers either one.
"""

import numpy as np

NAME = "python"

# Status codes shared with the compiled kernel.
EM_CONVERGED = 0
EM_MAX_ITERS = 1
EM_DIVERGED = 2

# A run is flagged divergent when the iterate norm grows by more than this
# factor over three consecutive iterations (tracked as squared norms).
_DIVERGE_FACTOR_SQ = 100.0


def rank1_update(A, B, z, y, gamma):
    """In-place exponential-forgetting update of the weighted moments.

    A <- (1-gamma)*A + gamma*z z^T,  B <- (1-gamma)*B + gamma*y*z.
    """
    keep = 1.0 - gamma
    A *= keep
    A += gamma * np.outer(z, z)
    B *= keep
    B += (gamma * y) * z


def group_shrink(r, threshold, v, out=None):
    """Block soft-thresholding: scale each length-v block of r[1:] by
    max(0, 1 - threshold/||block||); the leading intercept passes through."""
    if out is None:
        out = np.empty_like(r)
    out[0] = r[0]
    body = r[1:].reshape(-1, v)
    norms = np.sqrt(np.einsum("ij,ij->i", body, body))
    factors = np.zeros(norms.shape[0])
    mask = norms > threshold
    factors[mask] = 1.0 - threshold / norms[mask]
    out[1:] = (body * factors[:, None]).ravel()
    return out


def em_run(A, B, beta, tau2, lam_tau2, v, max_iters, rel_tol):
    """Run the shrinkage fixed-point iteration in place on beta.

    Each pass takes a gradient step of length tau2 on the quadratic part
    followed by block soft-thresholding at lam_tau2.  Returns
    (iterations_used, status).
    """
    norm_hist = []
    scratch = np.empty_like(beta)
    iters = 0
    status = EM_MAX_ITERS
    for _ in range(max_iters):
        iters += 1
        r = beta - tau2 * (A @ beta - B)
        group_shrink(r, lam_tau2, v, out=scratch)
        diff = scratch - beta
        change_sq = float(diff @ diff)
        norm_sq = float(scratch @ scratch)
        beta[:] = scratch
        if not np.isfinite(norm_sq):
            status = EM_DIVERGED
            break
        norm_hist.append(norm_sq)
        if len(norm_hist) >= 4 and norm_hist[-4] > 0.0 and (
            norm_sq > _DIVERGE_FACTOR_SQ * norm_hist[-4]
        ):
            status = EM_DIVERGED
            break
        if np.sqrt(change_sq) <= rel_tol * max(np.sqrt(norm_sq), 1e-300):
            status = EM_CONVERGED
            break
    return iters, status


def gram_update(A, z, gamma):
    """In-place A <- (1-gamma)*A + gamma*z z^T (the B-less moment update,
    for statistics shared by several targets)."""
    A *= 1.0 - gamma
    A += gamma * np.outer(z, z)


def multi_shrink_step(R, Bs, Betas, tau2s, lam_tau2s, v, skip, change_sq,
                      norm_sq):
    """One batched shrinkage pass over k coefficient replicas.

    R holds Betas @ A on entry (A symmetric).  For every replica row c
    with skip[c] == 0 the update is r = beta - tau2*(R_c - B_c) followed
    by block soft-thresholding at lam_tau2[c]; Betas, change_sq and
    norm_sq are written in place, skipped rows stay untouched.
    """
    act = skip == 0
    if not act.any():
        return
    Ra = Betas[act] - tau2s[act, None] * (R[act] - Bs[act])
    k_a = Ra.shape[0]
    body = Ra[:, 1:].reshape(k_a, -1, v)
    norms = np.sqrt(np.einsum("kgv,kgv->kg", body, body))
    lam = lam_tau2s[act]
    with np.errstate(divide="ignore", invalid="ignore"):
        factors = np.where(norms > lam[:, None], 1.0 - lam[:, None] / norms, 0.0)
    new = np.empty_like(Ra)
    new[:, 0] = Ra[:, 0]
    new[:, 1:] = (body * factors[:, :, None]).reshape(k_a, -1)
    diff = new - Betas[act]
    change_sq[act] = np.einsum("kn,kn->k", diff, diff)
    norm_sq[act] = np.einsum("kn,kn->k", new, new)
    Betas[act] = new


def basis_eval_into(knots, degree, x, out):
    """Evaluate all clamped B-spline basis functions at scalar x into out.

    knots is the full clamped vector (len(out) + degree + 1 entries); x is
    clamped to the basis domain.  Standard triangular de Boor recursion.
    """
    nb = out.shape[0]
    out[:] = 0.0
    lo = knots[degree]
    hi = knots[nb]
    if x <= lo:
        x = lo
    if x >= hi:
        x = hi
        span = nb - 1
    else:
        # binary search: largest span in [degree, nb-1] with knots[span] <= x
        a, b = degree, nb - 1
        while a < b:
            mid = (a + b + 1) // 2
            if knots[mid] <= x:
                a = mid
            else:
                b = mid - 1
        span = a
    vals = np.zeros(degree + 1)
    left = np.zeros(degree + 1)
    right = np.zeros(degree + 1)
    vals[0] = 1.0
    for j in range(1, degree + 1):
        left[j] = x - knots[span + 1 - j]
        right[j] = knots[span + j] - x
        saved = 0.0
        for r in range(j):
            temp = vals[r] / (right[r + 1] + left[j - r])
            vals[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        vals[j] = saved
    out[span - degree : span + 1] = vals
    return out
