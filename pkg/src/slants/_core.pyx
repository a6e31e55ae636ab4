# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner-loop kernels: forgetting-factor moment updates, the fused
block-shrinkage fixed-point iteration, and local B-spline evaluation.

Mirrors the numpy fallback in _kernels_py; keep the two in sync.
"""

from libc.math cimport isfinite, sqrt

import numpy as _np

NAME = "compiled"

EM_CONVERGED = 0
EM_MAX_ITERS = 1
EM_DIVERGED = 2

cdef double _DIVERGE_FACTOR_SQ = 100.0
cdef int _MAX_DEGREE = 15


def rank1_update(double[:, ::1] A, double[::1] B, double[::1] z, double y, double gamma):
    """A <- (1-g)A + g z z^T,  B <- (1-g)B + g y z, done in place."""
    cdef Py_ssize_t n = A.shape[0]
    cdef Py_ssize_t i, j
    cdef double keep = 1.0 - gamma
    cdef double gzi
    for i in range(n):
        gzi = gamma * z[i]
        B[i] = keep * B[i] + gzi * y
        for j in range(i, n):
            A[i, j] = keep * A[i, j] + gzi * z[j]
    for i in range(n):
        for j in range(i + 1, n):
            A[j, i] = A[i, j]


def group_shrink(double[::1] r, double threshold, Py_ssize_t v, double[::1] out):
    """Block soft-thresholding of r into out; intercept passes through."""
    cdef Py_ssize_t n = r.shape[0]
    cdef Py_ssize_t ngroups = (n - 1) // v
    cdef Py_ssize_t g, k, base
    cdef double norm_sq, norm, factor
    out[0] = r[0]
    for g in range(ngroups):
        base = 1 + g * v
        norm_sq = 0.0
        for k in range(v):
            norm_sq += r[base + k] * r[base + k]
        norm = sqrt(norm_sq)
        if norm > threshold:
            factor = 1.0 - threshold / norm
        else:
            factor = 0.0
        for k in range(v):
            out[base + k] = factor * r[base + k]


def em_run(double[:, ::1] A, double[::1] B, double[::1] beta,
           double tau2, double lam_tau2, Py_ssize_t v,
           Py_ssize_t max_iters, double rel_tol):
    """Shrinkage fixed-point iteration in place on beta.

    Returns (iterations_used, status); see the numpy twin for semantics.
    """
    cdef Py_ssize_t n = A.shape[0]
    cdef Py_ssize_t ngroups = (n - 1) // v
    cdef Py_ssize_t it, i, j, g, k, base
    cdef double acc, r_i, norm_sq, norm, factor, newval
    cdef double change_sq, beta_norm_sq
    cdef double hist0 = -1.0, hist1 = -1.0, hist2 = -1.0
    cdef int status = EM_MAX_ITERS
    cdef Py_ssize_t iters = 0
    cdef double[::1] scratch
    scratch_arr = _np.empty(n)
    scratch = scratch_arr

    for it in range(max_iters):
        iters += 1
        # scratch <- beta - tau2*(A beta - B)
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += A[i, j] * beta[j]
            scratch[i] = beta[i] - tau2 * (acc - B[i])
        # block shrinkage back into beta, accumulating the change
        change_sq = 0.0
        beta_norm_sq = 0.0
        newval = scratch[0]
        change_sq += (newval - beta[0]) * (newval - beta[0])
        beta_norm_sq += newval * newval
        beta[0] = newval
        for g in range(ngroups):
            base = 1 + g * v
            norm_sq = 0.0
            for k in range(v):
                norm_sq += scratch[base + k] * scratch[base + k]
            norm = sqrt(norm_sq)
            if norm > lam_tau2:
                factor = 1.0 - lam_tau2 / norm
            else:
                factor = 0.0
            for k in range(v):
                newval = factor * scratch[base + k]
                change_sq += (newval - beta[base + k]) * (newval - beta[base + k])
                beta_norm_sq += newval * newval
                beta[base + k] = newval
        if not isfinite(beta_norm_sq):
            status = EM_DIVERGED
            break
        if hist0 >= 0.0 and hist0 > 0.0 and beta_norm_sq > _DIVERGE_FACTOR_SQ * hist0:
            status = EM_DIVERGED
            break
        hist0 = hist1
        hist1 = hist2
        hist2 = beta_norm_sq
        if sqrt(change_sq) <= rel_tol * max(sqrt(beta_norm_sq), 1e-300):
            status = EM_CONVERGED
            break
    return iters, status


def gram_update(double[:, ::1] A, double[::1] z, double gamma):
    """In-place A <- (1-g)A + g z z^T (shared-statistics variant)."""
    cdef Py_ssize_t n = A.shape[0]
    cdef Py_ssize_t i, j
    cdef double keep = 1.0 - gamma
    cdef double gzi
    for i in range(n):
        gzi = gamma * z[i]
        for j in range(i, n):
            A[i, j] = keep * A[i, j] + gzi * z[j]
    for i in range(n):
        for j in range(i + 1, n):
            A[j, i] = A[i, j]


def multi_shrink_step(double[:, ::1] R, double[:, ::1] Bs, double[:, ::1] Betas,
                      double[::1] tau2s, double[::1] lam_tau2s, Py_ssize_t v,
                      unsigned char[::1] skip, double[::1] change_sq,
                      double[::1] norm_sq):
    """One batched shrinkage pass; R holds Betas @ A on entry.

    Rows with skip[c] != 0 are left untouched; everything else matches the
    per-vector em_run update (see the numpy twin for full semantics).
    """
    cdef Py_ssize_t k = Betas.shape[0]
    cdef Py_ssize_t n = Betas.shape[1]
    cdef Py_ssize_t ngroups = (n - 1) // v
    cdef Py_ssize_t c, i, g, kk, base
    cdef double tau2, lam, r_i, nsq, norm, factor, newval
    cdef double ch, bn
    for c in range(k):
        if skip[c]:
            continue
        tau2 = tau2s[c]
        lam = lam_tau2s[c]
        for i in range(n):
            R[c, i] = Betas[c, i] - tau2 * (R[c, i] - Bs[c, i])
        ch = 0.0
        bn = 0.0
        newval = R[c, 0]
        ch += (newval - Betas[c, 0]) * (newval - Betas[c, 0])
        bn += newval * newval
        Betas[c, 0] = newval
        for g in range(ngroups):
            base = 1 + g * v
            nsq = 0.0
            for kk in range(v):
                nsq += R[c, base + kk] * R[c, base + kk]
            norm = sqrt(nsq)
            if norm > lam:
                factor = 1.0 - lam / norm
            else:
                factor = 0.0
            for kk in range(v):
                newval = factor * R[c, base + kk]
                ch += (newval - Betas[c, base + kk]) * (newval - Betas[c, base + kk])
                bn += newval * newval
                Betas[c, base + kk] = newval
        change_sq[c] = ch
        norm_sq[c] = bn


def basis_eval_into(double[::1] knots, Py_ssize_t degree, double x, double[::1] out):
    """All clamped B-spline basis values at scalar x, written into out."""
    cdef Py_ssize_t nb = out.shape[0]
    cdef Py_ssize_t i, span, a, b, mid, j, r
    cdef double lo, hi, saved, temp
    cdef double vals[16]
    cdef double left[16]
    cdef double right[16]
    if degree >= _MAX_DEGREE:
        raise ValueError("degree too large for compiled kernel")
    for i in range(nb):
        out[i] = 0.0
    lo = knots[degree]
    hi = knots[nb]
    if x <= lo:
        x = lo
    if x >= hi:
        x = hi
        span = nb - 1
    else:
        a = degree
        b = nb - 1
        while a < b:
            mid = (a + b + 1) // 2
            if knots[mid] <= x:
                a = mid
            else:
                b = mid - 1
        span = a
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
    for r in range(degree + 1):
        out[span - degree + r] = vals[r]
    return out
