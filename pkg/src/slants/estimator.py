"""Recursive sufficient statistics and the block-shrinkage EM step.

The model for one target is y ~ N(z beta, .) with a group-LASSO prior on
beta; z is the centered spline design row.  Streaming weights enter
through the step sizes gamma_t: after T updates the statistics equal the
weighted moments A = sum_t w_{T,t} z_t z_t^T and B = sum_t w_{T,t} y_t z_t.

One EM pass is r = (I - tau^2 A) beta + tau^2 B followed by block soft
thresholding of r at lambda tau^2 (intercept unpenalized).  The map is a
contraction whenever every eigenvalue of I - tau^2 A has modulus < 1,
i.e. tau^2 * lambda_max(A) < 2.
"""

from dataclasses import dataclass

import numpy as np

from . import _backend

EM_STATUS = {0: "converged", 1: "max_iters", 2: "diverged"}


class SufficientStats:
    """Weighted second moments (A, B) with their update counter."""

    def __init__(self, n):
        self.A = np.zeros((n, n))
        self.B = np.zeros(n)
        self.t = 0

    @property
    def n(self):
        return self.B.shape[0]

    def update(self, row, y, gamma):
        """A <- (1-gamma)A + gamma z z^T, B <- (1-gamma)B + gamma y z."""
        if not 0.0 < gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {gamma}")
        row = np.ascontiguousarray(row, dtype=float)
        if row.shape != (self.n,):
            raise ValueError(f"row has shape {row.shape}, expected ({self.n},)")
        _backend.active.rank1_update(self.A, self.B, row, float(y), float(gamma))
        self.t += 1

    def copy(self):
        out = SufficientStats(self.n)
        out.A[:] = self.A
        out.B[:] = self.B
        out.t = self.t
        return out


@dataclass
class Coefficients:
    """Flat coefficient vector [intercept, group_1, ..., group_m] where
    every group holds the v spline coefficients of one lagged covariate."""

    vec: np.ndarray
    v: int

    @classmethod
    def zeros(cls, n_groups, v):
        return cls(vec=np.zeros(1 + n_groups * v), v=v)

    @property
    def intercept(self):
        return float(self.vec[0])

    @property
    def n_groups(self):
        return (self.vec.shape[0] - 1) // self.v

    def group(self, i):
        """Coefficient block of covariate i (0-based)."""
        base = 1 + i * self.v
        return self.vec[base : base + self.v]

    def group_norms(self):
        body = self.vec[1:].reshape(self.n_groups, self.v)
        return np.sqrt(np.einsum("ij,ij->i", body, body))

    def active_set(self, floor=0.0):
        """0-based indices of covariates whose block norm exceeds floor."""
        return [int(i) for i in np.nonzero(self.group_norms() > floor)[0]]

    def copy(self):
        return Coefficients(vec=self.vec.copy(), v=self.v)


@dataclass
class EmSettings:
    """Knobs of one EM call: innovation scale tau, penalty lam, iteration
    cap and relative-change stopping tolerance."""

    tau: float
    lam: float
    max_iters: int = 5
    rel_tol: float = 1e-7


def e_step(stats, coef, tau):
    """Posterior-mean surrogate r = (I - tau^2 A) beta + tau^2 B."""
    t2 = tau * tau
    return coef.vec - t2 * (stats.A @ coef.vec - stats.B)


def group_soft_threshold(r, threshold, v):
    """Blockwise shrinkage of r: each length-v block scales by
    max(0, 1 - threshold/||block||); the leading entry is untouched."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    r = np.ascontiguousarray(r, dtype=float)
    out = np.empty_like(r)
    _backend.active.group_shrink(r, float(threshold), int(v), out)
    return out


def em_iterate(stats, coef, settings):
    """Run up to max_iters EM passes warm-started from coef.

    Returns (Coefficients, iterations_used, status) where status is one of
    "converged", "max_iters", "diverged".  Divergence (iterate norm growing
    more than tenfold over three consecutive passes, or a non-finite
    iterate) is a recoverable signal for the caller's tau fallback.
    """
    vec = np.ascontiguousarray(coef.vec, dtype=float).copy()
    t2 = settings.tau * settings.tau
    iters, code = _backend.active.em_run(
        stats.A,
        stats.B,
        vec,
        t2,
        settings.lam * t2,
        int(coef.v),
        int(settings.max_iters),
        float(settings.rel_tol),
    )
    return Coefficients(vec=vec, v=coef.v), iters, EM_STATUS[code]


def em_iterate_multi(A, Bs, Betas, tau2s, lam_tau2s, v, max_iters, rel_tol):
    """Batched EM over k coefficient replicas sharing one Gram matrix A.

    Bs and Betas are (k, n) with one replica per row (Betas is advanced in
    place); tau2s and lam_tau2s give each row its own innovation variance
    and shrinkage threshold.  Each row follows exactly the per-vector
    em_iterate semantics -- stop on relative change below rel_tol, flag
    divergence on a non-finite iterate or a hundredfold squared-norm blowup
    over three passes -- but the k matrix-vector products per pass collapse
    into a single Betas @ A product, so A streams through memory once.

    Returns (iters, statuses) as integer arrays of length k; status codes
    index EM_STATUS.
    """
    k, _ = Betas.shape
    statuses = np.ones(k, dtype=np.int64)
    iters = np.zeros(k, dtype=np.int64)
    skip = np.zeros(k, dtype=np.uint8)
    hist = np.full((3, k), -1.0)
    change_sq = np.zeros(k)
    norm_sq = np.zeros(k)
    kernels = _backend.active
    for it in range(int(max_iters)):
        if skip.all():
            break
        R = Betas @ A
        kernels.multi_shrink_step(
            R, Bs, Betas, tau2s, lam_tau2s, int(v), skip, change_sq, norm_sq
        )
        for c in range(k):
            if skip[c]:
                continue
            iters[c] = it + 1
            nsq = norm_sq[c]
            if not np.isfinite(nsq):
                statuses[c] = 2
                skip[c] = 1
                continue
            if hist[0, c] > 0.0 and nsq > 100.0 * hist[0, c]:
                statuses[c] = 2
                skip[c] = 1
                continue
            hist[0, c] = hist[1, c]
            hist[1, c] = hist[2, c]
            hist[2, c] = nsq
            if np.sqrt(change_sq[c]) <= rel_tol * max(np.sqrt(nsq), 1e-300):
                statuses[c] = 0
                skip[c] = 1
    return iters, statuses


def power_iteration(A, tol=1e-6, max_iters=10000):
    """Largest eigenvalue of symmetric PSD A by power iteration.

    Deterministic start vector; stops when the Rayleigh quotient changes
    by less than tol relatively.
    """
    n = A.shape[0]
    x = np.ones(n) + np.arange(n) / max(n, 1) * 1e-3
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(max_iters):
        y = A @ x
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        x = y / norm
        new_lam = float(x @ (A @ x))
        if abs(new_lam - lam) <= tol * max(abs(new_lam), 1e-300):
            return new_lam
        lam = new_lam
    return lam


def spectral_check(stats, tau):
    """True iff the EM map is a contraction: tau > 0 and
    tau^2 * lambda_max(A) < 2 (lambda_max by power iteration)."""
    if tau <= 0:
        return False
    lam_max = power_iteration(stats.A)
    return tau * tau * lam_max < 2.0


def predict(coef, row):
    """Inner product of the coefficient vector with a design row."""
    return float(coef.vec @ row)
