"""Clamped B-spline bases on empirical-quantile domains, plus the running
mean used to center basis columns in streaming mode.

A basis with v functions of degree ell partitions the domain into
J = v - ell equal intervals; the full knot vector repeats each boundary
ell + 1 times so the basis is a partition of unity on the whole domain.
Inputs outside the domain are clamped to its endpoints before evaluation.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _backend


@dataclass(frozen=True)
class SplineBasis:
    """Immutable basis description: degree, clamped knot vector, size."""

    degree: int
    knots: np.ndarray
    v: int

    @property
    def domain_lo(self):
        return float(self.knots[self.degree])

    @property
    def domain_hi(self):
        return float(self.knots[self.v])

    def eval(self, x, out=None):
        """All v basis values at scalar x (clamped to the domain)."""
        if out is None:
            out = np.empty(self.v)
        _backend.active.basis_eval_into(self.knots, self.degree, float(x), out)
        return out

    def grid(self, n=200):
        """n equally spaced evaluation points spanning the domain."""
        return np.linspace(self.domain_lo, self.domain_hi, n)


def make_knots(samples, v, degree=2, q_lo=0.01, q_hi=0.99):
    """Build a basis whose domain is the [q_lo, q_hi] empirical quantile
    range of the warm-up samples, with equally spaced interior knots.

    Raises ValueError("insufficient warm-up data") on an empty sample and
    ValueError("degenerate covariate") when the quantile range has zero
    width (e.g. a constant covariate).
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise ValueError("insufficient warm-up data")
    if not (0.0 <= q_lo < q_hi <= 1.0):
        raise ValueError(f"bad quantile bounds ({q_lo}, {q_hi})")
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    if v < degree + 1:
        raise ValueError(f"basis size v={v} needs at least degree+1={degree + 1}")
    lo, hi = np.quantile(samples, [q_lo, q_hi])
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise ValueError("degenerate covariate")
    if hi <= lo:
        raise ValueError("degenerate covariate")
    breaks = np.linspace(lo, hi, v - degree + 1)
    knots = np.concatenate(
        [np.full(degree, lo), breaks, np.full(degree, hi)]
    )
    return SplineBasis(degree=degree, knots=knots, v=v)


@dataclass
class RunningMean:
    """Streaming mean of raw basis-value vectors for one covariate."""

    dim: int
    count: int = 0
    mean: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.mean is None:
            self.mean = np.zeros(self.dim)

    def update(self, raw):
        self.count += 1
        self.mean += (raw - self.mean) / self.count

    def centered(self, raw):
        if self.count == 0:
            raise ValueError("centering not initialized")
        return raw - self.mean


def centered_eval(basis, state, x, out=None):
    """Centered basis values b(x) - running mean (no state update)."""
    raw = basis.eval(x, out=out)
    return state.centered(raw)
