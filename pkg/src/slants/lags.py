"""Lag embedding: turn a vector stream into regression samples.

Covariate ordering is fixed across the package: covariate index
(d - 1)*L + l (1-based) holds dimension d at lag l, i.e. X_{d, t-l}.
With 0-based dimension id d0 and lag l in 1..L that is slot d0*L + (l-1).
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RegressionSample:
    """One supervised pair: target value y at time t with the D*L lagged
    covariates that strictly precede it."""

    t: int
    y: float
    covariates: np.ndarray


class SeriesWindow:
    """Rolling buffer of the last L observations of a D-dimensional series.

    push() returns a sample only once L past observations exist, so the
    first sample carries t = L + 1.
    """

    def __init__(self, dim, lag):
        if dim < 1 or lag < 1:
            raise ValueError("dim and lag must be positive")
        self.dim = dim
        self.lag = lag
        self.t = 0
        self._buf = np.zeros((lag, dim))
        self._filled = 0

    @property
    def n_covariates(self):
        return self.dim * self.lag

    def covariates_now(self):
        """Lagged covariate vector for the upcoming time step, or None."""
        if self._filled < self.lag:
            return None
        cov = np.empty(self.dim * self.lag)
        for l in range(1, self.lag + 1):
            cov[(l - 1) :: self.lag] = self._buf[-l]
        return cov

    def push(self, x, target_index=0):
        """Absorb observation x (length D); return the sample it completes.

        target_index selects which coordinate becomes y (0-based).
        """
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected {self.dim} values, got shape {x.shape}")
        self.t += 1
        sample = None
        cov = self.covariates_now()
        if cov is not None:
            sample = RegressionSample(t=self.t, y=float(x[target_index]), covariates=cov)
        self._buf = np.roll(self._buf, -1, axis=0)
        self._buf[-1] = x
        if self._filled < self.lag:
            self._filled += 1
        return sample


def assemble_row(raw_blocks, means, v, out=None):
    """Design row [1, block_1, ..., block_m] from raw basis blocks minus
    their running means; a None block (degenerate covariate) stays zero."""
    m = len(raw_blocks)
    n = 1 + m * v
    if out is None:
        out = np.zeros(n)
    else:
        out[:] = 0.0
    out[0] = 1.0
    for i, raw in enumerate(raw_blocks):
        if raw is None:
            continue
        base = 1 + i * v
        out[base : base + v] = raw - means[i]
    return out


def design_row(sample, bases, centers, out=None):
    """Centered spline design row for one sample.

    bases and centers are per-covariate lists; a None basis marks a
    degenerate covariate whose block is identically zero.
    """
    v = next(b.v for b in bases if b is not None)
    raw_blocks = []
    means = []
    for i, basis in enumerate(bases):
        if basis is None:
            raw_blocks.append(None)
            means.append(None)
        else:
            if centers[i].count == 0:
                raise ValueError("centering not initialized")
            raw_blocks.append(basis.eval(sample.covariates[i]))
            means.append(centers[i].mean)
    return assemble_row(raw_blocks, means, v, out=out)
