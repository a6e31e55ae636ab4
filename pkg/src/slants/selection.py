"""Refinement stage and causality-graph extraction.

The refinement stage takes the covariates surviving the streaming fit and
prunes them by backward elimination on held-out-in-time data: each
candidate deletion is scored by unpenalized least-squares MSE of a fresh
spline model, and a deletion is accepted while the MSE increase it causes
stays below a BIC-style penalty (v_T log T1)/T1, where v_T = T1^zeta is
the per-covariate basis size used in this stage.
"""

import math
from dataclasses import dataclass

import numpy as np

from .splines import SplineBasis


def _equally_spaced_basis(values, v, degree):
    """Basis with v functions on equally spaced knots over the observed
    range of values; None when the range is degenerate."""
    lo = float(np.min(values))
    hi = float(np.max(values))
    if hi <= lo:
        return None
    breaks = np.linspace(lo, hi, v - degree + 1)
    knots = np.concatenate([np.full(degree, lo), breaks, np.full(degree, hi)])
    return SplineBasis(degree=degree, knots=knots, v=v)


def subset_mse(ys, covs, subset, v_T, degree=2, ridge=1e-10):
    """Mean squared error of an additive spline fit on the given covariate
    subset (unpenalized least squares via ridge-jittered normal equations).

    ys: (n,) targets; covs: (n, m) covariate matrix; subset: iterable of
    0-based covariate indices.  The empty subset scores the variance of y
    about its mean.  Raises ValueError("Step 2 underdetermined") when the
    parameter count reaches the sample count.
    """
    ys = np.asarray(ys, dtype=float).ravel()
    covs = np.asarray(covs, dtype=float)
    n = ys.shape[0]
    subset = sorted(int(i) for i in subset)
    if v_T < degree + 1:
        raise ValueError(f"v_T={v_T} needs at least degree+1={degree + 1}")
    yc = ys - ys.mean()
    if not subset:
        return float(yc @ yc / n)
    n_params = 1 + len(subset) * v_T
    if n <= n_params:
        raise ValueError("Step 2 underdetermined")
    blocks = []
    for idx in subset:
        vals = covs[:, idx]
        basis = _equally_spaced_basis(vals, v_T, degree)
        if basis is None:
            continue
        block = np.empty((n, v_T))
        for r in range(n):
            basis.eval(vals[r], out=block[r])
        blocks.append(block - block.mean(axis=0))
    if not blocks:
        return float(yc @ yc / n)
    X = np.hstack(blocks)
    G = X.T @ X + ridge * np.eye(X.shape[1])
    coef = np.linalg.solve(G, X.T @ yc)
    resid = yc - X @ coef
    return float(resid @ resid / n)


@dataclass
class BackwardResult:
    """Outcome of backward elimination: the kept covariates, their final
    MSE, and the (subset, mse) trail of accepted deletions."""

    selected: list
    mse: float
    trail: list


def backward_select(ys, covs, candidates, t1, zeta=0.4, degree=2,
                    penalty=None, v_T=None):
    """Backward elimination over the candidate covariate set.

    At each round the deletion with the smallest resulting MSE (ties to
    the smaller index) is evaluated; it is accepted while the MSE increase
    stays below the penalty (default (v_T log T1)/T1 with v_T = T1^zeta),
    otherwise the current set is returned.
    """
    if t1 < 2:
        raise ValueError("t1 must be at least 2")
    if v_T is None:
        v_T = max(degree + 1, int(round(t1**zeta)))
    if penalty is None:
        penalty = v_T * math.log(t1) / t1
    current = sorted(int(i) for i in candidates)
    mse_current = subset_mse(ys, covs, current, v_T, degree=degree)
    trail = [(tuple(current), mse_current)]
    while current:
        best_idx = None
        best_mse = None
        for idx in current:
            trial = [i for i in current if i != idx]
            mse = subset_mse(ys, covs, trial, v_T, degree=degree)
            if best_mse is None or mse < best_mse:
                best_mse = mse
                best_idx = idx
        if best_mse - mse_current >= penalty:
            break
        current = [i for i in current if i != best_idx]
        mse_current = best_mse
        trail.append((tuple(current), mse_current))
    return BackwardResult(selected=current, mse=mse_current, trail=trail)


@dataclass(frozen=True)
class GraphEdge:
    source: int
    target: int
    label: str


@dataclass
class CausalityGraph:
    """Directed lag-labeled graph over series dimensions (1-based ids)."""

    dim: int
    edges: list

    def edge_pairs(self):
        return {(e.source, e.target) for e in self.edges}

    def to_dot(self):
        lines = ["digraph causality {"]
        for d in range(1, self.dim + 1):
            lines.append(f"  {d};")
        for e in self.edges:
            lines.append(f'  {e.source} -> {e.target} [label="{e.label}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def graph_from_support(support_by_target, lag, dim):
    """Causality graph from per-target active covariate sets.

    support_by_target maps 0-based target dimension -> iterable of 0-based
    covariate indices in the shared (d, l) layout, where index d*lag+(l-1)
    is dimension d at lag l.  Edge d -> j carries the sorted concatenation
    of active lags ("12" for lags 1 and 2); edges are sorted by (source,
    target) and node ids are 1-based.
    """
    edges = []
    for target, covs in sorted(support_by_target.items()):
        lags_by_source = {}
        for cov_idx in covs:
            cov_idx = int(cov_idx)
            d = cov_idx // lag
            l = cov_idx % lag + 1
            lags_by_source.setdefault(d, []).append(l)
        for d, ls in lags_by_source.items():
            label = "".join(str(l) for l in sorted(ls))
            edges.append(GraphEdge(source=d + 1, target=target + 1, label=label))
    edges.sort(key=lambda e: (e.source, e.target))
    return CausalityGraph(dim=dim, edges=edges)


def extract_graph(coeffs_by_target, lag, dim, floor=1e-8):
    """Causality graph from per-target coefficient sets.

    coeffs_by_target maps 0-based target dimension -> Coefficients over
    the shared (d, l) covariate layout; a lag is active when its block
    norm exceeds floor.  See graph_from_support for the edge conventions.
    """
    support = {
        target: coef.active_set(floor)
        for target, coef in coeffs_by_target.items()
    }
    return graph_from_support(support, lag, dim)
