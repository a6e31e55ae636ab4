"""Scaling and backend benchmarks.

scaling_harness times a full sequential pass over a synthetic bivariate
stream at several lengths, either with the streaming fitter (per-step
cost independent of t) or with a rerun-batch baseline that re-solves the
batch group-LASSO from scratch at every arrival (per-step cost growing
with t), giving the superlinear total the streaming path avoids.

compare_backends times the two kernel implementations (numpy fallback vs
compiled extension) on the dominant per-step operations.
"""

import time

import numpy as np

from . import _backend
from .generators import experiment_bivariate
from .lags import SeriesWindow, assemble_row
from .estimator import power_iteration
from .pipeline import FitConfig, StreamModel
from .splines import RunningMean, make_knots


def _prepare_rows(data, config, target):
    """Design rows and targets exactly as the streaming pipeline sees them
    (quantile knots frozen after warm-up, running-mean centering)."""
    dim = data.shape[1]
    window = SeriesWindow(dim, config.lag)
    samples = []
    for x in data:
        s = window.push(x, target_index=target)
        if s is not None:
            samples.append(s)
    warm = samples[: config.warmup_length]
    if len(warm) < config.warmup_length:
        raise ValueError("series too short for the configured warm-up")
    mat = np.asarray([s.covariates for s in warm])
    bases = []
    for i in range(mat.shape[1]):
        try:
            bases.append(
                make_knots(mat[:, i], config.basis_size, config.degree,
                           config.q_lo, config.q_hi)
            )
        except ValueError:
            bases.append(None)
    centers = [RunningMean(config.basis_size) for _ in bases]
    rows = np.empty((len(samples), 1 + len(bases) * config.basis_size))
    ys = np.empty(len(samples))
    for k, s in enumerate(samples):
        raw_blocks = []
        for i, basis in enumerate(bases):
            if basis is None:
                raw_blocks.append(None)
                continue
            raw = basis.eval(s.covariates[i])
            centers[i].update(raw)
            raw_blocks.append(raw)
        assemble_row(raw_blocks, [c.mean for c in centers],
                     config.basis_size, out=rows[k])
        ys[k] = s.y
    return rows, ys


def _time_streaming(data, config, target):
    wall = time.perf_counter()
    cpu = time.process_time()
    model = StreamModel(data.shape[1], target, config)
    for x in data:
        model.push(x)
    return time.perf_counter() - wall, time.process_time() - cpu


def _time_rerun_batch(data, config, target, lam_scale=0.1, iters=50):
    """Rerun the batch solver over all data so far at each post-warm-up
    arrival (the sequential-batch analogue of the streaming fitter).

    Each re-solve runs a fixed budget of proximal-gradient passes over the
    full batch, warm-started from the previous solution, so the cost per
    arrival grows with the data size and the total grows superlinearly --
    the scaling the streaming fitter is built to avoid.
    """
    rows, ys = _prepare_rows(data, config, target)
    warm = config.warmup_length
    v = config.basis_size
    wall = time.perf_counter()
    cpu = time.process_time()
    bw = rows[:warm].T @ ys[:warm] / warm
    body = bw[1:].reshape(-1, v)
    lam = max(
        lam_scale * float(np.max(np.sqrt(np.einsum("ij,ij->i", body, body)))),
        1e-12,
    )
    kern = _backend.active
    # fixed gradient step 1/L with L estimated once from the warm-up Gram
    # (the series is stationary; the margin covers estimation error)
    G0 = rows[:warm].T @ rows[:warm] / warm
    step = 1.0 / (1.5 * max(power_iteration(G0), 1e-12))
    beta = np.zeros(rows.shape[1])
    scratch = np.empty_like(beta)
    for t in range(warm + 1, rows.shape[0] + 1):
        Z = rows[:t]
        Y = ys[:t]
        for _ in range(iters):
            grad = Z.T @ (Z @ beta - Y) / t
            np.subtract(beta, step * grad, out=scratch)
            kern.group_shrink(scratch, lam * step, v, beta)
    return time.perf_counter() - wall, time.process_time() - cpu


def scaling_harness(t_values, repeats=3, method="streaming", seed=7,
                    config=None, target=1):
    """Wall-time means and standard errors per stream length.

    Returns a list of dicts with keys T, mean_seconds, stderr_seconds,
    method.  Each repeat uses a fresh seed (seed + repeat index).
    """
    if repeats < 1:
        raise ValueError("repeats must be positive")
    t_values = [int(T) for T in t_values]
    if not t_values:
        raise ValueError("t_values must not be empty")
    if any(b <= a for a, b in zip(t_values, t_values[1:])):
        raise ValueError("t_values must be strictly increasing")
    methods = {"streaming": _time_streaming, "rerun_batch": _time_rerun_batch}
    if method not in methods:
        raise ValueError(f"unknown method {method!r}")
    timer = methods[method]
    config = config if config is not None else FitConfig()
    # one untimed pass so interpreter/library one-time costs don't land on
    # the first measured length
    t_small = config.lag + config.warmup_length + 10
    timer(experiment_bivariate(t_small, seed), config, target)
    # repeats interleave across lengths so slow machine-load drift hits
    # every length alike and cancels out of time ratios
    times = {int(T): [] for T in t_values}
    for k in range(repeats):
        for T in t_values:
            data = experiment_bivariate(T, seed + k)
            times[int(T)].append(timer(data, config, target))
    out = []
    for T in t_values:
        wall = np.asarray([w for (w, _) in times[int(T)]])
        cpu = np.asarray([c for (_, c) in times[int(T)]])
        stderr = (
            float(wall.std(ddof=1) / np.sqrt(repeats)) if repeats > 1 else 0.0
        )
        out.append(
            {
                "T": int(T),
                "mean_seconds": float(wall.mean()),
                "min_seconds": float(wall.min()),
                "stderr_seconds": stderr,
                "cpu_mean_seconds": float(cpu.mean()),
                "cpu_min_seconds": float(cpu.min()),
                "method": method,
            }
        )
    return out


def compare_backends(n_groups_list=(8, 16, 32), v=10, steps=200, seed=11,
                     em_iters=5):
    """Per-step kernel timings for every available backend.

    Times the dominant pair (moment update + EM refresh) on synthetic
    dense statistics.  Returns a list of dicts.
    """
    rng = np.random.default_rng(seed)
    out = []
    for n_groups in n_groups_list:
        n = 1 + n_groups * v
        base = rng.standard_normal((n, 2 * n))
        A0 = base @ base.T / (2 * n)
        B0 = rng.standard_normal(n)
        rows = rng.standard_normal((steps, n))
        ys = rng.standard_normal(steps)
        tau2 = 0.5 / float(np.linalg.eigvalsh(A0).max())
        for name in _backend.available():
            kern = _backend.get(name)
            A = A0.copy()
            B = B0.copy()
            beta = np.zeros(n)
            start = time.perf_counter()
            for k in range(steps):
                kern.rank1_update(A, B, rows[k], float(ys[k]), 0.01)
                kern.em_run(A, B, beta, tau2, 0.01 * tau2, v, em_iters, 1e-7)
            elapsed = time.perf_counter() - start
            out.append(
                {
                    "backend": name,
                    "n_groups": int(n_groups),
                    "v": int(v),
                    "seconds_per_step": elapsed / steps,
                }
            )
    return out


def main(argv=None):
    import argparse

    parser = argparse.ArgumentParser(
        description="Compare kernel backends on the per-step hot path."
    )
    parser.add_argument("--sizes", default="8,16,32",
                        help="comma-separated group counts")
    parser.add_argument("--v", type=int, default=10)
    parser.add_argument("--steps", type=int, default=200)
    args = parser.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",") if s]
    rows = compare_backends(sizes, v=args.v, steps=args.steps)
    print("backend,n_groups,v,seconds_per_step")
    for r in rows:
        print(f"{r['backend']},{r['n_groups']},{r['v']},"
              f"{r['seconds_per_step']:.6g}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
