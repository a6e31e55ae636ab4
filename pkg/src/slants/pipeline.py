"""Streaming engine tying the pieces together.

Life of one observation x_t pushed into a StreamModel:

1. the lag window turns it into a regression sample (after the first L
   observations) whose covariates strictly predate t;
2. during warm-up the sample is only buffered; once the warm-up quota is
   reached, per-covariate spline bases are frozen from quantiles of the
   buffered covariates and the buffer is replayed through the centering
   states and the sufficient statistics;
3. after warm-up each sample is scored prequentially: every penalty
   channel predicts y_t with its pre-update coefficients, then the
   statistics absorb the sample, the EM step refreshes each channel
   (halving the innovation scale and redoing the step if the iteration
   diverges), and the channel errors feed the penalty search.

All targets see the same design row, so the Gram matrix A is shared: the
model keeps one A plus a (3m, n) stack of per-channel moment vectors and
coefficient vectors (three penalty channels per target), and the EM step
advances the whole stack with batched passes that stream A through memory
once per pass instead of once per channel.
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _backend
from .estimator import (
    Coefficients,
    SufficientStats,
    em_iterate_multi,
    power_iteration,
)
from .lags import SeriesWindow, assemble_row
from .selection import backward_select, extract_graph, graph_from_support
from .splines import RunningMean, make_knots
from .tuning import InnovationScale, PenaltySearch, WeightSchedule

SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class FitConfig:
    """All knobs of a streaming fit (defaults follow the reference setup)."""

    lag: int = 8
    basis_size: int = 10
    degree: int = 2
    schedule: WeightSchedule = field(default_factory=WeightSchedule)
    q_lo: float = 0.01
    q_hi: float = 0.99
    warmup: int = None
    nu: float = 1.05
    delta: float = 1.5
    window: int = 20
    window_mode: str = "tumbling"
    em_iters: int = 5
    em_tol: float = 1e-7
    lambda_scale: float = 0.1
    tau_scale: float = 0.5
    tau_shrink: float = 0.5
    tau_floor: float = 1e-12
    group_floor: float = 1e-8
    step2: bool = False
    zeta: float = 0.4
    split: int = None

    def __post_init__(self):
        if self.lag < 1 or self.basis_size < 1 or self.em_iters < 1:
            raise ValueError("lag, basis_size and em_iters must be positive")
        if self.basis_size < self.degree + 1:
            raise ValueError("basis_size must be at least degree + 1")

    @property
    def warmup_length(self):
        """Warm-up quota in samples: explicit, else max(50, 5 v)."""
        if self.warmup is not None:
            return self.warmup
        return max(50, 5 * self.basis_size)

    def to_json(self):
        d = asdict(self)
        d["schedule"] = {"kind": self.schedule.kind, "c": self.schedule.c}
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        sched = d.pop("schedule")
        return cls(schedule=WeightSchedule(kind=sched["kind"], c=sched["c"]), **d)


@dataclass(frozen=True)
class StepRecord:
    """Per-step prequential log entry for one target."""

    target: int
    t: int
    y: float
    yhat: float
    err: float
    cum_avg: float
    lam: float
    tau: float
    win_lo: float
    win_mid: float
    win_hi: float


class _TargetTuning:
    """Innovation-scale and penalty-search state for one target."""

    def __init__(self):
        self.scale = None
        self.search = None
        self.cum_sum = 0.0
        self.cum_count = 0


class StreamModel:
    """Online additive-spline model of one or more target coordinates of a
    vector stream (see the module docstring for the step anatomy)."""

    def __init__(self, dim, targets, config=None):
        self.config = config if config is not None else FitConfig()
        self.dim = dim
        if isinstance(targets, int):
            targets = [targets]
        self.targets = [int(j) for j in targets]
        for j in self.targets:
            if not 0 <= j < dim:
                raise ValueError(f"target {j} outside 0..{dim - 1}")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError("duplicate targets")
        self.window = SeriesWindow(dim, self.config.lag)
        self.n_cov = self.window.n_covariates
        self.v = self.config.basis_size
        self.n = 1 + self.n_cov * self.v
        self.bases = None
        self.centers = None
        m = len(self.targets)
        self.A = np.zeros((self.n, self.n))
        self.Bs = np.zeros((3 * m, self.n))
        self.Betas = np.zeros((3 * m, self.n))
        self.t_logical = 0
        self.tuning = {j: _TargetTuning() for j in self.targets}
        self.phase = "warmup"
        self.t0 = None
        self._warm_covs = []
        self._warm_xs = []
        self._history = [] if self.config.step2 else None
        self._row_buf = np.zeros(self.n)
        self._y_rep = np.zeros(3 * m)

    def _pos(self, target):
        try:
            return self.targets.index(target)
        except ValueError:
            raise ValueError(f"target {target} not fitted") from None

    # ---- streaming -----------------------------------------------------

    def push(self, x):
        """Absorb one observation; returns the per-target StepRecords
        produced (empty during warm-up)."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"observation has shape {x.shape}, expected ({self.dim},)")
        if not np.isfinite(x).all():
            raise ValueError("non-finite observation")
        sample = self.window.push(x, target_index=self.targets[0])
        if sample is None:
            return []
        if self._history is not None:
            self._history.append((sample.t, x.copy(), sample.covariates))
        if self.phase == "warmup":
            self._warm_covs.append(sample.covariates)
            self._warm_xs.append(x.copy())
            if len(self._warm_covs) >= self.config.warmup_length:
                self._freeze()
            return []
        return self._step(sample.t, x, sample.covariates)

    def _freeze(self):
        cfg = self.config
        mat = np.asarray(self._warm_covs)
        self.bases = []
        for i in range(self.n_cov):
            try:
                self.bases.append(
                    make_knots(
                        mat[:, i], cfg.basis_size, cfg.degree, cfg.q_lo, cfg.q_hi
                    )
                )
            except ValueError as exc:
                if "degenerate covariate" in str(exc):
                    self.bases.append(None)
                else:
                    raise
        self.centers = [RunningMean(cfg.basis_size) for _ in range(self.n_cov)]
        for covs, xv in zip(self._warm_covs, self._warm_xs):
            row = self._make_row(covs)
            self._absorb(row, [float(xv[j]) for j in self.targets])
        self._init_tuning()
        self.phase = "run"
        self.t0 = self.window.t
        self._warm_covs = []
        self._warm_xs = []

    def _make_row(self, covs):
        """Update the centering states with this sample's raw basis values
        and assemble the centered design row."""
        raw_blocks = []
        for i, basis in enumerate(self.bases):
            if basis is None:
                raw_blocks.append(None)
                continue
            raw = basis.eval(covs[i])
            self.centers[i].update(raw)
            raw_blocks.append(raw)
        means = [c.mean for c in self.centers]
        return assemble_row(
            raw_blocks, means, self.config.basis_size, out=self._row_buf
        )

    def _absorb(self, row, ys):
        """Fold one (row, per-target y) sample into the shared statistics."""
        self.t_logical += 1
        gamma = self.config.schedule.gamma(self.t_logical)
        _backend.active.gram_update(self.A, row, gamma)
        for p, y in enumerate(ys):
            self._y_rep[3 * p : 3 * p + 3] = y
        self.Bs *= 1.0 - gamma
        self.Bs += np.outer(gamma * self._y_rep, row)

    def _init_tuning(self):
        """Fix the initial innovation scale and penalty from the warm-up
        statistics, then bring the channel coefficients to their EM fit."""
        cfg = self.config
        lam_max = power_iteration(self.A)
        tau0 = cfg.tau_scale / math.sqrt(max(lam_max, 1e-12))
        for p, j in enumerate(self.targets):
            tun = self.tuning[j]
            tun.scale = InnovationScale(
                tau0, shrink=cfg.tau_shrink, floor=cfg.tau_floor
            )
            body = self.Bs[3 * p, 1:].reshape(-1, self.v)
            max_norm = float(np.max(np.sqrt(np.einsum("ij,ij->i", body, body))))
            lam0 = max(cfg.lambda_scale * max_norm, 1e-12)
            tun.search = PenaltySearch(
                lam0,
                delta=cfg.delta,
                nu=cfg.nu,
                window=cfg.window,
                schedule=cfg.schedule,
                mode=cfg.window_mode,
            )
        self.Betas[:] = 0.0
        self._run_em_all()

    def _channel_knobs(self, tun, out_tau2, out_lam):
        t2 = tun.scale.tau * tun.scale.tau
        out_tau2[:] = t2
        for k, lam in enumerate(tun.search.lambdas()):
            out_lam[k] = lam * t2

    def _run_em_all(self):
        """EM-refresh every channel of every target from its pre-step
        coefficients, shrinking a target's tau and redoing its channels
        when the iteration diverges."""
        cfg = self.config
        m = len(self.targets)
        pre = self.Betas.copy()
        tau2s = np.empty(3 * m)
        lam_tau2s = np.empty(3 * m)
        for p, j in enumerate(self.targets):
            rows = slice(3 * p, 3 * p + 3)
            self._channel_knobs(self.tuning[j], tau2s[rows], lam_tau2s[rows])
        _, statuses = em_iterate_multi(
            self.A, self.Bs, self.Betas, tau2s, lam_tau2s,
            self.v, cfg.em_iters, cfg.em_tol,
        )
        for p, j in enumerate(self.targets):
            rows = slice(3 * p, 3 * p + 3)
            while (statuses[rows] == 2).any():
                tun = self.tuning[j]
                tun.scale.on_divergence()
                self.Betas[rows] = pre[rows]
                self._channel_knobs(tun, tau2s[rows], lam_tau2s[rows])
                _, sub = em_iterate_multi(
                    self.A, self.Bs[rows], self.Betas[rows],
                    tau2s[rows], lam_tau2s[rows],
                    self.v, cfg.em_iters, cfg.em_tol,
                )
                statuses[rows] = sub

    def _step(self, t, x, covs):
        row = self._make_row(covs)
        preds = self.Betas @ row
        ys = [float(x[j]) for j in self.targets]
        self._absorb(row, ys)
        self._run_em_all()
        records = []
        for p, j in enumerate(self.targets):
            tun = self.tuning[j]
            base = 3 * p
            errs = [(ys[p] - preds[base + k]) ** 2 for k in range(3)]
            tun.cum_sum += errs[1]
            tun.cum_count += 1
            winner = tun.search.step(errs, self.t_logical)
            if winner is not None:
                chosen = self.Betas[base + winner].copy()
                self.Betas[base : base + 3] = chosen
            means = tun.search.window_means()
            records.append(
                StepRecord(
                    target=j,
                    t=t,
                    y=ys[p],
                    yhat=float(preds[base + 1]),
                    err=errs[1],
                    cum_avg=tun.cum_sum / tun.cum_count,
                    lam=tun.search.center,
                    tau=tun.scale.tau,
                    win_lo=means[0],
                    win_mid=means[1],
                    win_hi=means[2],
                )
            )
        return records

    # ---- inspection ----------------------------------------------------

    def _require_run(self):
        if self.phase != "run":
            raise ValueError("insufficient warm-up data")

    def covariate_dim_lag(self, cov_idx):
        """Map a 0-based covariate index to (dimension, lag), both intuitive:
        dimension 0-based, lag 1-based."""
        return cov_idx // self.config.lag, cov_idx % self.config.lag + 1

    def coefficients(self, target):
        """Center-channel coefficients for one target (a copy)."""
        self._require_run()
        p = self._pos(target)
        return Coefficients(vec=self.Betas[3 * p + 1].copy(), v=self.v)

    def active_set(self, target, floor=None):
        """0-based covariate indices with nonzero coefficient blocks."""
        floor = self.config.group_floor if floor is None else floor
        return self.coefficients(target).active_set(floor)

    def component_curve(self, target, cov_idx, n=200, points=None):
        """Fitted component of one covariate, centered to zero mean over
        the evaluation points.  Returns (xs, values); xs is an n-point
        grid over the basis domain, or the given points (values outside
        the domain clamp to the boundary like any covariate)."""
        self._require_run()
        basis = self.bases[cov_idx]
        if basis is None:
            raise ValueError("degenerate covariate")
        if points is None:
            xs = basis.grid(n)
        else:
            xs = np.asarray(points, dtype=float)
            n = xs.shape[0]
        beta = self.coefficients(target).group(cov_idx)
        mean = self.centers[cov_idx].mean
        vals = np.empty(n)
        buf = np.empty(self.config.basis_size)
        for k, p in enumerate(xs):
            vals[k] = float(beta @ (basis.eval(p, out=buf) - mean))
        vals -= vals.mean()
        return xs, vals

    def graph(self, floor=None, refined=None, support=None):
        """Causality graph over the fitted targets.

        By default the edge support comes from the streaming coefficient
        norms, or from backward-elimination refinement when the config has
        step2=True; pass refined=True/False to force either, or a
        {target: covariate indices} mapping as support to use precomputed
        sets (e.g. from an earlier refine() call).
        """
        self._require_run()
        floor = self.config.group_floor if floor is None else floor
        if support is None:
            if refined is None:
                refined = self.config.step2
            if refined:
                support = {
                    j: res.selected for j, res in self.refine().items()
                }
        if support is not None:
            return graph_from_support(support, self.config.lag, self.dim)
        coeffs = {j: self.coefficients(j) for j in self.targets}
        return extract_graph(coeffs, self.config.lag, self.dim, floor=floor)

    def refine(self, target=None):
        """Backward-elimination refinement on the second half of the
        stream (requires step2=True in the config).

        Returns {target: BackwardResult}.
        """
        self._require_run()
        if self._history is None:
            raise ValueError("refinement needs step2=True in the config")
        t_total = self.window.t
        t1 = self.config.split if self.config.split is not None else t_total // 2
        tail = [(t, x, c) for (t, x, c) in self._history if t > t1]
        if not tail:
            raise ValueError("Step 2 underdetermined")
        covs = np.asarray([c for (_, _, c) in tail])
        targets = self.targets if target is None else [target]
        out = {}
        for j in targets:
            ys = np.asarray([x[j] for (_, x, _) in tail])
            cands = self.active_set(j)
            out[j] = backward_select(
                ys, covs, cands, t1, zeta=self.config.zeta,
                degree=self.config.degree,
            )
        return out

    # ---- persistence ---------------------------------------------------

    def save(self, path):
        """Write a lossless snapshot of the full engine state."""
        data = {
            "version": np.array(SNAPSHOT_VERSION),
            "dim": np.array(self.dim),
            "targets": np.array(self.targets, dtype=np.int64),
            "config": np.frombuffer(
                self.config.to_json().encode(), dtype=np.uint8
            ),
            "phase": np.array(1 if self.phase == "run" else 0),
            "win_buf": self.window._buf,
            "win_filled": np.array(self.window._filled),
            "win_t": np.array(self.window.t),
            "t0": np.array(-1 if self.t0 is None else self.t0),
        }
        if self._warm_covs:
            data["warm_covs"] = np.asarray(self._warm_covs)
            data["warm_xs"] = np.asarray(self._warm_xs)
        if self._history is not None:
            data["hist_flag"] = np.array(1)
            if self._history:
                data["hist_t"] = np.array([t for (t, _, _) in self._history])
                data["hist_x"] = np.asarray([x for (_, x, _) in self._history])
                data["hist_c"] = np.asarray([c for (_, _, c) in self._history])
        if self.phase == "run":
            nb = self.config.basis_size + self.config.degree + 1
            knots = np.full((self.n_cov, nb), np.nan)
            for i, b in enumerate(self.bases):
                if b is not None:
                    knots[i] = b.knots
            data["knots"] = knots
            data["center_means"] = np.asarray([c.mean for c in self.centers])
            data["center_counts"] = np.array(
                [c.count for c in self.centers], dtype=np.int64
            )
            data["A"] = self.A
            data["t_logical"] = np.array(self.t_logical)
            for p, j in enumerate(self.targets):
                pre = f"core{j}_"
                tun = self.tuning[j]
                data[pre + "B"] = self.Bs[3 * p]
                data[pre + "betas"] = self.Betas[3 * p : 3 * p + 3]
                data[pre + "tau"] = np.array(tun.scale.tau)
                data[pre + "lam"] = np.array(tun.search.center)
                data[pre + "delta"] = np.array(tun.search.delta)
                data[pre + "errors"] = _pad_windows(tun.search.errors)
                data[pre + "err_len"] = np.array(
                    [len(e) for e in tun.search.errors], dtype=np.int64
                )
                data[pre + "cum"] = np.array([tun.cum_sum, float(tun.cum_count)])
        with open(path, "wb") as fh:
            np.savez(fh, **data)

    @classmethod
    def load(cls, path):
        with np.load(path) as z:
            version = int(z["version"])
            if version != SNAPSHOT_VERSION:
                raise ValueError(f"unsupported snapshot version {version}")
            config = FitConfig.from_json(bytes(z["config"]).decode())
            model = cls(int(z["dim"]), [int(j) for j in z["targets"]], config)
            model.window._buf = z["win_buf"].copy()
            model.window._filled = int(z["win_filled"])
            model.window.t = int(z["win_t"])
            t0 = int(z["t0"])
            model.t0 = None if t0 < 0 else t0
            if "warm_covs" in z:
                model._warm_covs = [c.copy() for c in z["warm_covs"]]
                model._warm_xs = [x.copy() for x in z["warm_xs"]]
            if "hist_flag" in z and "hist_t" in z:
                model._history = [
                    (int(t), x.copy(), c.copy())
                    for t, x, c in zip(z["hist_t"], z["hist_x"], z["hist_c"])
                ]
            if int(z["phase"]) == 1:
                model.phase = "run"
                cfg = model.config
                model.bases = []
                for i in range(model.n_cov):
                    row = z["knots"][i]
                    if np.isnan(row).any():
                        model.bases.append(None)
                    else:
                        model.bases.append(
                            _basis_from_knots(row, cfg.basis_size, cfg.degree)
                        )
                means = z["center_means"]
                counts = z["center_counts"]
                model.centers = []
                for i in range(model.n_cov):
                    c = RunningMean(cfg.basis_size)
                    c.mean = means[i].copy()
                    c.count = int(counts[i])
                    model.centers.append(c)
                model.A[:] = z["A"]
                model.t_logical = int(z["t_logical"])
                for p, j in enumerate(model.targets):
                    pre = f"core{j}_"
                    tun = model.tuning[j]
                    model.Bs[3 * p : 3 * p + 3] = z[pre + "B"]
                    model.Betas[3 * p : 3 * p + 3] = z[pre + "betas"]
                    tun.scale = InnovationScale(
                        float(z[pre + "tau"]),
                        shrink=cfg.tau_shrink,
                        floor=cfg.tau_floor,
                    )
                    tun.search = PenaltySearch(
                        float(z[pre + "lam"]),
                        delta=cfg.delta,
                        nu=cfg.nu,
                        window=cfg.window,
                        schedule=cfg.schedule,
                        mode=cfg.window_mode,
                    )
                    tun.search.delta = float(z[pre + "delta"])
                    lens = z[pre + "err_len"]
                    padded = z[pre + "errors"]
                    tun.search.errors = [
                        list(padded[k, : lens[k]]) for k in range(3)
                    ]
                    tun.cum_sum = float(z[pre + "cum"][0])
                    tun.cum_count = int(z[pre + "cum"][1])
        return model


def _pad_windows(errors):
    width = max((len(e) for e in errors), default=0)
    out = np.zeros((3, max(width, 1)))
    for k, e in enumerate(errors):
        out[k, : len(e)] = e
    return out


def _basis_from_knots(knots, v, degree):
    from .splines import SplineBasis

    return SplineBasis(degree=degree, knots=knots.copy(), v=v)


class ArBaseline:
    """Streaming autoregressive least-squares baseline on the target alone.

    Same prequential contract as the main model: the prediction for y_t is
    formed from data through t-1, then the statistics absorb y_t.
    """

    def __init__(self, order, schedule=None, ridge=1e-10):
        if order < 1:
            raise ValueError("order must be positive")
        self.order = order
        self.schedule = schedule if schedule is not None else WeightSchedule()
        self.ridge = ridge
        self.stats = SufficientStats(order + 1)
        self.t_logical = 0
        self._lags = []

    def push(self, y):
        """Absorb one target value; returns the squared prediction error
        for this step, or None while the lag window is filling."""
        y = float(y)
        if not math.isfinite(y):
            raise ValueError("non-finite observation")
        err = None
        if len(self._lags) == self.order:
            row = np.empty(self.order + 1)
            row[0] = 1.0
            row[1:] = self._lags[::-1]
            theta = np.linalg.solve(
                self.stats.A + self.ridge * np.eye(self.order + 1), self.stats.B
            )
            pred = float(theta @ row)
            err = (y - pred) ** 2
            self.t_logical += 1
            self.stats.update(row, y, self.schedule.gamma(self.t_logical))
        self._lags.append(y)
        if len(self._lags) > self.order:
            self._lags.pop(0)
        return err
