"""Acceptance checks, one console PASS/FAIL line per requirement.

Every test prints "ACCEPTANCE <id>: PASS|FAIL (<detail>)" on the real
console (bypassing capture) before asserting, so a full run always shows
the complete scoreboard."""

import time

import numpy as np

from slants import cli
from slants.estimator import (
    Coefficients,
    EmSettings,
    SufficientStats,
    em_iterate,
    group_soft_threshold,
    power_iteration,
    spectral_check,
)
from slants.generators import (
    DeterministicRng,
    TRUE_NETWORK_EDGES,
    experiment_bivariate,
    experiment_network,
    experiment_shift,
)
from slants.bench import scaling_harness
from slants.oracle import batch_group_lasso, group_lasso_objective, quadratic_objective
from slants.pipeline import FitConfig, StreamModel
from slants.selection import backward_select
from slants.splines import make_knots
from slants.tuning import WeightSchedule, weights_closed_form


def _report(capsys, label, ok, detail):
    with capsys.disabled():
        print(f"ACCEPTANCE {label}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{label}: {detail}"


def _push_all(model, data):
    records = []
    for row in data:
        records.extend(model.push(row))
    return records


def _inject(A, B):
    stats = SufficientStats(A.shape[0])
    stats.A[:] = A
    stats.B[:] = B
    return stats


class TestFixedPoint:
    def test_1_em_limit_matches_batch_minimizer(self, capsys):
        """Random instances, equal-weight window: the streaming EM fixed
        point and an independent batch solver agree on objective value and
        coefficients."""
        start = time.perf_counter()
        rng = np.random.default_rng(1234)
        worst_obj = 0.0
        worst_coef = 0.0
        scales = [0.05, 0.3, 0.9]
        for i in range(50):
            g = int(rng.integers(1, 7))
            v = int(rng.integers(2, 6))
            n = 1 + g * v
            T = int(rng.integers(3 * n, 201))
            Z = np.column_stack(
                [np.ones(T), rng.standard_normal((T, n - 1))]
            )
            beta_true = np.zeros(n)
            beta_true[0] = rng.standard_normal()
            for b in range(g):
                if rng.random() < 0.5:
                    beta_true[1 + b * v : 1 + (b + 1) * v] = rng.standard_normal(v)
            Y = Z @ beta_true + 0.1 * rng.standard_normal(T)
            stats = SufficientStats(n)
            for t in range(T):  # harmonic gains = flat 1/T weights
                stats.update(Z[t], float(Y[t]), 1.0 / (t + 1))
            body = stats.B[1:].reshape(g, v)
            lam = scales[i % 3] * float(
                np.max(np.sqrt(np.einsum("ij,ij->i", body, body)))
            ) + 1e-9
            tau = 1.0 / np.sqrt(power_iteration(stats.A))
            coef, _, status = em_iterate(
                stats,
                Coefficients.zeros(g, v),
                EmSettings(tau=tau, lam=lam, max_iters=500_000, rel_tol=1e-13),
            )
            assert status == "converged"
            w = np.full(T, 1.0 / T)
            beta_star, info = batch_group_lasso(Z, Y, w, lam, v, tol=1e-10)
            obj_em = group_lasso_objective(Z, Y, w, lam, coef.vec, v)
            rel_obj = abs(obj_em - info["objective"]) / max(
                abs(info["objective"]), 1e-12
            )
            rel_coef = float(
                np.linalg.norm(coef.vec - beta_star)
                / max(np.linalg.norm(beta_star), 1e-6)
            )
            worst_obj = max(worst_obj, rel_obj)
            worst_coef = max(worst_coef, rel_coef)
        elapsed = time.perf_counter() - start
        ok = worst_obj <= 1e-8 and worst_coef <= 1e-6 and elapsed < 30
        _report(
            capsys, "1", ok,
            f"50 instances, worst objective rel {worst_obj:.2e}, "
            f"worst coefficient rel {worst_coef:.2e}, {elapsed:.1f}s",
        )

    def test_2_geometric_convergence_rate(self, capsys):
        """When the spectral contraction margin holds, the per-pass error
        decay never beats the bound by the wrong side: fitted rate is at
        most the contraction factor plus 0.02."""
        start = time.perf_counter()
        rng = np.random.default_rng(77)
        worst_gap = -np.inf
        for _ in range(10):
            g = int(rng.integers(2, 5))
            v = int(rng.integers(2, 5))
            n = 1 + g * v
            eigs = rng.uniform(0.2, 1.0, n)
            eigs[0], eigs[-1] = 0.2, 1.0
            Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
            A = (Q * eigs) @ Q.T
            A = 0.5 * (A + A.T)
            B = rng.standard_normal(n)
            stats = _inject(A, B)
            tau = 1.0
            assert spectral_check(stats, tau)
            xi = float(np.max(np.abs(1.0 - tau * tau * eigs)))
            assert xi < 0.95
            body = B[1:].reshape(g, v)
            lam = 0.05 * float(
                np.max(np.sqrt(np.einsum("ij,ij->i", body, body)))
            )
            limit, _, status = em_iterate(
                stats,
                Coefficients.zeros(g, v),
                EmSettings(tau=tau, lam=lam, max_iters=10_000, rel_tol=1e-15),
            )
            assert status == "converged"
            coef = Coefficients(vec=rng.standard_normal(n), v=v)
            errs = [float(np.linalg.norm(coef.vec - limit.vec))]
            for _ in range(30):
                coef, _, _ = em_iterate(
                    stats, coef,
                    EmSettings(tau=tau, lam=lam, max_iters=1, rel_tol=0.0),
                )
                errs.append(float(np.linalg.norm(coef.vec - limit.vec)))
            rate = (errs[-1] / errs[0]) ** (1.0 / (len(errs) - 1))
            worst_gap = max(worst_gap, rate - xi)
        elapsed = time.perf_counter() - start
        ok = worst_gap <= 0.02 and elapsed < 10
        _report(
            capsys, "2", ok,
            f"10 instances, worst rate excess over bound {worst_gap:+.4f}, "
            f"{elapsed:.1f}s",
        )


class TestSyntheticRecovery:
    def test_3_bivariate_support_recovery(self, capsys):
        """Quadratic/lagged bivariate stream, default fit: the active set
        is exactly the two planted terms in at least 17 of 20 seeds."""
        start = time.perf_counter()
        hits = 0
        for seed in range(20):
            model = StreamModel(2, 1, FitConfig())
            _push_all(model, experiment_bivariate(500, seed))
            hits += model.active_set(1) == [0, 6]
        elapsed = time.perf_counter() - start
        ok = hits >= 17 and elapsed < 120
        _report(capsys, "3", ok, f"{hits}/20 exact active sets, {elapsed:.1f}s")

    @staticmethod
    def _median_curvature(model, data, pushes):
        xs = np.unique(data[: pushes - 1, 0])
        _, vals = model.component_curve(1, 0, points=xs)
        d1 = np.diff(vals) / np.diff(xs)
        dd = np.diff(d1) / (xs[2:] - xs[:-2])
        dd = dd[np.isfinite(dd)]
        return float(np.median(dd))

    def test_4_regime_shift_tracking(self, capsys):
        """With forgetting weights (past multiplier 0.99), the lag-1
        component bends upward just before the mid-stream law change and
        downward after the new law settles in."""
        start = time.perf_counter()
        cfg = FitConfig(schedule=WeightSchedule(kind="constant", c=0.01))
        hits = 0
        for seed in range(20):
            data = experiment_shift(1500, seed, change_point=500)
            model = StreamModel(2, 1, cfg)
            for row in data[:491]:
                model.push(row)
            before = self._median_curvature(model, data, 491)
            for row in data[491:1000]:
                model.push(row)
            after = self._median_curvature(model, data, 1000)
            hits += before > 0 and after < 0
        elapsed = time.perf_counter() - start
        ok = hits >= 17 and elapsed < 180
        _report(
            capsys, "4", ok,
            f"{hits}/20 correct curvature signs, {elapsed:.1f}s",
        )

    def test_5_network_graph_recovery(self, capsys):
        """Nine-coordinate network stream, all targets fitted with the
        refinement stage: the extracted edge set misses nothing and adds
        at most one edge in at least 15 of 20 seeds.

        The x2..x5 feedback loop composes two squarings, so some seeds
        have no finite trajectory at this length (values overflow float64
        mid-stream); those realizations cannot form recovery instances and
        the scan takes the first 20 seeds whose data is finite."""
        start = time.perf_counter()
        seeds = []
        scanned = 0
        with np.errstate(over="ignore", invalid="ignore"):
            while len(seeds) < 20:
                if np.isfinite(experiment_network(3000, scanned)).all():
                    seeds.append(scanned)
                scanned += 1
        truth = set(TRUE_NETWORK_EDGES)
        hits = 0
        for seed in seeds:
            data = experiment_network(3000, seed)
            model = StreamModel(9, list(range(9)), FitConfig(lag=2, step2=True))
            _push_all(model, data)
            got = set(model.graph().edge_pairs())
            hits += len(got - truth) <= 1 and not (truth - got)
        elapsed = time.perf_counter() - start
        ok = hits >= 15 and elapsed < 300
        _report(
            capsys, "5", ok,
            f"{hits}/20 graphs within one extra edge (seeds 0..{scanned - 1}, "
            f"{scanned - 20} overflowed skipped), {elapsed:.1f}s",
        )

    def test_6_refinement_rejects_planted_noise(self, capsys):
        """Backward elimination on the true pair plus three pure-noise
        covariates keeps exactly the true pair."""
        start = time.perf_counter()
        hits = 0
        t1 = 1000
        for seed in range(20):
            data = experiment_bivariate(2000, seed)
            noise = DeterministicRng(seed + 10_000).normals(3 * 2000).reshape(2000, 3)
            rows = np.arange(t1, 2000)
            covs = np.column_stack(
                [data[rows - 1, 0], data[rows - 7, 0], noise[rows]]
            )
            ys = data[rows, 1]
            result = backward_select(ys, covs, [0, 1, 2, 3, 4], t1)
            hits += result.selected == [0, 1]
        elapsed = time.perf_counter() - start
        ok = hits >= 18 and elapsed < 120
        _report(
            capsys, "6", ok,
            f"{hits}/20 exact selections, {elapsed:.1f}s",
        )


class TestScaling:
    def test_7_streaming_cost_is_linear(self, capsys):
        """Doubling the stream roughly doubles streaming CPU time (ratio
        in [1.5, 2.6]) while the rerun-from-scratch baseline grows at
        least 30% faster.  Absolute seconds are machine-specific and not
        asserted."""
        start = time.perf_counter()
        cfg = FitConfig()
        ratios = {}
        for method in ("streaming", "rerun_batch"):
            rows = scaling_harness(
                (1000, 2000), repeats=3, method=method, seed=7, config=cfg
            )
            ratios[method] = (
                rows[1]["cpu_mean_seconds"] / rows[0]["cpu_mean_seconds"]
            )
        elapsed = time.perf_counter() - start
        ok = (
            1.5 <= ratios["streaming"] <= 2.6
            and ratios["rerun_batch"] >= 1.3 * ratios["streaming"]
            and elapsed < 600
        )
        _report(
            capsys, "7", ok,
            f"streaming x{ratios['streaming']:.2f}, rerun-batch "
            f"x{ratios['rerun_batch']:.2f} per doubling, {elapsed:.1f}s",
        )


class TestProperties:
    def test_8a_partition_of_unity(self, capsys):
        rng = np.random.default_rng(3)
        worst = 0.0
        for degree, v in ((1, 5), (2, 8), (3, 11)):
            basis = make_knots(rng.standard_normal(500), v, degree)
            lo, hi = basis.domain_lo, basis.domain_hi
            pts = rng.uniform(lo - 1.0, hi + 1.0, 10_000)
            for x in pts:
                worst = max(worst, abs(basis.eval(float(x)).sum() - 1.0))
        ok = worst <= 1e-12
        _report(capsys, "8a", ok, f"max |sum - 1| = {worst:.2e} over 3x10^4 points")

    def test_8b_weight_closed_forms(self, capsys):
        worst = 0.0
        schedules = [
            WeightSchedule(),
            WeightSchedule(kind="constant", c=0.01),
            WeightSchedule(kind="constant", c=0.1),
            WeightSchedule(kind="constant", c=0.3),
        ]
        for sched in schedules:
            for T in (1, 2, 17, 100, 1000):
                weights = np.zeros(T)
                for t in range(1, T + 1):
                    g = sched.gamma(t)
                    weights[: t - 1] *= 1.0 - g
                    weights[t - 1] = g
                closed = weights_closed_form(sched, T)
                worst = max(worst, float(np.max(np.abs(weights - closed))))
        ok = worst <= 1e-12
        _report(capsys, "8b", ok, f"max recursion/closed-form gap {worst:.2e}")

    def test_8c_update_map_nonexpansive(self, capsys):
        """The per-pass map (gradient step then block shrinkage) never
        expands distances when tau^2 lambda_max <= 1, for zero, moderate,
        and saturating penalties."""
        rng = np.random.default_rng(8)
        g, v = 4, 3
        n = 1 + g * v
        m = rng.standard_normal((n, 2 * n))
        A = m @ m.T / (2 * n)
        B = rng.standard_normal(n)
        tau2 = 1.0 / float(np.linalg.eigvalsh(A).max())
        worst = -np.inf
        for lam in (0.0, 0.3, 1e6):
            thr = lam * tau2
            for _ in range(3334):
                b1 = rng.standard_normal(n) * 3
                b2 = rng.standard_normal(n) * 3
                f1 = group_soft_threshold(b1 - tau2 * (A @ b1 - B), thr, v)
                f2 = group_soft_threshold(b2 - tau2 * (A @ b2 - B), thr, v)
                gap = float(
                    np.linalg.norm(f1 - f2)
                    - np.linalg.norm(b1 - b2) * (1 + 1e-12)
                )
                worst = max(worst, gap)
        ok = worst <= 0.0
        _report(
            capsys, "8c", ok,
            f"max expansion {worst:+.2e} over 10002 pairs, 3 penalty regimes",
        )

    def test_8d_objective_descends(self, capsys):
        """Each EM pass weakly decreases the penalized objective when the
        step condition holds."""
        rng = np.random.default_rng(15)
        worst = -np.inf
        for _ in range(100):
            g = int(rng.integers(1, 5))
            v = int(rng.integers(2, 5))
            n = 1 + g * v
            m = rng.standard_normal((n, 2 * n))
            A = m @ m.T / (2 * n)
            B = rng.standard_normal(n)
            stats = _inject(A, B)
            tau = 1.0 / np.sqrt(float(np.linalg.eigvalsh(A).max()))
            body = B[1:].reshape(g, v)
            lam = 0.1 * float(np.max(np.sqrt(np.einsum("ij,ij->i", body, body))))
            coef = Coefficients(vec=rng.standard_normal(n), v=v)
            prev = quadratic_objective(A, B, lam, coef.vec, v)
            for _ in range(30):
                coef, _, _ = em_iterate(
                    stats, coef,
                    EmSettings(tau=tau, lam=lam, max_iters=1, rel_tol=0.0),
                )
                cur = quadratic_objective(A, B, lam, coef.vec, v)
                worst = max(worst, (cur - prev) / max(abs(prev), 1e-12))
                prev = cur
        ok = worst <= 1e-12
        _report(
            capsys, "8d", ok,
            f"max per-pass objective increase {worst:+.2e} (100 instances)",
        )

    def test_8e_prequential_instrumentation(self, capsys):
        """Predictions are made strictly before a sample is absorbed: two
        streams differing in one target value predict identically through
        the perturbed step and diverge only afterwards."""
        data = experiment_bivariate(200, 13)
        other = data.copy()
        k = 150
        other[k, 1] += 4.0
        cfg = FitConfig(lag=2, basis_size=4, warmup=30)
        recs_a = _push_all(StreamModel(2, 1, cfg), data)
        recs_b = _push_all(StreamModel(2, 1, cfg), other)
        same_until = all(
            ra.yhat == rb.yhat
            for ra, rb in zip(recs_a, recs_b)
            if ra.t <= k + 1
        )
        diverges = any(
            ra.yhat != rb.yhat for ra, rb in zip(recs_a, recs_b)
        )
        ok = same_until and diverges
        _report(
            capsys, "8e", ok,
            f"identical through t={k + 1}: {same_until}, later divergence: "
            f"{diverges}",
        )

    def test_8f_byte_level_reproducibility(self, capsys, tmp_path):
        """Identical inputs and options reproduce every output file
        byte-for-byte: generated series, fit reports, and snapshots."""
        pairs = []
        for tag in ("a", "b"):
            src = tmp_path / f"series_{tag}.csv"
            rc = cli.main([
                "gen", "--experiment", "1", "--length", "150",
                "--seed", "3", "--out", str(src),
            ])
            assert rc == 0
            outdir = tmp_path / f"run_{tag}"
            snap = tmp_path / f"snap_{tag}.npz"
            rc = cli.main([
                "fit", "--input", str(src), "--outdir", str(outdir),
                "--target", "2", "--lag", "2", "--basis-size", "4",
                "--warmup", "30", "--save-snapshot", str(snap),
            ])
            assert rc == 0
            pairs.append(
                [src.read_bytes(), snap.read_bytes()]
                + [
                    (outdir / name).read_bytes()
                    for name in ("errors.csv", "components.csv", "tuning.csv")
                ]
            )
        ok = pairs[0] == pairs[1]
        _report(
            capsys, "8f", ok,
            "series, snapshot and all three reports byte-identical"
            if ok else "byte mismatch between identical runs",
        )


class TestCliShapes:
    def test_cli_runs_on_reference_shaped_inputs(self, capsys, tmp_path):
        """The command line accepts six-column and one-column CSV streams
        end to end."""
        start = time.perf_counter()
        six = experiment_network(260, 0)[:, :6]
        six_path = tmp_path / "six.csv"
        six_path.write_text(
            "x1,x2,x3,x4,x5,x6\n"
            + "\n".join(
                ",".join(format(v, ".12g") for v in row) for row in six
            )
            + "\n"
        )
        rc_six = cli.main([
            "fit", "--input", str(six_path),
            "--outdir", str(tmp_path / "six_out"), "--all-targets",
            "--lag", "2", "--basis-size", "5", "--warmup", "40",
        ])

        rng = DeterministicRng(4)
        eps = rng.normals(300)
        ys = np.zeros(300)
        for t in range(4, 300):
            ys[t] = 0.6 * ys[t - 1] - 0.25 * ys[t - 4] + 0.3 * eps[t]
        one_path = tmp_path / "one.csv"
        one_path.write_text(
            "y\n" + "\n".join(format(v, ".12g") for v in ys) + "\n"
        )
        rc_one = cli.main([
            "fit", "--input", str(one_path),
            "--outdir", str(tmp_path / "one_out"), "--target", "1",
            "--lag", "4", "--basis-size", "5", "--warmup", "50",
        ])
        elapsed = time.perf_counter() - start
        ok = (
            rc_six == 0
            and rc_one == 0
            and (tmp_path / "six_out" / "errors.csv").exists()
            and (tmp_path / "one_out" / "errors.csv").exists()
        )
        _report(
            capsys, "CLI", ok,
            f"six-column rc={rc_six}, one-column rc={rc_one}, {elapsed:.1f}s",
        )
