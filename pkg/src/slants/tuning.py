"""Self-tuning machinery: streaming weight schedules, the three-channel
penalty search, and the lazily shrinking innovation scale.

Weight schedules map the step index t to the update gain gamma_t.  The
harmonic schedule gamma_t = 1/t makes the recursive statistics equal flat
batch averages; a constant gamma_t = c yields exponential forgetting with
weights w_{T,t} = c (1-c)^(T-t) (1-c is the forgetting factor).

The penalty search runs three channels at lambda/delta, lambda and
lambda*delta.  Channel errors accumulate in windows of W steps; when the
windows fill, the channel with the smallest weighted error (weights nu^2,
nu, 1, so ties favor the larger penalty) becomes the new center and the
windows reset.  Under the harmonic schedule the spread obeys
delta_t = 1 + (delta_1 - 1)/t exactly.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class WeightSchedule:
    """Step-size rule: kind "harmonic" (gamma_t = 1/t) or "constant"
    (gamma_t = c with 0 < c < 1)."""

    kind: str = "harmonic"
    c: float = None

    def __post_init__(self):
        if self.kind not in ("harmonic", "constant"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "constant":
            if self.c is None or not 0.0 < self.c < 1.0:
                raise ValueError("constant schedule needs 0 < c < 1")

    def gamma(self, t):
        """Gain for step t (t starts at 1)."""
        if t < 1:
            raise ValueError("t starts at 1")
        if self.kind == "harmonic":
            return 1.0 / t
        return self.c


def weights_closed_form(schedule, T):
    """Effective per-sample weights w_{T,t} for t = 1..T in closed form.

    Harmonic: every weight equals 1/T.  Constant c: w_{T,t} = c(1-c)^(T-t).
    """
    if T < 1:
        raise ValueError("T must be positive")
    if schedule.kind == "harmonic":
        return np.full(T, 1.0 / T)
    c = schedule.c
    return c * (1.0 - c) ** (T - np.arange(1, T + 1, dtype=float))


class InnovationScale:
    """Innovation scale tau with lazy halving on EM divergence.

    Initialized from warm-up statistics as guess_scale/sqrt(lambda_max(A));
    each divergence signal halves tau.  Collapse below the floor raises
    RuntimeError("innovation parameter collapsed").
    """

    def __init__(self, tau, shrink=0.5, floor=1e-12):
        if tau <= 0:
            raise ValueError("tau must be positive")
        self.tau = float(tau)
        self.shrink = float(shrink)
        self.floor = float(floor)

    def on_divergence(self):
        """Shrink tau once; returns the new value."""
        self.tau *= self.shrink
        if self.tau < self.floor:
            raise RuntimeError("innovation parameter collapsed")
        return self.tau


class PenaltySearch:
    """Three-channel penalty tracker around a moving center.

    step() consumes one squared prediction error per channel and returns
    the winning channel index (0 low, 1 center, 2 high) when a comparison
    fires, else None.  The caller is responsible for re-seeding its
    per-channel coefficient replicas from the winner.
    """

    def __init__(self, lam, delta=1.5, nu=1.05, window=20,
                 schedule=None, mode="tumbling"):
        if lam <= 0:
            raise ValueError("initial penalty must be positive")
        if delta <= 1.0:
            raise ValueError("delta must exceed 1")
        if nu < 1.0:
            raise ValueError("nu must be at least 1")
        if window < 1:
            raise ValueError("window must be positive")
        if mode not in ("tumbling", "sliding"):
            raise ValueError(f"unknown window mode {mode!r}")
        self.center = float(lam)
        self.delta0 = float(delta)
        self.delta = float(delta)
        self.nu = float(nu)
        self.window = int(window)
        self.mode = mode
        self.schedule = schedule if schedule is not None else WeightSchedule()
        self.errors = [[], [], []]

    def lambdas(self):
        """Current channel penalties (center/delta, center, center*delta)."""
        return (self.center / self.delta, self.center, self.center * self.delta)

    def window_means(self):
        """Mean accumulated error per channel (nan while a window is empty)."""
        return tuple(
            sum(e) / len(e) if e else float("nan") for e in self.errors
        )

    def _update_delta(self, t):
        if self.schedule.kind == "harmonic":
            self.delta = 1.0 + (self.delta0 - 1.0) / t

    def step(self, errs, t):
        """Absorb one error triple observed at step t; maybe recenter."""
        if len(errs) != 3:
            raise ValueError("expected one error per channel")
        self._update_delta(t)
        for acc, e in zip(self.errors, errs):
            acc.append(float(e))
        if self.mode == "sliding":
            for acc in self.errors:
                while len(acc) > self.window:
                    acc.pop(0)
        if len(self.errors[0]) < self.window:
            return None
        means = self.window_means()
        weighted = (
            self.nu * self.nu * means[0],
            self.nu * means[1],
            means[2],
        )
        winner = 2
        if weighted[1] < weighted[winner]:
            winner = 1
        if weighted[0] < weighted[winner]:
            winner = 0
        self.center = (self.center / self.delta, self.center,
                       self.center * self.delta)[winner]
        if self.mode == "tumbling":
            self.errors = [[], [], []]
        return winner
