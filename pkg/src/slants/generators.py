"""Synthetic vector time series with a fully portable random stream.

Randomness comes from SplitMix64 (a fixed 64-bit mixing function applied
to seed + k * golden-ratio increments), so the k-th raw draw is a pure
function of (seed, k) on every platform.  Uniforms take the top 53 bits;
normal pairs come from the Box-Muller transform with the documented
ordering below.  No platform or library RNG is involved anywhere.

Draw ordering inside each generator is documented per function; two runs
with the same seed produce bit-identical series.
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = float(2.0**-53)


def _mix(z):
    """SplitMix64 finalizer on uint64 scalars or arrays (wraps mod 2^64)."""
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class DeterministicRng:
    """Counter-based SplitMix64 stream with Box-Muller normals.

    Raw draw k (k = 1, 2, ...) is mix(seed + k*golden).  uniform() maps a
    raw draw to [0, 1) via its top 53 bits.  Each normal pair consumes two
    consecutive raw draws (u1, u2): u1 uses the top 53 bits plus one (so
    u1 in (0, 1] and log u1 is finite), u2 the plain top 53 bits, and the
    pair is sqrt(-2 ln u1) * (cos, sin)(2 pi u2), emitted cos-first. One
    generated-but-unrequested normal is cached across calls.
    """

    def __init__(self, seed):
        self.seed = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
        self.counter = 0
        self._cached_normal = None

    def _raw(self, n):
        ks = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            return _mix(self.seed + ks * _GOLDEN)

    def uniforms(self, n):
        """n doubles in [0, 1)."""
        return (self._raw(n) >> np.uint64(11)).astype(float) * _U53

    def uniform(self):
        return float(self.uniforms(1)[0])

    def normals(self, n):
        """n standard normal draws (see class docstring for the stream)."""
        out = np.empty(n)
        start = 0
        if self._cached_normal is not None and n > 0:
            out[0] = self._cached_normal
            self._cached_normal = None
            start = 1
        need = n - start
        if need <= 0:
            return out
        pairs = (need + 1) // 2
        raw = self._raw(2 * pairs)
        u1 = ((raw[0::2] >> np.uint64(11)).astype(float) + 1.0) * _U53
        u2 = (raw[1::2] >> np.uint64(11)).astype(float) * _U53
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * np.pi * u2
        z = np.empty(2 * pairs)
        z[0::2] = radius * np.cos(angle)
        z[1::2] = radius * np.sin(angle)
        out[start:] = z[:need]
        if 2 * pairs > need:
            self._cached_normal = float(z[need])
        return out

    def normal(self):
        return float(self.normals(1)[0])


def experiment_bivariate(T, seed, noise_scale=0.2, x1_const=None):
    """Two-dimensional series: x1 white noise, x2 driven by x1 lags.

        x1_t = e1_t
        x2_t = 0.5 x1_{t-1}^2 - 0.8 x1_{t-7} + noise_scale * e2_t

    x2 is zero for t <= 7 (the largest lag in its equation).  Draw order:
    (e1_t, e2_t) per step, t = 1..T.  x1_const forces x1 to a constant
    (the innovations are still drawn, keeping the stream layout fixed).
    Returns an array of shape (T, 2).
    """
    if T < 1:
        raise ValueError("T must be positive")
    rng = DeterministicRng(seed)
    eps = rng.normals(2 * T).reshape(T, 2)
    x = np.zeros((T, 2))
    x[:, 0] = eps[:, 0] if x1_const is None else float(x1_const)
    for t in range(7, T):
        x[t, 1] = (
            0.5 * x[t - 1, 0] ** 2
            - 0.8 * x[t - 7, 0]
            + noise_scale * eps[t, 1]
        )
    return x


def experiment_shift(T, seed, change_point=500, noise_scale=0.2):
    """Bivariate series whose data-generating law switches mid-stream.

    Steps t <= change_point follow experiment_bivariate; afterwards x1
    becomes uniform on [-1, 1] and

        x2_t = -2 x1_{t-1}^2 + exp(x1_{t-7}) + noise_scale * e2_t.

    Draw order: (e1_t, e2_t) normals per pre-change step, then
    (u_t, e2_t) per post-change step (one uniform then one normal).
    """
    if T < 1:
        raise ValueError("T must be positive")
    rng = DeterministicRng(seed)
    x = np.zeros((T, 2))
    n_pre = min(change_point, T)
    eps = rng.normals(2 * n_pre).reshape(n_pre, 2)
    x[:n_pre, 0] = eps[:, 0]
    for t in range(7, n_pre):
        x[t, 1] = (
            0.5 * x[t - 1, 0] ** 2
            - 0.8 * x[t - 7, 0]
            + noise_scale * eps[t, 1]
        )
    for t in range(n_pre, T):
        x[t, 0] = 2.0 * rng.uniform() - 1.0
        x[t, 1] = (
            -2.0 * x[t - 1, 0] ** 2
            + np.exp(x[t - 7, 0])
            + noise_scale * rng.normal()
        )
    return x


def experiment_network(T, seed):
    """Nine-dimensional series with a sparse causal network.

        x1_t = e1_t
        x2_t = 0.6 x3_{t-1} + e2_t
        x3_t = 0.3 x4_{t-2}^2 + e3_t
        x4_t = 0.7 x5_{t-1} - 0.2 x5_{t-2} + e4_t
        x5_t = -0.2 x2_{t-1}^2 + e5_t
        x6_t = 0.5 x6_{t-2} + 1 + e6_t
        x7_t = 2 exp(-x7_{t-2}^2) + e7_t
        x8_t = 6 x7_{t-1} - 5 x9_{t-2} + e8_t
        x9_t = -x6_{t-1} + 0.9 x7_{t-2} + e9_t

    All innovations are unit normal.  Every coordinate is zero for t <= 2;
    draws are (e1_t, ..., e9_t) per step for all t = 1..T.
    Returns an array of shape (T, 9).
    """
    if T < 1:
        raise ValueError("T must be positive")
    rng = DeterministicRng(seed)
    eps = rng.normals(9 * T).reshape(T, 9)
    x = np.zeros((T, 9))
    for t in range(2, T):
        x[t, 0] = eps[t, 0]
        x[t, 1] = 0.6 * x[t - 1, 2] + eps[t, 1]
        x[t, 2] = 0.3 * x[t - 2, 3] ** 2 + eps[t, 2]
        x[t, 3] = 0.7 * x[t - 1, 4] - 0.2 * x[t - 2, 4] + eps[t, 3]
        x[t, 4] = -0.2 * x[t - 1, 1] ** 2 + eps[t, 4]
        x[t, 5] = 0.5 * x[t - 2, 5] + 1.0 + eps[t, 5]
        x[t, 6] = 2.0 * np.exp(-x[t - 2, 6] ** 2) + eps[t, 6]
        x[t, 7] = 6.0 * x[t - 1, 6] - 5.0 * x[t - 2, 8] + eps[t, 7]
        x[t, 8] = -x[t - 1, 5] + 0.9 * x[t - 2, 6] + eps[t, 8]
    return x


TRUE_NETWORK_EDGES = {
    # (source dim, target dim) 1-based, with the lags that carry signal
    (3, 2): (1,),
    (4, 3): (2,),
    (5, 4): (1, 2),
    (2, 5): (1,),
    (6, 6): (2,),
    (7, 7): (2,),
    (7, 8): (1,),
    (9, 8): (2,),
    (6, 9): (1,),
    (7, 9): (2,),
}


def generate(experiment, T, seed, **kwargs):
    """Dispatch by experiment id: "1"/"scaling" bivariate, "2" shift,
    "3" network."""
    key = str(experiment)
    if key in ("1", "scaling"):
        return experiment_bivariate(T, seed, **kwargs)
    if key == "2":
        return experiment_shift(T, seed, **kwargs)
    if key == "3":
        return experiment_network(T, seed, **kwargs)
    raise ValueError(f"unknown experiment {experiment!r}")
