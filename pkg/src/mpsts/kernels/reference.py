"""Pure-numpy kernel backend.

Vectorized twins of the numba kernels in :mod:`mpsts.kernels.jit`.  Each
function evaluates the same arithmetic in the same per-element order as the
jit version, so the two backends agree to floating-point noise (bit-exact
for the integer RNG machinery, a few ulp for transcendental-heavy paths
where numpy's SIMD exp/log may round differently from libm).
"""

from __future__ import annotations

import numpy as np

from ._shared import (
    DARK_TERMS,
    INV_PI_QUARTER,
    LANCZOS,
    LANCZOS_C0,
    LANCZOS_G_HALF,
    LIKELIHOOD_FLOOR,
    LN_SQRT_2PI,
    SQRT2,
)
from ..rng import derive_key

NAME = "reference"

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = 2.0 ** -53


def lgamma(x):
    """Lanczos log-gamma for positive arguments; accepts scalars or arrays."""
    x = np.asarray(x, dtype=np.float64)
    small = x < 0.5
    z = np.where(small, x + 1.0, x)
    series = (
        LANCZOS_C0
        + LANCZOS[0] / z
        + LANCZOS[1] / (z + 1.0)
        + LANCZOS[2] / (z + 2.0)
        + LANCZOS[3] / (z + 3.0)
        + LANCZOS[4] / (z + 4.0)
        + LANCZOS[5] / (z + 5.0)
        + LANCZOS[6] / (z + 6.0)
        + LANCZOS[7] / (z + 7.0)
    )
    t = z + LANCZOS_G_HALF
    out = LN_SQRT_2PI + (z - 0.5) * np.log(t) - t + np.log(series)
    out = out - np.where(small, np.log(np.where(small, x, 1.0)), 0.0)
    return out if out.ndim else float(out)


def pmf_table(mu0: float, m: float, M: float, K: int, nmax: int) -> np.ndarray:
    """Photocount probabilities P(N) for N = 0..nmax, closed form.

    Requires M - m large enough to stay off the Gamma(M-m) pole; callers
    enforce the safe band.  The hypergeometric factor has strictly positive
    terms here (its denominator Pochhammer stays negative), so it is summed
    in plain order without compensation.
    """
    n = np.arange(nmax + 1, dtype=np.float64)
    const = (
        lgamma(M) - lgamma(M - m) + lgamma(M + K - m) - lgamma(M + K) - lgamma(m)
    )
    lp = n * np.log(mu0) - (n + m) * np.log1p(mu0) + lgamma(n + m) - lgamma(n + 1.0) + const
    x = 1.0 / (1.0 + mu0)
    b = n + m
    c = m - M - K + 1.0
    hyp = np.ones_like(n)
    term = np.ones_like(n)
    for j in range(K):
        term = term * ((j - K) * (b + j)) / ((c + j) * (j + 1.0)) * x
        hyp = hyp + term
    return np.exp(lp) * hyp


def compound_table(mu0: float, a: float, nmax: int) -> np.ndarray:
    """Compound-Poisson (negative binomial) probabilities for N = 0..nmax."""
    n = np.arange(nmax + 1, dtype=np.float64)
    lp = (
        lgamma(a + n)
        - lgamma(a)
        - lgamma(n + 1.0)
        + n * np.log(mu0)
        - (n + a) * np.log1p(mu0)
    )
    return np.exp(lp)


def loglike_photocount_scan(
    mu0s: np.ndarray,
    ms: np.ndarray,
    Ms: np.ndarray,
    K: int,
    data_n: np.ndarray,
    data_d: np.ndarray,
    dark_rate: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Photocount log-likelihood over a batch of parameter nodes.

    ``data_n``/``data_d`` are ascending photocount values and their (possibly
    non-integer) event counts.  Returns per-node log-likelihoods and the
    number of data cells that hit the density floor.
    """
    mu0s = np.asarray(mu0s, dtype=np.float64)
    ms = np.asarray(ms, dtype=np.float64)
    Ms = np.asarray(Ms, dtype=np.float64)
    nmax = int(data_n[-1])
    n = np.arange(nmax + 1, dtype=np.float64)

    mcol = ms[:, None]
    const = (
        lgamma(Ms) - lgamma(Ms - ms) + lgamma(Ms + K - ms) - lgamma(Ms + K) - lgamma(ms)
    )[:, None]
    lp = (
        n * np.log(mu0s)[:, None]
        - (n + mcol) * np.log1p(mu0s)[:, None]
        + lgamma(n + mcol)
        - lgamma(n + 1.0)
        + const
    )
    x = (1.0 / (1.0 + mu0s))[:, None]
    b = n + mcol
    c = (ms - Ms - K + 1.0)[:, None]
    hyp = np.ones_like(lp)
    term = np.ones_like(lp)
    for j in range(K):
        term = term * ((j - K) * (b + j)) / ((c + j) * (j + 1.0)) * x
        hyp = hyp + term
    prob = np.exp(lp) * hyp

    if dark_rate > 0.0:
        lam = dark_rate * ms
        w = np.exp(-lam)
        dark = w[:, None] * prob
        for j in range(1, DARK_TERMS + 1):
            w = w * lam / j
            dark[:, j:] += w[:, None] * prob[:, :-j]
        prob = dark

    ll = np.zeros(mu0s.shape[0], dtype=np.float64)
    floors = np.zeros(mu0s.shape[0], dtype=np.int64)
    for cell in range(data_n.shape[0]):
        p = prob[:, int(data_n[cell])]
        low = p < LIKELIHOOD_FLOOR
        floors += low
        ll = ll + data_d[cell] * np.log(np.where(low, LIKELIHOOD_FLOOR, p))
    return ll, floors


def hermite_table(nmax: int, q: np.ndarray) -> np.ndarray:
    """Oscillator eigenfunctions phi_N(q), shape (nmax+1, len(q)).

    Normalized-function recurrence; stays finite for nmax <= 512, |q| <= 60.
    """
    q = np.asarray(q, dtype=np.float64)
    out = np.empty((nmax + 1, q.shape[0]), dtype=np.float64)
    out[0] = INV_PI_QUARTER * np.exp(-0.5 * q * q)
    if nmax >= 1:
        out[1] = SQRT2 * q * out[0]
    for n in range(1, nmax):
        out[n + 1] = q * np.sqrt(2.0 / (n + 1.0)) * out[n] - np.sqrt(
            n / (n + 1.0)
        ) * out[n - 1]
    return out


# --- counter RNG (vectorized twins of the jit scalar helpers) ----------------


def _finalize(z: np.ndarray) -> np.ndarray:
    z = (z + _GOLDEN) & _MASK
    z = ((z ^ (z >> np.uint64(30))) * _MIX1) & _MASK
    z = ((z ^ (z >> np.uint64(27))) * _MIX2) & _MASK
    return z ^ (z >> np.uint64(31))


def _draws(keys, counters) -> np.ndarray:
    z = (np.uint64(0) + keys + (counters + np.uint64(1)) * _GOLDEN) & _MASK
    return (_finalize(z) >> np.uint64(11)).astype(np.float64) * _U53


def trial_keys(seed: int, stream_id: int, n: int) -> np.ndarray:
    """Per-trial substream keys derive_key(seed, stream_id, t), vectorized."""
    base = np.uint64(derive_key(seed, stream_id))
    ts = np.arange(n, dtype=np.uint64)
    return _finalize(base ^ _finalize(ts))


def sample_counts(cdf: np.ndarray, key: int, counter0: int, n: int) -> np.ndarray:
    """n inverse-CDF draws from a discrete cdf; tail mass maps to the last bin."""
    counters = np.uint64(counter0) + np.arange(n, dtype=np.uint64)
    u = _draws(np.uint64(key), counters)
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, cdf.shape[0] - 1).astype(np.int64)


def subtraction_oracle(
    seed: int,
    stream_id: int,
    n: int,
    m: int,
    M: int,
    K: int,
    geom_cdf: np.ndarray,
    accept_p: np.ndarray,
) -> tuple[np.ndarray, int]:
    """Sequential-subtraction Monte Carlo, wave-vectorized over open trials.

    Consumes the identical per-trial counter sequence as the jit kernel:
    M geometric draws + 1 acceptance draw per attempt, then K mode-pick
    draws once accepted.  Returns per-trial observed counts and the total
    attempt count.
    """
    n_cap = accept_p.shape[0] - 1
    keys = trial_keys(seed, stream_id, n)
    counters = np.zeros(n, dtype=np.uint64)
    out = np.empty(n, dtype=np.int64)
    pending = np.arange(n)
    attempts = 0
    while pending.size:
        kk = keys[pending]
        cc = counters[pending]
        occ = np.empty((pending.size, M), dtype=np.int64)
        for mode in range(M):
            u = _draws(kk, cc + np.uint64(mode))
            occ[:, mode] = np.searchsorted(geom_cdf, u, side="right")
        total = occ.sum(axis=1)
        u_acc = _draws(kk, cc + np.uint64(M))
        counters[pending] += np.uint64(M + 1)
        attempts += pending.size
        acc = u_acc < accept_p[np.minimum(total, n_cap)]
        if acc.any():
            rows = pending[acc]
            occ_a = occ[acc]
            tot = total[acc].astype(np.float64)
            for _ in range(K):
                u = _draws(keys[rows], counters[rows])
                counters[rows] += np.uint64(1)
                target = u * tot
                cum = np.cumsum(occ_a, axis=1).astype(np.float64)
                idx = (cum <= target[:, None]).sum(axis=1)
                occ_a[np.arange(rows.size), idx] -= 1
                tot -= 1.0
            out[rows] = occ_a[:, :m].sum(axis=1)
        pending = pending[~acc]
    return out, attempts
