"""Numba kernel backend.

Scalar-loop twins of :mod:`mpsts.kernels.reference`, compiled with
``@njit(cache=True)``.  fastmath stays off so the arithmetic order matches
the vectorized backend element for element.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

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

NAME = "jit"

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = 2.0 ** -53

_C1, _C2, _C3, _C4, _C5, _C6, _C7, _C8 = LANCZOS


@njit(cache=True)
def _lgamma_core(z: float) -> float:
    series = (
        LANCZOS_C0
        + _C1 / z
        + _C2 / (z + 1.0)
        + _C3 / (z + 2.0)
        + _C4 / (z + 3.0)
        + _C5 / (z + 4.0)
        + _C6 / (z + 5.0)
        + _C7 / (z + 6.0)
        + _C8 / (z + 7.0)
    )
    t = z + LANCZOS_G_HALF
    return LN_SQRT_2PI + (z - 0.5) * math.log(t) - t + math.log(series)


@njit(cache=True)
def _lgamma(x: float) -> float:
    if x < 0.5:
        return _lgamma_core(x + 1.0) - math.log(x)
    return _lgamma_core(x)


def lgamma(x):
    """Scalar/array Lanczos log-gamma (array path loops over a copy)."""
    if np.ndim(x) == 0:
        return _lgamma(float(x))
    arr = np.asarray(x, dtype=np.float64)
    out = np.empty_like(arr)
    flat_in = arr.ravel()
    flat_out = out.ravel()
    _lgamma_many(flat_in, flat_out)
    return out


@njit(cache=True)
def _lgamma_many(x, out):
    for i in range(x.shape[0]):
        out[i] = _lgamma(x[i])


@njit(cache=True)
def pmf_table(mu0: float, m: float, M: float, K: int, nmax: int) -> np.ndarray:
    out = np.empty(nmax + 1, dtype=np.float64)
    const = (
        _lgamma(M) - _lgamma(M - m) + _lgamma(M + K - m) - _lgamma(M + K) - _lgamma(m)
    )
    lmu0 = math.log(mu0)
    lmu1 = math.log1p(mu0)
    x = 1.0 / (1.0 + mu0)
    c = m - M - K + 1.0
    for N in range(nmax + 1):
        nf = float(N)
        lp = nf * lmu0 - (nf + m) * lmu1 + _lgamma(nf + m) - _lgamma(nf + 1.0) + const
        b = nf + m
        hyp = 1.0
        term = 1.0
        for j in range(K):
            term = term * ((j - K) * (b + j)) / ((c + j) * (j + 1.0)) * x
            hyp = hyp + term
        out[N] = math.exp(lp) * hyp
    return out


@njit(cache=True)
def compound_table(mu0: float, a: float, nmax: int) -> np.ndarray:
    out = np.empty(nmax + 1, dtype=np.float64)
    lmu0 = math.log(mu0)
    lmu1 = math.log1p(mu0)
    lga = _lgamma(a)
    for N in range(nmax + 1):
        nf = float(N)
        lp = _lgamma(a + nf) - lga - _lgamma(nf + 1.0) + nf * lmu0 - (nf + a) * lmu1
        out[N] = math.exp(lp)
    return out


@njit(cache=True)
def loglike_photocount_scan(mu0s, ms, Ms, K, data_n, data_d, dark_rate):
    B = mu0s.shape[0]
    nmax = int(data_n[data_n.shape[0] - 1])
    ncells = data_n.shape[0]
    prob = np.empty(nmax + 1, dtype=np.float64)
    dark = np.empty(nmax + 1, dtype=np.float64)
    lg_n1 = np.empty(nmax + 1, dtype=np.float64)
    for N in range(nmax + 1):
        lg_n1[N] = _lgamma(float(N) + 1.0)
    ll = np.empty(B, dtype=np.float64)
    floors = np.zeros(B, dtype=np.int64)
    for node in range(B):
        mu0 = mu0s[node]
        m = ms[node]
        Mv = Ms[node]
        const = (
            _lgamma(Mv)
            - _lgamma(Mv - m)
            + _lgamma(Mv + K - m)
            - _lgamma(Mv + K)
            - _lgamma(m)
        )
        lmu0 = math.log(mu0)
        lmu1 = math.log1p(mu0)
        x = 1.0 / (1.0 + mu0)
        c = m - Mv - K + 1.0
        for N in range(nmax + 1):
            nf = float(N)
            lp = nf * lmu0 - (nf + m) * lmu1 + _lgamma(nf + m) - lg_n1[N] + const
            b = nf + m
            hyp = 1.0
            term = 1.0
            for j in range(K):
                term = term * ((j - K) * (b + j)) / ((c + j) * (j + 1.0)) * x
                hyp = hyp + term
            prob[N] = math.exp(lp) * hyp
        use = prob
        if dark_rate > 0.0:
            lam = dark_rate * m
            w = math.exp(-lam)
            for N in range(nmax + 1):
                dark[N] = w * prob[N]
            for j in range(1, DARK_TERMS + 1):
                w = w * lam / j
                for N in range(j, nmax + 1):
                    dark[N] += w * prob[N - j]
            use = dark
        acc = 0.0
        hit = 0
        for cell in range(ncells):
            p = use[data_n[cell]]
            if p < LIKELIHOOD_FLOOR:
                hit += 1
                p = LIKELIHOOD_FLOOR
            acc = acc + data_d[cell] * math.log(p)
        ll[node] = acc
        floors[node] = hit
    return ll, floors


@njit(cache=True)
def hermite_table(nmax: int, q: np.ndarray) -> np.ndarray:
    S = q.shape[0]
    out = np.empty((nmax + 1, S), dtype=np.float64)
    for s in range(S):
        out[0, s] = INV_PI_QUARTER * math.exp(-0.5 * q[s] * q[s])
    if nmax >= 1:
        for s in range(S):
            out[1, s] = SQRT2 * q[s] * out[0, s]
    for n in range(1, nmax):
        ca = math.sqrt(2.0 / (n + 1.0))
        cb = math.sqrt(n / (n + 1.0))
        for s in range(S):
            out[n + 1, s] = q[s] * ca * out[n, s] - cb * out[n - 1, s]
    return out


# --- counter RNG -------------------------------------------------------------


@njit(cache=True)
def _final(z):
    z = z + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _draw(key, counter):
    z = key + (counter + np.uint64(1)) * _GOLDEN
    return float(_final(z) >> np.uint64(11)) * _U53


def trial_keys(seed: int, stream_id: int, n: int) -> np.ndarray:
    base = np.uint64(derive_key(seed, stream_id))
    out = np.empty(n, dtype=np.uint64)
    _trial_keys_fill(base, out)
    return out


@njit(cache=True)
def _trial_keys_fill(base, out):
    for t in range(out.shape[0]):
        out[t] = _final(base ^ _final(np.uint64(t)))


def sample_counts(cdf: np.ndarray, key: int, counter0: int, n: int) -> np.ndarray:
    return _sample_counts(cdf, np.uint64(key), np.uint64(counter0), n)


@njit(cache=True)
def _sample_counts(cdf, key, counter0, n):
    L = cdf.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        u = _draw(key, counter0 + np.uint64(i))
        lo = 0
        hi = L
        while lo < hi:
            mid = (lo + hi) >> 1
            if u < cdf[mid]:
                hi = mid
            else:
                lo = mid + 1
        if lo > L - 1:
            lo = L - 1
        out[i] = lo
    return out


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
    base = np.uint64(derive_key(seed, stream_id))
    return _subtraction_oracle(base, n, m, M, K, geom_cdf, accept_p)


@njit(cache=True)
def _subtraction_oracle(base, n, m, M, K, geom_cdf, accept_p):
    n_cap = accept_p.shape[0] - 1
    L = geom_cdf.shape[0]
    out = np.empty(n, dtype=np.int64)
    occ = np.empty(M, dtype=np.int64)
    attempts = 0
    for t in range(n):
        key = _final(base ^ _final(np.uint64(t)))
        c = np.uint64(0)
        while True:
            total = 0
            for mode in range(M):
                u = _draw(key, c)
                c += np.uint64(1)
                i = 0
                while i < L and u >= geom_cdf[i]:
                    i += 1
                occ[mode] = i
                total += i
            u = _draw(key, c)
            c += np.uint64(1)
            attempts += 1
            ti = total
            if ti > n_cap:
                ti = n_cap
            if u < accept_p[ti]:
                tot = float(total)
                for _ in range(K):
                    uu = _draw(key, c)
                    c += np.uint64(1)
                    target = uu * tot
                    cum = 0.0
                    pick = M - 1
                    for i2 in range(M):
                        cum += occ[i2]
                        if target < cum:
                            pick = i2
                            break
                    occ[pick] -= 1
                    tot -= 1.0
                s = 0
                for i2 in range(m):
                    s += occ[i2]
                out[t] = s
                break
    return out, attempts
