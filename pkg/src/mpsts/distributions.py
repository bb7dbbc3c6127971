"""Probability models: photocount pmfs, generating function, dark-count
convolution, quadrature density, and the moment relation between the mean
count and the per-mode mean photon number.

Two independent routes exist for the photocount law of a K-photon-subtracted
M-mode thermal state observed through m modes: a closed form built on a
terminating hypergeometric factor (`mpsts_pmf`) and a mixture of
compound-Poisson laws weighted by a Polya distribution (`convolved_pmf`).
They must agree entry by entry; the test suite enforces this.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .specfun import DomainError, ln_gamma

EPS_POLE = 1e-6          # |M - m| below this: exact degeneracy, use a = M + K
POLE_BAND = 1e-3         # M - m inside (EPS_POLE, POLE_BAND): numerically unsafe
TAIL_TARGET = 1e-10      # default truncation policy for adaptive pmfs
N_MAX_QUAD = 512         # oscillator recurrence cap


class PoleBandError(ValueError):
    """M - m falls in the band where the closed form loses all accuracy."""


@dataclass(frozen=True)
class ModelParams:
    """State parameters: per-mode mean mu0, observed modes m of M total,
    K subtracted photons.  m and M are real-valued in the estimation grids
    and integer when fed to the samplers or the pipeline."""

    mu0: float
    m: float
    M: float
    K: int

    def __post_init__(self):
        if not (self.mu0 > 0):
            raise ValueError(f"mu0 must be > 0, got {self.mu0}")
        if not (0 < self.m <= self.M):
            raise ValueError(f"need 0 < m <= M, got m={self.m}, M={self.M}")
        if self.K < 0 or int(self.K) != self.K:
            raise ValueError(f"K must be a nonnegative integer, got {self.K}")
        object.__setattr__(self, "K", int(self.K))

    @property
    def mean_count(self) -> float:
        """Mean observed photocount mu0 * m * (1 + K/M)."""
        return self.mu0 * self.m * (1.0 + self.K / self.M)

    def integer_modes(self) -> tuple[int, int]:
        """(m, M) as exact integers; raises if they are not integral."""
        m, M = round(self.m), round(self.M)
        if abs(self.m - m) > 1e-9 or abs(self.M - M) > 1e-9:
            raise ValueError(f"integer m, M required, got m={self.m}, M={self.M}")
        return int(m), int(M)


@dataclass(frozen=True)
class Pmf:
    """Truncated photocount distribution on N = 0..n_max with its tail bound."""

    probabilities: np.ndarray
    tail_bound: float

    def __post_init__(self):
        object.__setattr__(
            self, "probabilities", np.asarray(self.probabilities, dtype=np.float64)
        )

    @property
    def n_max(self) -> int:
        return self.probabilities.shape[0] - 1

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.probabilities.shape[0])

    def mean(self) -> float:
        return float(np.sum(self.support * self.probabilities))

    def variance(self) -> float:
        mu = self.mean()
        return float(np.sum((self.support - mu) ** 2 * self.probabilities))

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.probabilities)


@dataclass(frozen=True)
class DarkCountConfig:
    """Poisson dark counts with mean mu_dc_per_mode per observed mode."""

    mu_dc_per_mode: float = 0.0015

    def __post_init__(self):
        if self.mu_dc_per_mode < 0:
            raise ValueError("mu_dc_per_mode must be >= 0")


class CountHistogram:
    """Observed (or expected) photocount data: N -> event count D(N).

    Counts may be non-integer: expected "data" n * P(N) is used when
    comparing sample-based and exact conditional distributions.
    """

    def __init__(self, counts: dict[int, float]):
        self.counts = {int(k): float(v) for k, v in counts.items() if v != 0}
        if any(v < 0 for v in self.counts.values()):
            raise ValueError("counts must be nonnegative")
        self.n = float(sum(self.counts.values()))

    @classmethod
    def from_values(cls, values: np.ndarray) -> "CountHistogram":
        values = np.asarray(values)
        uniq, cnt = np.unique(values, return_counts=True)
        return cls({int(u): int(c) for u, c in zip(uniq, cnt)})

    @classmethod
    def expected_from_pmf(cls, pmf: Pmf, n: float) -> "CountHistogram":
        return cls({int(i): n * p for i, p in enumerate(pmf.probabilities) if p > 0})

    def cells(self) -> tuple[np.ndarray, np.ndarray]:
        """Ascending count values and their event counts, as arrays."""
        ns = np.asarray(sorted(self.counts), dtype=np.int64)
        ds = np.asarray([self.counts[int(v)] for v in ns], dtype=np.float64)
        return ns, ds

    def mean(self) -> float:
        ns, ds = self.cells()
        return float(np.sum(ns * ds) / self.n)

    def variance(self) -> float:
        ns, ds = self.cells()
        mu = np.sum(ns * ds) / self.n
        return float(np.sum((ns - mu) ** 2 * ds) / self.n)

    def scaled(self, factor: float) -> "CountHistogram":
        return CountHistogram({k: v * factor for k, v in self.counts.items()})

    def max_count(self) -> int:
        return max(self.counts) if self.counts else 0

    def __eq__(self, other) -> bool:
        return isinstance(other, CountHistogram) and self.counts == other.counts

    def __repr__(self) -> str:
        return f"CountHistogram(n={self.n:g}, cells={len(self.counts)})"


def compound_poisson_pmf(N: int, mu0: float, a: float) -> float:
    """P(N) of the compound-Poisson (negative binomial) law with group
    parameter a; the full distribution has mean mu0 * a."""
    if N < 0:
        raise DomainError(f"N must be >= 0, got {N}")
    if mu0 <= 0 or a <= 0:
        raise DomainError(f"need mu0 > 0 and a > 0, got mu0={mu0}, a={a}")
    lp = (
        ln_gamma(a + N)
        - ln_gamma(a)
        + N * math.log(mu0)
        - ln_gamma(N + 1.0)
        - (N + a) * math.log1p(mu0)
    )
    return math.exp(lp)


def polya_pmf(k: int, m: int, M: int, K: int) -> float:
    """Probability that k of the K subtracted photons belong to the observed
    m-mode subsystem.  For m = M every subtraction is observed: delta_{k,K}.

    Arguments are integers, so the binomial ratio is evaluated in exact
    integer arithmetic (one rounding at the end)."""
    if k < 0 or k > K:
        raise DomainError(f"k must lie in 0..K={K}, got {k}")
    if m < 1 or M < m:
        raise DomainError(f"need integer 1 <= m <= M, got m={m}, M={M}")
    if m == M:
        return 1.0 if k == K else 0.0
    num = math.comb(m + k - 1, k) * math.comb(M - m + K - k - 1, K - k)
    return num / math.comb(M + K - 1, K)


def _finalize_adaptive(table: np.ndarray) -> tuple[np.ndarray, float] | None:
    csum = np.cumsum(table)
    hits = np.nonzero(csum >= 1.0 - TAIL_TARGET)[0]
    if hits.size == 0:
        return None
    cut = int(hits[0])
    return table[: cut + 1].copy(), float(max(0.0, 1.0 - csum[cut]))


def _adaptive_pmf(builder, start_nmax: int) -> Pmf:
    nmax = max(8, int(start_nmax))
    while True:
        table = builder(nmax)
        done = _finalize_adaptive(table)
        if done is not None:
            probs, tail = done
            return Pmf(probs, tail)
        if nmax > 2_000_000:
            raise RuntimeError("pmf truncation did not converge")
        nmax *= 2


def _heuristic_start(params: ModelParams) -> int:
    mean = params.mean_count
    spread = math.sqrt(mean * (1.0 + params.mu0) * (1.0 + params.K)) + 1.0
    return int(math.ceil(mean + 20.0 * spread)) + 5


def mpsts_pmf(params: ModelParams, n_max: int | None = None) -> Pmf:
    """Photocount pmf of the subtracted state, closed form.

    With n_max omitted the truncation point is chosen adaptively as the
    smallest N whose running sum exceeds 1 - 1e-10.  Exact m = M degeneracy
    is routed through the compound-Poisson law with a = M + K; the unsafe
    band just off the degeneracy is rejected.
    """
    gap = params.M - params.m
    if gap < EPS_POLE:
        builder = lambda nm: kernels.compound_table(
            params.mu0, params.M + params.K, nm
        )
    elif gap < POLE_BAND:
        raise PoleBandError(
            f"M - m = {gap:.2e} lies in the numerically unsafe band "
            f"({EPS_POLE:g}, {POLE_BAND:g}); widen or snap the parameters"
        )
    else:
        builder = lambda nm: kernels.pmf_table(
            params.mu0, params.m, params.M, params.K, nm
        )
    if n_max is not None:
        table = builder(int(n_max))
        return Pmf(table, float(max(0.0, 1.0 - table.sum())))
    return _adaptive_pmf(builder, _heuristic_start(params))


def convolved_pmf(params: ModelParams, n_max: int | None = None) -> Pmf:
    """Photocount pmf as the Polya-weighted compound-Poisson mixture with
    group parameter a = k + m; the independent route against `mpsts_pmf`."""
    m, M = params.integer_modes()
    weights = [polya_pmf(k, m, M, params.K) for k in range(params.K + 1)]

    def builder(nm: int) -> np.ndarray:
        acc = np.zeros(nm + 1, dtype=np.float64)
        for k, w in enumerate(weights):
            if w > 0.0:
                acc += w * kernels.compound_table(params.mu0, float(k + m), nm)
        return acc

    if n_max is not None:
        table = builder(int(n_max))
        return Pmf(table, float(max(0.0, 1.0 - table.sum())))
    return _adaptive_pmf(builder, _heuristic_start(params))


def generating_function(params: ModelParams, z: float) -> float:
    """G(z) = E[z^N]; closed form through the thermal generating function."""
    if not (0.0 <= z <= 1.0):
        raise DomainError(f"z must lie in [0, 1], got {z}")
    from .specfun import hyp2f1_terminating

    g_be = 1.0 / (1.0 + params.mu0 * (1.0 - z))
    return g_be ** params.m * hyp2f1_terminating(
        params.K, params.m, params.M, 1.0 - g_be
    )


def dark_count_convolve(pmf: Pmf, config: DarkCountConfig, m: float) -> Pmf:
    """Convolve a photocount pmf with Poisson dark counts of mean
    m * mu_dc_per_mode; the mean increases by exactly that amount."""
    mu_dc = m * config.mu_dc_per_mode
    if mu_dc == 0.0:
        return Pmf(pmf.probabilities.copy(), pmf.tail_bound)
    w = math.exp(-mu_dc)
    weights = [w]
    j = 1
    while weights[-1] > 1e-18 * w or j <= mu_dc + 2:
        w_next = weights[-1] * mu_dc / j
        weights.append(w_next)
        j += 1
        if j > 400:
            break
    src = pmf.probabilities
    out = np.zeros(src.shape[0] + len(weights) - 1, dtype=np.float64)
    for j, wj in enumerate(weights):
        out[j : j + src.shape[0]] += wj * src
    return Pmf(out, float(max(0.0, 1.0 - out.sum())))


def quadrature_pdf(params: ModelParams, Q):
    """Phase-averaged homodyne quadrature density for single-mode observation.

    Fock-weighted sum of squared oscillator eigenfunctions; requires m = 1.
    Accepts a scalar or an array of quadrature values.
    """
    if abs(params.m - 1.0) > 1e-9:
        raise ValueError(f"quadrature_pdf requires m = 1, got m={params.m}")
    pmf = mpsts_pmf(params)
    if pmf.n_max > N_MAX_QUAD:
        raise ValueError(
            f"pmf support N_max={pmf.n_max} exceeds the oscillator recurrence "
            f"cap {N_MAX_QUAD}"
        )
    q = np.atleast_1d(np.asarray(Q, dtype=np.float64))
    phi = kernels.hermite_table(pmf.n_max, q)
    dens = pmf.probabilities @ (phi * phi)
    return float(dens[0]) if np.ndim(Q) == 0 else dens


def quadrature_limit(n_max: int) -> float:
    """Half-width of the support window used for quadrature integration."""
    return math.sqrt(2.0 * n_max + 1.0) + 6.0


def mu0_from_mean(mu: float, m: float, M: float, K: int) -> float:
    """Invert the mean relation: mu0 = mu / (m (1 + K/M))."""
    if m <= 0 or M <= 0:
        raise DomainError(f"need m > 0 and M > 0, got m={m}, M={M}")
    return mu / (m * (1.0 + K / M))
