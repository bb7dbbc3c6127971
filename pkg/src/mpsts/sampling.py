"""Reproducible Monte Carlo: photocount histograms, hierarchical quadrature
samples, a brute-force physical simulation of sequential photon subtraction,
and synthetic detector traces for pipeline testing.

All draws come from keyed counter streams (see :mod:`mpsts.rng`), so results
depend only on (seed, stream_id) and never on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .distributions import (
    CountHistogram,
    DarkCountConfig,
    ModelParams,
    N_MAX_QUAD,
    dark_count_convolve,
    mpsts_pmf,
    quadrature_limit,
)
from .kernels._shared import geometric_cdf_table, subtraction_accept_table
from .pipeline import TimeTrace
from .rng import SeededStream, uniforms

_QUAD_ICDF_GRID = 4096
_quad_icdf_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def sample_photocounts(
    params: ModelParams,
    n: int,
    stream: SeededStream,
    dark: DarkCountConfig | None = None,
) -> CountHistogram:
    """n i.i.d. draws from the photocount pmf via inverse-CDF lookup.

    The tiny truncation tail (<= 1e-10) maps onto the last retained count.
    Dark counts are folded into the sampling pmf when a config is given.
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    params.integer_modes()
    pmf = mpsts_pmf(params)
    if dark is not None and dark.mu_dc_per_mode > 0:
        pmf = dark_count_convolve(pmf, dark, params.m)
    cdf = pmf.cdf()
    key = stream.key()
    # draw i always uses counter i, so chunking changes nothing but memory
    counts = np.zeros(cdf.shape[0], dtype=np.int64)
    chunk = 1 << 24
    for start in range(0, n, chunk):
        idx = kernels.sample_counts(cdf, key, start, min(chunk, n - start))
        counts += np.bincount(idx, minlength=cdf.shape[0])
    return CountHistogram({int(i): int(c) for i, c in enumerate(counts) if c})


def _quadrature_inverse_cdf(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Numeric inverse CDF of |phi_N|^2 on a 4096-point grid (memoized)."""
    cached = _quad_icdf_cache.get(N)
    if cached is not None:
        return cached
    if N > N_MAX_QUAD:
        raise ValueError(f"quadrature sampling capped at N <= {N_MAX_QUAD}")
    lim = quadrature_limit(N)
    q = np.linspace(-lim, lim, _QUAD_ICDF_GRID)
    phi = kernels.hermite_table(N, q)[N]
    dens = phi * phi
    cdf = np.concatenate(
        ([0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(q)))
    )
    cdf /= cdf[-1]
    _quad_icdf_cache[N] = (q, cdf)
    return q, cdf


def sample_quadratures(
    params: ModelParams, n: int, stream: SeededStream
) -> np.ndarray:
    """Hierarchical quadrature draws for m = 1: a photon number from the
    count pmf, then a position from |phi_N|^2 by interpolated inverse CDF."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if abs(params.m - 1.0) > 1e-9:
        raise ValueError(f"sample_quadratures requires m = 1, got m={params.m}")
    params.integer_modes()
    pmf = mpsts_pmf(params)
    if pmf.n_max > N_MAX_QUAD:
        raise ValueError(f"pmf support exceeds the oscillator cap {N_MAX_QUAD}")
    key = stream.key()
    ns = kernels.sample_counts(pmf.cdf(), key, 0, n)
    u = uniforms(key, n + np.arange(n, dtype=np.uint64))
    out = np.empty(n, dtype=np.float64)
    for N in np.unique(ns):
        grid, cdf = _quadrature_inverse_cdf(int(N))
        mask = ns == N
        out[mask] = np.interp(u[mask], cdf, grid)
    return out


@dataclass(frozen=True)
class OracleResult:
    """Physical-simulation output plus acceptance diagnostics."""

    histogram: CountHistogram
    trials: int
    attempts: int

    @property
    def acceptance_rate(self) -> float:
        return self.trials / self.attempts if self.attempts else 0.0


def physical_subtraction_oracle(
    mu0: float,
    m: int,
    M: int,
    K: int,
    n: int,
    stream: SeededStream,
) -> OracleResult:
    """End-to-end simulation of K sequential single-photon subtractions.

    Per trial: draw M independent Bose-Einstein occupations, postselect on
    the annihilation weighting (whole-trial rejection with acceptance
    proportional to the running total, normalized by a cap at the 1 - 1e-12
    quantile of the pre-subtraction total), remove one photon at a time with
    probability occupancy/total, and record the sum of the first m modes.
    Independent of the closed-form photocount model.
    """
    if not (1 <= m <= M):
        raise ValueError(f"need integer 1 <= m <= M, got m={m}, M={M}")
    if n < 1 or K < 0:
        raise ValueError("need n >= 1 and K >= 0")
    nmax = 64
    while True:
        csum = np.cumsum(kernels.compound_table(mu0, float(M), nmax))
        hit = np.nonzero(csum >= 1.0 - 1e-12)[0]
        if hit.size:
            n_cap = int(hit[0])
            break
        nmax *= 2
    n_cap = max(n_cap, K, 1)
    geom_cdf = geometric_cdf_table(mu0)
    accept_p = subtraction_accept_table(n_cap, K)
    counts, attempts = kernels.subtraction_oracle(
        stream.seed, stream.stream_id, n, m, M, K, geom_cdf, accept_p
    )
    return OracleResult(CountHistogram.from_values(counts), n, int(attempts))


def _box_muller(u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)


def _poisson_inverse(lam: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Vectorized Poisson draws by sequential inversion of one uniform each."""
    p = np.exp(-lam)
    cdf = p.copy()
    counts = np.zeros(lam.shape, dtype=np.int64)
    active = u >= cdf
    k = 0
    while active.any():
        k += 1
        if k > 1000:
            raise RuntimeError("Poisson inversion runaway; intensity too large")
        p = p * lam / k
        cdf = cdf + p
        grow = active & (u >= cdf)
        counts[active] += 1
        active = grow
    return counts


def synthesize_trace(
    mu0: float,
    t_coh: float,
    duration: float,
    tap_ratio: float,
    stream: SeededStream,
    bin_width: float = 10e-6,
) -> TimeTrace:
    """Synthetic detector trace with a correlated thermal intensity process.

    The per-bin intensity is exponentially distributed (exact single-mode
    thermal marginal, so binned counts are Bose-Einstein) and correlated in
    time through a Gaussian copula over an Ornstein-Uhlenbeck process with
    correlation time t_coh.  The n channel has per-bin mean mu0, the k
    channel mu0 * tap_ratio, and each bin carries one homodyne sample whose
    variance tracks the instantaneous intensity.  Pipeline-testing surrogate
    only; click positions inside a bin are deterministic.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    if not (0.0 < tap_ratio < 1.0):
        raise ValueError("tap_ratio must lie in (0, 1)")
    if mu0 <= 0 or t_coh <= 0 or bin_width <= 0:
        raise ValueError("mu0, t_coh and bin_width must be positive")
    nb = int(math.ceil(duration / bin_width))
    key = stream.key()
    block = np.arange(nb, dtype=np.uint64)
    z = _box_muller(uniforms(key, block), uniforms(key, np.uint64(nb) + block))
    rho = math.exp(-bin_width / t_coh)
    fade = math.sqrt(1.0 - rho * rho)
    from scipy.signal import lfilter
    from scipy.special import ndtr

    # AR(1): g[i] = rho g[i-1] + fade z[i], seeded with g[0] = z[0]
    drive = fade * z
    drive[0] = z[0]
    g = lfilter([1.0], [1.0, -rho], drive)
    intensity = -np.log(np.maximum(1.0 - ndtr(g), 1e-300))

    u_n = uniforms(key, np.uint64(2 * nb) + block)
    u_k = uniforms(key, np.uint64(3 * nb) + block)
    counts_n = _poisson_inverse(intensity * mu0, u_n)
    counts_k = _poisson_inverse(intensity * (mu0 * tap_ratio), u_k)
    q_noise = _box_muller(
        uniforms(key, np.uint64(4 * nb) + block),
        uniforms(key, np.uint64(5 * nb) + block),
    )
    q = q_noise * np.sqrt(0.5 + intensity * mu0)

    def click_times(counts: np.ndarray) -> np.ndarray:
        bins_idx = np.repeat(np.arange(nb), counts)
        per_bin = np.repeat(counts, counts).astype(np.float64)
        starts = np.repeat(np.cumsum(counts) - counts, counts)
        within = np.arange(bins_idx.size) - starts
        return (bins_idx + (within + 0.5) / per_bin) * bin_width

    hd = np.column_stack(((block.astype(np.float64) + 0.5) * bin_width, q))
    return TimeTrace(
        dk_click_times=click_times(counts_k),
        dn_click_times=click_times(counts_n),
        hd_samples=hd,
        duration=nb * bin_width,
    )
