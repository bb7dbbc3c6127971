"""Signal-processing chain for synchronously recorded detector traces.

A trace carries click times from the subtraction monitor (k channel) and
the counting detector (n channel) plus homodyne samples.  Processing runs
bin -> thin -> group: fixed-width time bins, periodic thinning to kill
interbin correlations, consecutive disjoint grouping by M with selection on
the per-group total of subtracted photons.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .distributions import CountHistogram


@dataclass(frozen=True)
class TimeTrace:
    """Raw synchronized streams: sorted click times per channel, homodyne
    samples as (time, value) rows, and the observation duration."""

    dk_click_times: np.ndarray
    dn_click_times: np.ndarray
    hd_samples: np.ndarray          # shape (S, 2): time, quadrature value
    duration: float

    def __post_init__(self):
        object.__setattr__(
            self, "dk_click_times", np.asarray(self.dk_click_times, dtype=np.float64)
        )
        object.__setattr__(
            self, "dn_click_times", np.asarray(self.dn_click_times, dtype=np.float64)
        )
        hd = np.asarray(self.hd_samples, dtype=np.float64).reshape(-1, 2)
        object.__setattr__(self, "hd_samples", hd)
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        for name in ("dk_click_times", "dn_click_times"):
            t = getattr(self, name)
            if t.size and (t.min() < 0 or np.any(np.diff(t) <= 0)):
                raise ValueError(f"{name} must be nonnegative and strictly sorted")
        if hd.shape[0] and (hd[0, 0] < 0 or np.any(np.diff(hd[:, 0]) <= 0)):
            raise ValueError("hd_samples times must be nonnegative, strictly sorted")


@dataclass(frozen=True)
class PipelineConfig:
    """Binning and thinning parameters.

    tau is the time-mode duration, period the thinning interval; tau_d and
    max_counts_per_bin describe the detector and are metadata apart from
    the saturation flag.
    """

    tau: float = 10e-6
    period: float = 480e-6
    t_coh: float = 40e-6
    tau_d: float = 220e-9
    max_counts_per_bin: int = 45

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.period < self.tau:
            raise ValueError("period must be >= tau")
        if self.tau > self.t_coh:
            warnings.warn(
                f"tau={self.tau:g} exceeds the coherence time {self.t_coh:g}; "
                "bins are no longer single time modes"
            )
        if self.tau < 10 * self.tau_d:
            warnings.warn(
                f"tau={self.tau:g} is within 10 dead times ({self.tau_d:g}); "
                "multi-count registration per mode is unreliable"
            )

    @property
    def thinning_stride(self) -> int:
        return max(1, round(self.period / self.tau))


@dataclass(frozen=True)
class BinRecord:
    """One time bin: k and n channel counts, first homodyne value if any."""

    k: int
    n: int
    q: float | None = None
    saturated: bool = False


class BinSequence:
    """Array-backed sequence of BinRecord; traces can span millions of bins,
    so per-bin Python objects are materialized only on item access."""

    def __init__(self, k: np.ndarray, n: np.ndarray, q: np.ndarray, saturated: np.ndarray):
        self.k = np.asarray(k, dtype=np.int64)
        self.n = np.asarray(n, dtype=np.int64)
        self.q = np.asarray(q, dtype=np.float64)  # NaN marks "no homodyne sample"
        self.saturated = np.asarray(saturated, dtype=bool)

    @classmethod
    def from_records(cls, records) -> "BinSequence":
        if isinstance(records, cls):
            return records
        k = np.asarray([b.k for b in records], dtype=np.int64)
        n = np.asarray([b.n for b in records], dtype=np.int64)
        q = np.asarray(
            [np.nan if b.q is None else b.q for b in records], dtype=np.float64
        )
        sat = np.asarray([b.saturated for b in records], dtype=bool)
        return cls(k, n, q, sat)

    def __len__(self) -> int:
        return self.k.shape[0]

    def __getitem__(self, item):
        if isinstance(item, slice):
            return BinSequence(
                self.k[item], self.n[item], self.q[item], self.saturated[item]
            )
        q = self.q[item]
        return BinRecord(
            k=int(self.k[item]),
            n=int(self.n[item]),
            q=None if np.isnan(q) else float(q),
            saturated=bool(self.saturated[item]),
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinSequence):
            return NotImplemented
        return (
            np.array_equal(self.k, other.k)
            and np.array_equal(self.n, other.n)
            and np.array_equal(self.q, other.q, equal_nan=True)
            and np.array_equal(self.saturated, other.saturated)
        )


@dataclass(frozen=True)
class GroupedDataset:
    """Photocount and quadrature data for one (m, M, K) combination."""

    key: tuple[int, int, int]
    photocounts: CountHistogram
    quadratures: np.ndarray
    group_count: int


def bin_trace(trace: TimeTrace, config: PipelineConfig) -> BinSequence:
    """Divide the trace into bins of width tau; bin i covers [i*tau, (i+1)*tau).

    Counts clicks per channel per bin and keeps the first homodyne sample of
    each bin.  Bins whose n count exceeds the detector ceiling are flagged
    (with a warning) but retained.
    """
    n_bins = int(np.ceil(trace.duration / config.tau))
    edges = np.arange(n_bins + 1) * config.tau
    k_counts, _ = np.histogram(trace.dk_click_times, bins=edges)
    n_counts, _ = np.histogram(trace.dn_click_times, bins=edges)
    q = np.full(n_bins, np.nan)
    if trace.hd_samples.shape[0]:
        idx = np.floor(trace.hd_samples[:, 0] / config.tau).astype(np.int64)
        valid = (idx >= 0) & (idx < n_bins)
        # times are sorted, so writing in reverse leaves the first sample
        q[idx[valid][::-1]] = trace.hd_samples[valid, 1][::-1]
    saturated = n_counts > config.max_counts_per_bin
    if saturated.any():
        warnings.warn(
            f"{int(saturated.sum())} bins exceed {config.max_counts_per_bin} "
            "counts; flagged but retained"
        )
    return BinSequence(k_counts, n_counts, q, saturated)


def thin_bins(bins, config: PipelineConfig):
    """Keep bins at indices 0, s, 2s, ... with s = round(period/tau)."""
    return bins[:: config.thinning_stride]


def group_and_select(bins, M: int, m: int) -> dict[int, GroupedDataset]:
    """Form consecutive disjoint groups of M bins and split them by the
    per-group total of subtracted photons.

    Within a group: K is the sum of k over all M bins, the photocount N the
    sum of n over the first m bins, and the group quadrature the first bin's
    homodyne value (groups without one contribute no quadrature).  A
    trailing partial group is discarded.
    """
    if not (1 <= m <= M):
        raise ValueError(f"need 1 <= m <= M, got m={m}, M={M}")
    seq = BinSequence.from_records(bins)
    n_groups = len(seq) // M
    out: dict[int, GroupedDataset] = {}
    if n_groups == 0:
        return out
    k_mat = seq.k[: n_groups * M].reshape(n_groups, M)
    n_mat = seq.n[: n_groups * M].reshape(n_groups, M)
    K_group = k_mat.sum(axis=1)
    N = n_mat[:, :m].sum(axis=1)
    q0 = seq.q[: n_groups * M : M]
    for K in np.unique(K_group):
        mask = K_group == K
        values, counts = np.unique(N[mask], return_counts=True)
        quads = q0[mask]
        out[int(K)] = GroupedDataset(
            key=(m, M, int(K)),
            photocounts=CountHistogram(
                {int(v): int(c) for v, c in zip(values, counts)}
            ),
            quadratures=quads[~np.isnan(quads)],
            group_count=int(mask.sum()),
        )
    return out
