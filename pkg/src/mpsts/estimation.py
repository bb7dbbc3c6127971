"""Statistical machinery: likelihoods, fiducial and posterior grids, Fisher
information with conditioning diagnostics, conditional-MLE priors, and
sample-size requirements for target error rates.

Parameter grids hold a shifted log-density (max exactly 0) over axes
(mu0, m, M) x K slices; normalization is by direct summation with the cell
volume of the continuous axes.  Information matrices use the parameter
order (m, M, mu0) throughout.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import kernels
from .distributions import (
    EPS_POLE,
    POLE_BAND,
    CountHistogram,
    DarkCountConfig,
    ModelParams,
    Pmf,
    dark_count_convolve,
    mpsts_pmf,
    mu0_from_mean,
    quadrature_limit,
)
from .kernels._shared import LIKELIHOOD_FLOOR

PARAM_ORDER = ("m", "M", "mu0")
_SCAN_CHUNK = 65536


class NonPositiveDefiniteError(ValueError):
    """Information matrix has a non-positive eigenvalue beyond tolerance."""


class BoundaryMaximumWarning(UserWarning):
    """Grid mode sits on an axis end; the axes clip the distribution."""


class LikelihoodFloorWarning(UserWarning):
    """Data cells fell below the model density floor."""


@dataclass(frozen=True)
class PriorSpec:
    """Independent normal priors per parameter plus the fixed K value."""

    mu0_prior: tuple[float, float]
    m_prior: tuple[float, float]
    M_prior: tuple[float, float]
    K_fixed: int

    def __post_init__(self):
        for name in ("mu0_prior", "m_prior", "M_prior"):
            mean, sigma = getattr(self, name)
            if not sigma > 0:
                raise ValueError(f"{name} sigma must be > 0, got {sigma}")

    def mean(self, name: str) -> float:
        return getattr(self, f"{name}_prior")[0]

    def sigma(self, name: str) -> float:
        return getattr(self, f"{name}_prior")[1]


@dataclass(frozen=True)
class InfoMatrix:
    """Symmetric 3x3 information matrix, parameter order (m, M, mu0)."""

    entries: np.ndarray
    n: float

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.float64)
        if e.shape != (3, 3):
            raise ValueError("InfoMatrix entries must be 3x3")
        object.__setattr__(self, "entries", e)

    def covariance(self) -> np.ndarray:
        return np.linalg.inv(self.entries)


@dataclass(frozen=True)
class EstimateSummary:
    """Marginal means and standard deviations plus the max relative error."""

    means: dict[str, float]
    sigmas: dict[str, float]
    delta: float
    delta_params: tuple[str, ...]


@dataclass(frozen=True)
class GridAxes:
    """Discretized axes over (mu0, m, M) and the K slices to evaluate."""

    mu0: np.ndarray
    m: np.ndarray
    M: np.ndarray
    K_values: tuple[int, ...]

    def __post_init__(self):
        for name in ("mu0", "m", "M"):
            ax = np.asarray(getattr(self, name), dtype=np.float64)
            if ax.ndim != 1 or ax.size == 0 or np.any(np.diff(ax) <= 0):
                raise ValueError(f"axis {name} must be 1-D strictly increasing")
            object.__setattr__(self, name, ax)
        object.__setattr__(self, "K_values", tuple(int(k) for k in self.K_values))

    def axis(self, name: str) -> np.ndarray:
        if name == "K":
            return np.asarray(self.K_values, dtype=np.float64)
        return getattr(self, name)

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.mu0.size, self.m.size, self.M.size, len(self.K_values))


def _spacing(axis: np.ndarray) -> float:
    return float(axis[1] - axis[0]) if axis.size > 1 else 1.0


class ParameterGrid:
    """Normalized density over a GridAxes lattice.

    Stores the shifted log density (its maximum is exactly 0); invalid
    nodes (inside the pole band) carry -inf and zero density.
    """

    AXIS_NAMES = ("mu0", "m", "M", "K")

    def __init__(self, axes: GridAxes, log_density: np.ndarray, floor_cells: int = 0):
        self.axes = axes
        log_density = np.asarray(log_density, dtype=np.float64)
        if log_density.shape != axes.shape:
            raise ValueError("log_density shape does not match axes")
        peak = np.max(log_density)
        if not np.isfinite(peak):
            raise ValueError("grid has no finite log-density node")
        self.log_density = log_density - peak
        self.floor_cells = int(floor_cells)
        self.cell_volume = (
            _spacing(axes.mu0) * _spacing(axes.m) * _spacing(axes.M)
        )
        raw = np.exp(self.log_density)
        total = raw.sum() * self.cell_volume
        self.normalization = 1.0 / total
        self._density = raw * self.normalization
        self.boundary_max = self._mode_on_boundary()

    def _mode_on_boundary(self) -> bool:
        idx = np.unravel_index(np.argmax(self.log_density), self.log_density.shape)
        for d, name in enumerate(self.AXIS_NAMES):
            size = self.log_density.shape[d]
            if size > 1 and idx[d] in (0, size - 1):
                return True
        return False

    def density(self) -> np.ndarray:
        """Normalized density: sum(density) * cell_volume = 1."""
        return self._density

    def argmax_params(self) -> ModelParams:
        idx = np.unravel_index(np.argmax(self.log_density), self.log_density.shape)
        return ModelParams(
            mu0=float(self.axes.mu0[idx[0]]),
            m=float(self.axes.m[idx[1]]),
            M=float(self.axes.M[idx[2]]),
            K=self.axes.K_values[idx[3]],
        )

    def node_mass(self) -> np.ndarray:
        """Per-node probability mass (sums to 1)."""
        return self._density * self.cell_volume

    def marginal(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """Axis values and the marginal probability mass along one axis."""
        d = self.AXIS_NAMES.index(name)
        other = tuple(i for i in range(4) if i != d)
        return self.axes.axis(name), self.node_mass().sum(axis=other)

    def moments(self) -> dict[str, tuple[float, float]]:
        out = {}
        for name in self.AXIS_NAMES:
            values, mass = self.marginal(name)
            mean = float(np.sum(values * mass))
            var = float(np.sum((values - mean) ** 2 * mass))
            out[name] = (mean, math.sqrt(max(var, 0.0)))
        return out

    def varied_params(self) -> tuple[str, ...]:
        return tuple(
            name
            for d, name in enumerate(self.AXIS_NAMES)
            if self.log_density.shape[d] > 1
        )


# --- likelihood evaluation ----------------------------------------------------


def _dark_rate(dark: DarkCountConfig | None) -> float:
    return dark.mu_dc_per_mode if dark is not None else 0.0


def _loglike_compound_cells(
    mu0: float, a: float, m: float, data_n, data_d, dark_rate: float
) -> tuple[float, int]:
    """Exact-degeneracy likelihood path (m = M), compound law with a = M + K."""
    nmax = int(data_n[-1])
    table = kernels.compound_table(mu0, a, nmax)
    if dark_rate > 0.0:
        pmf = dark_count_convolve(
            Pmf(table, 0.0), DarkCountConfig(dark_rate), m
        )
        table = pmf.probabilities[: nmax + 1]
    probs = table[data_n]
    low = probs < LIKELIHOOD_FLOOR
    ll = float(np.sum(data_d * np.log(np.where(low, LIKELIHOOD_FLOOR, probs))))
    return ll, int(low.sum())


def _scan_nodes(
    mu0s: np.ndarray,
    ms: np.ndarray,
    Ms: np.ndarray,
    K: int,
    data_n: np.ndarray,
    data_d: np.ndarray,
    dark_rate: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Log-likelihood over arbitrary nodes, routing each node to the closed
    form, the compound degeneracy path, or -inf inside the pole band."""
    gap = Ms - ms
    ll = np.full(mu0s.shape[0], -np.inf)
    floors = np.zeros(mu0s.shape[0], dtype=np.int64)
    closed = gap > POLE_BAND
    degenerate = np.abs(gap) < EPS_POLE
    idx_closed = np.nonzero(closed)[0]
    for start in range(0, idx_closed.size, _SCAN_CHUNK):
        sel = idx_closed[start : start + _SCAN_CHUNK]
        vals, fl = kernels.loglike_photocount_scan(
            mu0s[sel], ms[sel], Ms[sel], K, data_n, data_d, dark_rate
        )
        ll[sel] = vals
        floors[sel] = fl
    for i in np.nonzero(degenerate)[0]:
        ll[i], floors[i] = _loglike_compound_cells(
            float(mu0s[i]), float(Ms[i] + K), float(ms[i]), data_n, data_d, dark_rate
        )
    return ll, floors


def log_likelihood_photocount(
    params: ModelParams,
    data: CountHistogram,
    dark: DarkCountConfig | None = None,
) -> float:
    """Sum of D(N) ln P(N | params), with the model density floored at
    1e-300 so isolated events cannot produce -inf."""
    if data.n == 0:
        raise ValueError("data histogram is empty")
    data_n, data_d = data.cells()
    ll, floors = _scan_nodes(
        np.asarray([params.mu0]),
        np.asarray([params.m]),
        np.asarray([params.M]),
        params.K,
        data_n,
        data_d,
        _dark_rate(dark),
    )
    if floors[0]:
        warnings.warn(
            f"{floors[0]} data cells below the model density floor",
            LikelihoodFloorWarning,
        )
    if not np.isfinite(ll[0]):
        raise ValueError("parameters fall in the numerically unsafe pole band")
    return float(ll[0])


def _grid_scan(
    data: CountHistogram, axes: GridAxes, dark: DarkCountConfig | None
) -> tuple[np.ndarray, int]:
    data_n, data_d = data.cells()
    rate = _dark_rate(dark)
    mu0g, mg, Mg = np.meshgrid(axes.mu0, axes.m, axes.M, indexing="ij")
    flat = (mu0g.ravel(), mg.ravel(), Mg.ravel())
    out = np.empty(axes.shape)
    floor_total = 0
    for kslot, K in enumerate(axes.K_values):
        ll, floors = _scan_nodes(*flat, K, data_n, data_d, rate)
        out[:, :, :, kslot] = ll.reshape(axes.shape[:3])
        floor_total += int(floors.sum())
    return out, floor_total


def _warn_boundary(grid: ParameterGrid, label: str) -> ParameterGrid:
    if grid.boundary_max:
        warnings.warn(
            f"{label} maximum lies on a grid boundary; widen the axes",
            BoundaryMaximumWarning,
        )
    return grid


def fiducial_grid(
    data: CountHistogram, axes: GridAxes, dark: DarkCountConfig | None = None
) -> ParameterGrid:
    """Likelihood normalized over the parameter lattice (shifted so the
    exponent peaks at exactly 0 before normalization)."""
    if data.n == 0:
        raise ValueError("data histogram is empty")
    ll, floor_cells = _grid_scan(data, axes, dark)
    return _warn_boundary(ParameterGrid(axes, ll, floor_cells), "fiducial grid")


def posterior_grid(
    data: CountHistogram,
    prior: PriorSpec,
    axes: GridAxes | None = None,
    dark: DarkCountConfig | None = None,
    nodes: int = 61,
    span: float = 6.0,
) -> ParameterGrid:
    """Bayes update: density proportional to likelihood times the product of
    normal priors, with K pinned at the prior's fixed value."""
    if axes is None:
        axes = axes_from_prior(prior, data, dark, nodes=nodes, span=span)
    if tuple(axes.K_values) != (prior.K_fixed,):
        axes = GridAxes(axes.mu0, axes.m, axes.M, (prior.K_fixed,))
    ll, floor_cells = _grid_scan(data, axes, dark)
    lp = np.zeros(axes.shape[:3])
    for name, grid_ax, dim in (
        ("mu0", axes.mu0, 0),
        ("m", axes.m, 1),
        ("M", axes.M, 2),
    ):
        mean, sigma = prior.mean(name), prior.sigma(name)
        if math.isinf(sigma):
            continue
        shape = [1, 1, 1]
        shape[dim] = grid_ax.size
        lp = lp + (-0.5 * ((grid_ax - mean) / sigma) ** 2).reshape(shape)
    return _warn_boundary(
        ParameterGrid(axes, ll + lp[:, :, :, None], floor_cells), "posterior grid"
    )


def posterior_moments(grid: ParameterGrid, reference: ModelParams) -> EstimateSummary:
    """Marginal means/sigmas and the max relative error over the parameters
    actually varied in the grid (reference values must be positive)."""
    moments = grid.moments()
    ref = {"mu0": reference.mu0, "m": reference.m, "M": reference.M, "K": reference.K}
    means = {k: v[0] for k, v in moments.items()}
    sigmas = {k: v[1] for k, v in moments.items()}
    delta_params = tuple(p for p in grid.varied_params() if ref[p] > 0)
    delta = max((sigmas[p] / ref[p] for p in delta_params), default=0.0)
    return EstimateSummary(means, sigmas, delta, delta_params)


# --- Fisher information -------------------------------------------------------


def _model_pmf_table(
    params: ModelParams, nmax: int, dark: DarkCountConfig | None
) -> np.ndarray:
    """Model probabilities on 0..nmax including dark counts, choosing the
    closed form or the compound degeneracy route."""
    gap = params.M - params.m
    if gap < EPS_POLE:
        table = kernels.compound_table(params.mu0, params.M + params.K, nmax)
    elif gap < POLE_BAND:
        raise ValueError("parameters fall in the numerically unsafe pole band")
    else:
        table = kernels.pmf_table(params.mu0, params.m, params.M, params.K, nmax)
    if dark is not None and dark.mu_dc_per_mode > 0:
        pmf = dark_count_convolve(Pmf(table, 0.0), dark, params.m)
        table = pmf.probabilities[: nmax + 1]
    return table


def _fd_step(value: float) -> float:
    return max(1e-4 * abs(value), 1e-6)


def _replace(params: ModelParams, name: str, value: float) -> ModelParams:
    kw = {"mu0": params.mu0, "m": params.m, "M": params.M, "K": params.K}
    kw[name] = value
    return ModelParams(**kw)


def _pmf_derivatives(
    params: ModelParams, nmax: int, dark: DarkCountConfig | None, step_scale: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """Central finite differences of P(N) w.r.t. (m, M, mu0)."""
    grads = np.empty((3, nmax + 1))
    for i, name in enumerate(PARAM_ORDER):
        u = getattr(params, name)
        h = _fd_step(u) * step_scale
        hi = _model_pmf_table(_replace(params, name, u + h), nmax, dark)
        lo = _model_pmf_table(_replace(params, name, u - h), nmax, dark)
        grads[i] = (hi - lo) / (2.0 * h)
    center = _model_pmf_table(params, nmax, dark)
    return grads, center


def fisher_information(
    params: ModelParams,
    n: float,
    dark: DarkCountConfig | None = None,
    step_scale: float = 1.0,
) -> InfoMatrix:
    """n * sum_N (d_u P)(d_v P)/P with central finite differences, K fixed.

    Requires interior parameters: m strictly below M and off the pole band
    (the finite-difference shifts must stay off it too).
    """
    if params.M - params.m < POLE_BAND + 2 * _fd_step(params.m):
        raise ValueError("parameters too close to the m = M pole for derivatives")
    support = mpsts_pmf(params).n_max + 30
    grads, center = _pmf_derivatives(params, support, dark, step_scale)
    center = np.maximum(center, LIKELIHOOD_FLOOR)
    weighted = grads / center
    entries = n * (weighted @ grads.T)
    entries = 0.5 * (entries + entries.T)
    return InfoMatrix(entries, float(n))


def condition_number(info: InfoMatrix) -> float:
    """Ratio of extreme eigenvalues of a positive-definite information matrix."""
    eig = np.linalg.eigvalsh(info.entries)
    lmax = float(eig[-1])
    lmin = float(eig[0])
    if lmin <= 0 and lmin < 1e-12 * max(lmax, 1.0):
        raise NonPositiveDefiniteError(
            f"smallest eigenvalue {lmin:g} is not positive"
        )
    return lmax / lmin


def posterior_information(fisher: InfoMatrix, prior: PriorSpec) -> InfoMatrix:
    """Add the diagonal prior precisions to the Fisher matrix."""
    precisions = np.zeros(3)
    for i, name in enumerate(PARAM_ORDER):
        sigma = prior.sigma(name)
        precisions[i] = 0.0 if math.isinf(sigma) else 1.0 / sigma**2
    return InfoMatrix(fisher.entries + np.diag(precisions), fisher.n)


# --- conditional MLE and priors -------------------------------------------------


def _default_bracket(
    target: str, data: CountHistogram, fixed: ModelParams, dark: DarkCountConfig | None
) -> tuple[float, float]:
    if target == "m":
        return (0.05, fixed.M - POLE_BAND - 2e-3)
    if target == "M":
        return (fixed.m + POLE_BAND + 2e-3, max(3.0 * fixed.M, fixed.m + 10.0))
    mean = data.mean()
    if dark is not None:
        mean = max(mean - dark.mu_dc_per_mode * fixed.m, 1e-6)
    guess = mu0_from_mean(mean, fixed.m, fixed.M, fixed.K)
    return (max(guess / 20.0, 1e-5), guess * 8.0 + 1e-3)


def _fisher_single(
    target: str,
    estimate: float,
    fixed: ModelParams,
    n: float,
    dark: DarkCountConfig | None,
) -> float:
    params = _replace(fixed, target, estimate)
    support = mpsts_pmf(params).n_max + 30
    u = estimate
    h = _fd_step(u)
    hi = _model_pmf_table(_replace(params, target, u + h), support, dark)
    lo = _model_pmf_table(_replace(params, target, u - h), support, dark)
    grad = (hi - lo) / (2.0 * h)
    center = np.maximum(_model_pmf_table(params, support, dark), LIKELIHOOD_FLOOR)
    return float(n * np.sum(grad * grad / center))


def conditional_mle(
    target: str,
    data: CountHistogram,
    fixed: ModelParams,
    dark: DarkCountConfig | None = None,
    bracket: tuple[float, float] | None = None,
) -> tuple[float, float]:
    """One-parameter MLE with the remaining parameters pinned at `fixed`.

    Returns the estimate and its asymptotic standard deviation from the
    single-parameter Fisher information at the estimate.
    """
    if target not in PARAM_ORDER:
        raise ValueError(f"target must be one of {PARAM_ORDER}, got {target!r}")
    if data.n == 0:
        raise ValueError("data histogram is empty")
    lo, hi = bracket if bracket is not None else _default_bracket(
        target, data, fixed, dark
    )
    data_n, data_d = data.cells()
    rate = _dark_rate(dark)

    def negative_ll(u: float) -> float:
        p = _replace(fixed, target, float(u))
        ll, _ = _scan_nodes(
            np.asarray([p.mu0]),
            np.asarray([p.m]),
            np.asarray([p.M]),
            p.K,
            data_n,
            data_d,
            rate,
        )
        return -float(ll[0])

    res = optimize.minimize_scalar(
        negative_ll,
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-10, "maxiter": 300},
    )
    if not res.success:
        raise RuntimeError(f"conditional MLE for {target} did not converge")
    estimate = float(res.x)
    info = _fisher_single(target, estimate, fixed, data.n, dark)
    if info <= 0:
        raise RuntimeError(f"non-positive single-parameter information for {target}")
    return estimate, 1.0 / math.sqrt(info)


def build_prior(
    data: CountHistogram,
    theory: ModelParams,
    dark: DarkCountConfig | None = None,
) -> PriorSpec:
    """Normal priors from one-parameter conditional MLEs (others fixed at
    the expected theoretical values); K is taken as deterministic."""
    m_hat, m_sigma = conditional_mle("m", data, theory, dark)
    M_hat, M_sigma = conditional_mle("M", data, theory, dark)
    mu0_hat, mu0_sigma = conditional_mle("mu0", data, theory, dark)
    return PriorSpec(
        mu0_prior=(mu0_hat, mu0_sigma),
        m_prior=(m_hat, m_sigma),
        M_prior=(M_hat, M_sigma),
        K_fixed=theory.K,
    )


def axes_from_prior(
    prior: PriorSpec,
    data: CountHistogram,
    dark: DarkCountConfig | None = None,
    nodes: int = 61,
    span: float = 6.0,
) -> GridAxes:
    """Axes spanning prior mean +/- span * sigma_axis per parameter.

    sigma_axis is the larger of the prior sigma and the posterior-information
    prediction sqrt((I_B^-1)_uu), so weakly identified directions are not
    clipped by the grid.
    """
    pred = dict(zip(PARAM_ORDER, (prior.sigma(p) for p in PARAM_ORDER)))
    try:
        center = ModelParams(
            mu0=prior.mean("mu0"),
            m=prior.mean("m"),
            M=prior.mean("M"),
            K=prior.K_fixed,
        )
        info = posterior_information(
            fisher_information(center, data.n, dark), prior
        )
        cov = np.linalg.inv(info.entries)
        for i, name in enumerate(PARAM_ORDER):
            if cov[i, i] > 0:
                pred[name] = max(pred[name], math.sqrt(cov[i, i]))
    except (ValueError, np.linalg.LinAlgError):
        pass  # fall back to prior sigmas when the center is degenerate

    def axis(name: str, floor: float) -> np.ndarray:
        mean = prior.mean(name)
        half = span * pred[name]
        return np.linspace(max(mean - half, floor), mean + half, nodes)

    return GridAxes(
        mu0=axis("mu0", 1e-4),
        m=axis("m", 0.05),
        M=axis("M", 0.1),
        K_values=(prior.K_fixed,),
    )


@dataclass(frozen=True)
class BayesianFit:
    """Full Bayesian pipeline output for one photocount dataset."""

    prior: PriorSpec
    fisher: InfoMatrix
    posterior_info: InfoMatrix
    grid: ParameterGrid
    summary: EstimateSummary


def bayesian_fit(
    data: CountHistogram,
    theory: ModelParams,
    dark: DarkCountConfig | None = None,
    nodes: int = 61,
    span: float = 6.0,
) -> BayesianFit:
    """Priors from conditional MLEs, posterior grid, and moment summary."""
    prior = build_prior(data, theory, dark)
    center = ModelParams(
        mu0=prior.mean("mu0"), m=prior.mean("m"), M=prior.mean("M"), K=prior.K_fixed
    )
    fisher = fisher_information(center, data.n, dark)
    post_info = posterior_information(fisher, prior)
    grid = posterior_grid(data, prior, None, dark, nodes=nodes, span=span)
    summary = posterior_moments(grid, theory)
    return BayesianFit(prior, fisher, post_info, grid, summary)


# --- sample-size analysis -------------------------------------------------------


def _profile_kl_to_adjacent_k(
    theory: ModelParams, dark: DarkCountConfig | None, free_m: bool
) -> float:
    """Smallest KL divergence from the true pmf to the best-fitting model with
    K off by one, profiling over the free continuous parameters.

    This rate controls how fast the discrete K marginal collapses: the
    fiducial mass at a competing K' decays like exp(-n * KL)."""
    support = mpsts_pmf(theory).n_max + 60
    p_true = _model_pmf_table(theory, support, dark)
    p_true = p_true / p_true.sum()

    def kl_for(K: int) -> float:
        def objective(x: np.ndarray) -> float:
            if free_m:
                mu0, m, M = x
            else:
                mu0, M = x
                m = theory.m
            if mu0 <= 1e-4 or m < 0.05 or M - m < 2e-3:
                return 1.0
            q = np.maximum(
                _model_pmf_table(ModelParams(mu0, m, M, K), support, dark),
                LIKELIHOOD_FLOOR,
            )
            return float(np.sum(p_true * np.log(p_true / q)))

        x0 = [theory.mu0, theory.m, theory.M] if free_m else [theory.mu0, theory.M]
        best = math.inf
        for scale in (1.0, 0.9, 1.1):
            res = optimize.minimize(
                objective,
                np.asarray(x0) * scale,
                method="Nelder-Mead",
                options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000},
            )
            best = min(best, float(res.fun))
        return best

    candidates = [theory.K + 1]
    if theory.K >= 1:
        candidates.append(theory.K - 1)
    return min(kl_for(K) for K in candidates)


def required_sample_size(
    method: str,
    delta_target: float,
    theory: ModelParams,
    dark: DarkCountConfig | None = None,
    seeds: int = 10,
    base_seed: int = 424243,
    nodes: int = 61,
) -> int:
    """Sample size needed for a max relative error delta_target.

    'no_prior' and 'fixed_m' are answered analytically as the larger of two
    requirements: the Cramer-Rao bound from the inverse information matrix
    over the free continuous parameters (3x3, or 2x2 with the m row
    dropped), and the size at which the discrete K marginal collapses below
    the target width (competing-K fiducial mass exp(-n*KL) falling under
    (delta*K)^2).  'bayesian' is answered by bisection over n with repeated
    simulation, taking the median delta over seeds.
    """
    if delta_target <= 0:
        raise ValueError("delta_target must be positive")
    if method in ("no_prior", "fixed_m"):
        info = fisher_information(theory, 1.0, dark)
        refs = {"m": theory.m, "M": theory.M, "mu0": theory.mu0}
        if method == "fixed_m":
            sub = np.linalg.inv(info.entries[1:, 1:])
            needs = [
                sub[0, 0] / (delta_target * refs["M"]) ** 2,
                sub[1, 1] / (delta_target * refs["mu0"]) ** 2,
            ]
        else:
            cov = np.linalg.inv(info.entries)
            needs = [
                cov[i, i] / (delta_target * refs[name]) ** 2
                for i, name in enumerate(PARAM_ORDER)
            ]
        if theory.K > 0:
            mass_target = (delta_target * theory.K) ** 2
            if mass_target < 1.0:
                rate = _profile_kl_to_adjacent_k(theory, dark, method == "no_prior")
                needs.append(-math.log(mass_target) / rate)
        return int(math.ceil(max(needs)))
    if method != "bayesian":
        raise ValueError(f"unknown method {method!r}")

    from . import sampling  # local import: sampling depends on this module's types

    def median_delta(n: int) -> float:
        deltas = []
        for s in range(seeds):
            stream = sampling.SeededStream(base_seed + s, stream_id=n)
            data = sampling.sample_photocounts(theory, n, stream, dark)
            fit = bayesian_fit(data, theory, dark, nodes=nodes)
            deltas.append(fit.summary.delta)
        return float(np.median(deltas))

    lo, hi = 0, 64
    while median_delta(hi) > delta_target:
        lo, hi = hi, hi * 4
        if hi > 20_000_000:
            raise RuntimeError("bisection for the Bayesian sample size diverged")
    if lo == 0:
        return hi
    while hi / lo > 1.25:
        mid = int(round(math.sqrt(lo * hi)))
        if median_delta(mid) > delta_target:
            lo = mid
        else:
            hi = mid
    return hi


# --- quadrature-data estimation --------------------------------------------------


class QuadratureEvaluator:
    """Caches the squared-eigenfunction matrix at the data points so repeated
    likelihood evaluations reduce to a pmf-vector product."""

    def __init__(self, data: np.ndarray):
        self.data = np.asarray(data, dtype=np.float64)
        if self.data.ndim != 1 or self.data.size == 0:
            raise ValueError("quadrature data must be a nonempty 1-D array")
        self._phi_sq: np.ndarray | None = None

    def _phi_matrix(self, nmax: int) -> np.ndarray:
        if self._phi_sq is None or self._phi_sq.shape[0] < nmax + 1:
            table = kernels.hermite_table(nmax, self.data)
            self._phi_sq = table * table
        return self._phi_sq[: nmax + 1]

    def log_likelihood(self, params: ModelParams) -> float:
        pmf = mpsts_pmf(params)
        dens = pmf.probabilities @ self._phi_matrix(pmf.n_max)
        return float(np.sum(np.log(np.maximum(dens, LIKELIHOOD_FLOOR))))

    def log_likelihood_batch(self, params_list: list[ModelParams]) -> np.ndarray:
        """Shared-support evaluation used by the grid scans."""
        if not params_list:
            return np.empty(0)
        pmfs = [mpsts_pmf(p) for p in params_list]
        nmax = max(p.n_max for p in pmfs)
        rows = np.zeros((len(pmfs), nmax + 1))
        for i, pmf in enumerate(pmfs):
            rows[i, : pmf.n_max + 1] = pmf.probabilities
        phi_sq = self._phi_matrix(nmax)
        out = np.empty(len(pmfs))
        chunk = max(1, (1 << 22) // max(self.data.size, 1))
        for start in range(0, len(pmfs), chunk):
            dens = rows[start : start + chunk] @ phi_sq
            out[start : start + chunk] = np.sum(
                np.log(np.maximum(dens, LIKELIHOOD_FLOOR)), axis=1
            )
        return out


def log_likelihood_quadrature(params: ModelParams, data: np.ndarray) -> float:
    """Sum of ln density over quadrature samples (m = 1 states only)."""
    if abs(params.m - 1.0) > 1e-9:
        raise ValueError(f"quadrature likelihood requires m = 1, got m={params.m}")
    return QuadratureEvaluator(data).log_likelihood(params)


def quadrature_moment_mu0(data: np.ndarray, M: float, K: int) -> float:
    """Moment pre-estimate: sample variance minus the vacuum half, inverted
    through the mean relation at m = 1."""
    var_q = float(np.var(np.asarray(data, dtype=np.float64)))
    return mu0_from_mean(var_q - 0.5, 1.0, M, K)


def _quad_fisher_entry(
    params: ModelParams, names: tuple[str, ...], n: float, dq: float = 0.01
) -> np.ndarray:
    """Expected information over the continuous quadrature observable."""
    pmf = mpsts_pmf(params)
    lim = quadrature_limit(pmf.n_max)
    q = np.arange(-lim, lim + dq, dq)
    phi_sq = None

    def density(p: ModelParams) -> np.ndarray:
        nonlocal phi_sq
        table = mpsts_pmf(p, n_max=None)
        need = table.n_max
        if phi_sq is None or phi_sq.shape[0] < need + 1:
            t = kernels.hermite_table(max(need, pmf.n_max), q)
            phi_sq = t * t
        return table.probabilities @ phi_sq[: need + 1]

    grads = []
    for name in names:
        u = getattr(params, name)
        h = _fd_step(u)
        hi = density(_replace(params, name, u + h))
        lo = density(_replace(params, name, u - h))
        grads.append((hi - lo) / (2.0 * h))
    center = np.maximum(density(params), LIKELIHOOD_FLOOR)
    k = len(names)
    out = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            val = n * float(np.trapezoid(grads[i] * grads[j] / center, dx=dq))
            out[i, j] = out[j, i] = val
    return out


def conditional_mle_quadrature(
    target: str,
    data: np.ndarray,
    fixed: ModelParams,
    bracket: tuple[float, float] | None = None,
) -> tuple[float, float]:
    """One-parameter MLE on the quadrature likelihood (target 'mu0' or 'M')."""
    if target not in ("mu0", "M"):
        raise ValueError("quadrature conditional MLE supports 'mu0' or 'M'")
    ev = QuadratureEvaluator(data)
    if bracket is None:
        if target == "mu0":
            guess = max(quadrature_moment_mu0(data, fixed.M, fixed.K), 1e-3)
            bracket = (max(guess / 10.0, 1e-4), guess * 6.0 + 0.1)
        else:
            bracket = (max(fixed.m + POLE_BAND + 2e-3, 1.01), 3.0 * fixed.M + 5.0)

    def negative_ll(u: float) -> float:
        return -ev.log_likelihood(_replace(fixed, target, float(u)))

    res = optimize.minimize_scalar(
        negative_ll,
        bounds=bracket,
        method="bounded",
        options={"xatol": 1e-9, "maxiter": 200},
    )
    if not res.success:
        raise RuntimeError(f"quadrature conditional MLE for {target} did not converge")
    estimate = float(res.x)
    info = _quad_fisher_entry(
        _replace(fixed, target, estimate), (target,), float(data.size)
    )[0, 0]
    if info <= 0:
        raise RuntimeError("non-positive quadrature information")
    return estimate, 1.0 / math.sqrt(info)


def build_prior_quadrature(data: np.ndarray, theory: ModelParams) -> PriorSpec:
    """Priors for (mu0, M) from quadrature conditional MLEs; m is structural."""
    mu0_hat, mu0_sigma = conditional_mle_quadrature("mu0", data, theory)
    M_hat, M_sigma = conditional_mle_quadrature("M", data, theory)
    return PriorSpec(
        mu0_prior=(mu0_hat, mu0_sigma),
        m_prior=(1.0, math.inf),
        M_prior=(M_hat, M_sigma),
        K_fixed=theory.K,
    )


def quadrature_posterior(
    data: np.ndarray,
    theory: ModelParams,
    axes: GridAxes | None = None,
    nodes: int = 61,
    span: float = 6.0,
) -> tuple[ParameterGrid, EstimateSummary]:
    """Two-axis (mu0, M) posterior at m = 1, K fixed, priors from
    conditional MLEs on the quadrature likelihood."""
    if abs(theory.m - 1.0) > 1e-9:
        raise ValueError("quadrature estimation requires m = 1")
    prior = build_prior_quadrature(data, theory)
    sig = {"mu0": prior.sigma("mu0"), "M": prior.sigma("M")}
    try:
        center = ModelParams(prior.mean("mu0"), 1.0, prior.mean("M"), prior.K_fixed)
        info = _quad_fisher_entry(center, ("M", "mu0"), float(data.size))
        info[0, 0] += 1.0 / prior.sigma("M") ** 2
        info[1, 1] += 1.0 / prior.sigma("mu0") ** 2
        cov = np.linalg.inv(info)
        sig["M"] = max(sig["M"], math.sqrt(max(cov[0, 0], 0.0)))
        sig["mu0"] = max(sig["mu0"], math.sqrt(max(cov[1, 1], 0.0)))
    except np.linalg.LinAlgError:
        pass
    if axes is None:
        axes = GridAxes(
            mu0=np.linspace(
                max(prior.mean("mu0") - span * sig["mu0"], 1e-4),
                prior.mean("mu0") + span * sig["mu0"],
                nodes,
            ),
            m=np.asarray([1.0]),
            M=np.linspace(
                max(prior.mean("M") - span * sig["M"], 1.05),
                prior.mean("M") + span * sig["M"],
                nodes,
            ),
            K_values=(prior.K_fixed,),
        )
    ev = QuadratureEvaluator(data)
    ll = np.full(axes.shape, -np.inf)
    params_list = []
    slots = []
    for i, mu0 in enumerate(axes.mu0):
        for j, M in enumerate(axes.M):
            if M - 1.0 > POLE_BAND or abs(M - 1.0) < EPS_POLE:
                params_list.append(ModelParams(float(mu0), 1.0, float(M), prior.K_fixed))
                slots.append((i, j))
    vals = ev.log_likelihood_batch(params_list)
    for (i, j), v in zip(slots, vals):
        ll[i, 0, j, 0] = v
    lp_mu0 = -0.5 * ((axes.mu0 - prior.mean("mu0")) / prior.sigma("mu0")) ** 2
    lp_M = -0.5 * ((axes.M - prior.mean("M")) / prior.sigma("M")) ** 2
    ll = ll + lp_mu0[:, None, None, None] + lp_M[None, None, :, None]
    grid = _warn_boundary(ParameterGrid(axes, ll), "quadrature posterior")
    summary = posterior_moments(grid, theory)
    return grid, summary


# --- conditional fiducial curves (verification views) ----------------------------


def conditional_fiducial_curve(
    data: CountHistogram,
    theory: ModelParams,
    target: str,
    values: np.ndarray,
    dark: DarkCountConfig | None = None,
) -> np.ndarray:
    """Normalized one-parameter fiducial slice: vary `target`, pin the rest
    at the theoretical values.  For target 'K' the values are integers and
    the result is a probability mass function."""
    values = np.asarray(values, dtype=np.float64)
    data_n, data_d = data.cells()
    rate = _dark_rate(dark)
    ll = np.empty(values.size)
    for i, v in enumerate(values):
        if target == "K":
            p = ModelParams(theory.mu0, theory.m, theory.M, int(v))
        else:
            p = _replace(theory, target, float(v))
        out, _ = _scan_nodes(
            np.asarray([p.mu0]),
            np.asarray([p.m]),
            np.asarray([p.M]),
            p.K,
            data_n,
            data_d,
            rate,
        )
        ll[i] = out[0]
    dens = np.exp(ll - ll.max())
    if target == "K":
        return dens / dens.sum()
    du = values[1] - values[0] if values.size > 1 else 1.0
    return dens / (dens.sum() * du)


def overlap_coefficient(f: np.ndarray, g: np.ndarray, spacing: float = 1.0) -> float:
    """Overlap of two normalized densities on a common lattice."""
    return float(np.sum(np.minimum(f, g)) * spacing)
