"""Plot-ready data files for the reference figures and the sample-size table.

Every target writes tab-separated columns (half-maximum level sets as
boundary-node coordinate lists) plus a structured report; nothing here
renders graphics.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from . import estimation as est
from . import io as mio
from . import sampling
from .distributions import (
    CountHistogram,
    ModelParams,
    mpsts_pmf,
    quadrature_pdf,
)
from .rng import SeededStream

WORKING_POINT = ModelParams(mu0=0.264, m=2, M=3, K=3)
WORKING_N = 58_623
QUAD_POINT = ModelParams(mu0=0.752, m=1, M=5, K=4)
QUAD_N = 138_710

# Published sample sizes for the three reconstruction methods.
REFERENCE_SAMPLE_SIZES = {
    ("no_prior", 0.10): 18e6,
    ("no_prior", 0.01): 42e7,
    ("fixed_m", 0.10): 1.2e6,
    ("fixed_m", 0.01): 4e6,
    ("bayesian", 0.10): 8e2,
    ("bayesian", 0.01): 5.8e4,
}

TARGETS = (
    "table1",
    "fig4a",
    "fig4b",
    "fig5",
    "fig6",
    "fig7",
    "fig8",
    "fig9",
)


def _half_max_boundary(grid: est.ParameterGrid) -> np.ndarray:
    """Node coordinates on the boundary of the half-maximum region.

    A node belongs to the boundary when it is inside the region (shifted log
    density >= -ln 2) and at least one lattice neighbor is outside, or it
    touches the array edge.
    """
    inside = grid.log_density >= -math.log(2.0)
    boundary = np.zeros_like(inside)
    for axis in range(inside.ndim):
        if inside.shape[axis] == 1:
            continue
        lo = np.roll(inside, 1, axis=axis)
        hi = np.roll(inside, -1, axis=axis)
        edge_lo = np.zeros_like(inside)
        edge_hi = np.zeros_like(inside)
        sl_lo = [slice(None)] * inside.ndim
        sl_lo[axis] = 0
        sl_hi = [slice(None)] * inside.ndim
        sl_hi[axis] = -1
        edge_lo[tuple(sl_lo)] = True
        edge_hi[tuple(sl_hi)] = True
        boundary |= inside & (~lo | edge_lo)
        boundary |= inside & (~hi | edge_hi)
    idx = np.argwhere(boundary)
    coords = np.empty((idx.shape[0], 4))
    coords[:, 0] = grid.axes.mu0[idx[:, 0]]
    coords[:, 1] = grid.axes.m[idx[:, 1]]
    coords[:, 2] = grid.axes.M[idx[:, 2]]
    coords[:, 3] = [grid.axes.K_values[i] for i in idx[:, 3]]
    return coords


def _boundary_of_mask(mask: np.ndarray) -> np.ndarray:
    """2-D boolean mask -> indices of inside nodes adjacent to the outside."""
    boundary = np.zeros_like(mask)
    for axis in range(2):
        lo = np.roll(mask, 1, axis=axis)
        hi = np.roll(mask, -1, axis=axis)
        edge_lo = np.zeros_like(mask)
        edge_hi = np.zeros_like(mask)
        sl = [slice(None), slice(None)]
        sl[axis] = 0
        edge_lo[tuple(sl)] = True
        sl[axis] = -1
        edge_hi[tuple(sl)] = True
        boundary |= mask & (~lo | edge_lo)
        boundary |= mask & (~hi | edge_hi)
    return np.argwhere(boundary)


def _broad_axes(nodes: int, kmax: int) -> est.GridAxes:
    return est.GridAxes(
        mu0=np.linspace(0.05, 0.60, nodes),
        m=np.linspace(0.5, 8.0, nodes),
        M=np.linspace(0.6, 12.0, nodes),
        K_values=tuple(range(1, kmax + 1)),
    )


def _fig4a_impl(out_dir: Path, seed: int, nodes: int) -> dict:
    data = sampling.sample_photocounts(WORKING_POINT, WORKING_N, SeededStream(seed, 40))
    fit = est.bayesian_fit(data, WORKING_POINT, nodes=nodes)
    recon = ModelParams(
        mu0=fit.summary.means["mu0"],
        m=fit.summary.means["m"],
        M=fit.summary.means["M"],
        K=WORKING_POINT.K,
    )
    nmax = max(data.max_count(), 14)
    theory = mpsts_pmf(WORKING_POINT, n_max=nmax).probabilities
    fitted = mpsts_pmf(recon, n_max=nmax).probabilities
    ns = np.arange(nmax + 1)
    empirical = np.asarray([data.counts.get(int(i), 0) / data.n for i in ns])
    path = out_dir / "fig4a.tsv"
    mio.write_table(
        path,
        ["N", "empirical_freq", "theory_pmf", "reconstructed_pmf"],
        [ns, empirical, theory, fitted],
    )
    return {
        "files": [path.name],
        "estimates": fit.summary.means,
        "sigmas": fit.summary.sigmas,
        "delta": fit.summary.delta,
    }


def _fig4b_impl(out_dir: Path, seed: int, nodes: int) -> dict:
    data = sampling.sample_quadratures(QUAD_POINT, QUAD_N, SeededStream(seed, 41))
    grid, summary = est.quadrature_posterior(data, QUAD_POINT, nodes=nodes)
    recon = ModelParams(
        mu0=summary.means["mu0"], m=1.0, M=summary.means["M"], K=QUAD_POINT.K
    )
    edges = np.linspace(-5.0, 5.0, 101)
    centers = 0.5 * (edges[1:] + edges[:-1])
    hist, _ = np.histogram(data, bins=edges, density=True)
    theory = quadrature_pdf(QUAD_POINT, centers)
    fitted = quadrature_pdf(recon, centers)
    path = out_dir / "fig4b.tsv"
    mio.write_table(
        path,
        ["Q", "empirical_density", "theory_density", "reconstructed_density"],
        [centers, hist, theory, fitted],
    )
    return {
        "files": [path.name],
        "estimates": summary.means,
        "sigmas": summary.sigmas,
        "delta": summary.delta,
    }


def _fig5_impl(out_dir: Path, seed: int, nodes: int, kmax: int) -> dict:
    files = []
    data = sampling.sample_photocounts(WORKING_POINT, WORKING_N, SeededStream(seed, 50))
    grid = est.fiducial_grid(data, _broad_axes(nodes, kmax))
    path_a = out_dir / "fig5a.tsv"
    coords = _half_max_boundary(grid)
    mio.write_table(
        path_a,
        ["K", "mu0", "m", "M"],
        [coords[:, 3].astype(int), coords[:, 0], coords[:, 1], coords[:, 2]],
    )
    files.append(path_a.name)

    big_n = 420_000_000
    data_b = sampling.sample_photocounts(
        WORKING_POINT, big_n, SeededStream(seed, 51)
    )
    axes_b = est.GridAxes(
        mu0=np.linspace(0.262, 0.266, nodes),
        m=np.linspace(1.96, 2.04, nodes),
        M=np.linspace(2.93, 3.07, nodes),
        K_values=(3,),
    )
    grid_b = est.fiducial_grid(data_b, axes_b)
    path_b = out_dir / "fig5b.tsv"
    coords_b = _half_max_boundary(grid_b)
    mio.write_table(
        path_b,
        ["K", "mu0", "m", "M"],
        [coords_b[:, 3].astype(int), coords_b[:, 0], coords_b[:, 1], coords_b[:, 2]],
    )
    files.append(path_b.name)
    return {"files": files, "n_a": WORKING_N, "n_b": big_n}


def _fig6_impl(out_dir: Path, seed: int, nodes: int, kmax: int) -> dict:
    files = []
    data = sampling.sample_photocounts(WORKING_POINT, WORKING_N, SeededStream(seed, 50))
    grid = est.fiducial_grid(data, _broad_axes(nodes, kmax))
    inside = grid.log_density >= -math.log(2.0)
    rows_K, rows_M, rows_m = [], [], []
    for kslot, K in enumerate(grid.axes.K_values):
        shadow = inside[:, :, :, kslot].any(axis=0)  # (m, M) plane
        for i, j in _boundary_of_mask(shadow):
            rows_K.append(K)
            rows_m.append(grid.axes.m[i])
            rows_M.append(grid.axes.M[j])
    path_a = out_dir / "fig6a.tsv"
    mio.write_table(
        path_a,
        ["K", "M", "m"],
        [np.asarray(rows_K), np.asarray(rows_M), np.asarray(rows_m)],
    )
    files.append(path_a.name)

    for label, n, stream in (("fig6b", WORKING_N, 52), ("fig6c", 4_000_000, 53)):
        data_s = sampling.sample_photocounts(WORKING_POINT, n, SeededStream(seed, stream))
        axes = est.GridAxes(
            mu0=np.linspace(0.15, 0.45, nodes),
            m=np.asarray([float(WORKING_POINT.m)]),
            M=np.linspace(1.0, 10.0, nodes),
            K_values=tuple(range(1, kmax + 1)),
        )
        grid_s = est.fiducial_grid(data_s, axes)
        coords = _half_max_boundary(grid_s)
        path = out_dir / f"{label}.tsv"
        mio.write_table(
            path,
            ["K", "mu0", "M"],
            [coords[:, 3].astype(int), coords[:, 0], coords[:, 2]],
        )
        files.append(path.name)
    return {"files": files}


def _fig7_impl(out_dir: Path, seed: int, nodes: int, kmax: int) -> dict:
    data = sampling.sample_photocounts(WORKING_POINT, WORKING_N, SeededStream(seed, 54))
    exact = CountHistogram.expected_from_pmf(mpsts_pmf(WORKING_POINT), WORKING_N)
    spans = {
        "m": np.linspace(1.9, 2.1, nodes),
        "M": np.linspace(2.8, 3.25, nodes),
        "mu0": np.linspace(0.255, 0.275, nodes),
        "K": np.arange(0, kmax + 1, dtype=float),
    }
    cols_param, cols_value, cols_sample, cols_exact = [], [], [], []
    for target, values in spans.items():
        f = est.conditional_fiducial_curve(data, WORKING_POINT, target, values)
        g = est.conditional_fiducial_curve(exact, WORKING_POINT, target, values)
        cols_param.extend([target] * values.size)
        cols_value.extend(values.tolist())
        cols_sample.extend(f.tolist())
        cols_exact.extend(g.tolist())
    path = out_dir / "fig7.tsv"
    mio.write_table(
        path,
        ["parameter", "value", "sample_fiducial", "exact_fiducial"],
        [np.asarray(cols_param), np.asarray(cols_value), np.asarray(cols_sample), np.asarray(cols_exact)],
    )
    return {"files": [path.name]}


def _fig8_impl(out_dir: Path, seed: int, nodes: int) -> dict:
    data = sampling.sample_photocounts(WORKING_POINT, WORKING_N, SeededStream(seed, 55))
    fit = est.bayesian_fit(data, WORKING_POINT, nodes=nodes)
    post_path = out_dir / "fig8_posterior.tsv"
    coords = _half_max_boundary(fit.grid)
    mio.write_table(
        post_path,
        ["mu0", "m", "M", "K"],
        [coords[:, 0], coords[:, 1], coords[:, 2], coords[:, 3].astype(int)],
    )
    axes = fit.grid.axes
    lp = np.zeros(fit.grid.log_density.shape)
    for dim, name in ((0, "mu0"), (1, "m"), (2, "M")):
        mean, sigma = fit.prior.mean(name), fit.prior.sigma(name)
        shape = [1, 1, 1, 1]
        shape[dim] = axes.axis(name).size
        lp = lp + (-0.5 * ((axes.axis(name) - mean) / sigma) ** 2).reshape(shape)
    prior_grid = est.ParameterGrid(axes, lp)
    prior_path = out_dir / "fig8_prior.tsv"
    coords_p = _half_max_boundary(prior_grid)
    mio.write_table(
        prior_path,
        ["mu0", "m", "M", "K"],
        [coords_p[:, 0], coords_p[:, 1], coords_p[:, 2], coords_p[:, 3].astype(int)],
    )
    return {
        "files": [prior_path.name, post_path.name],
        "estimates": fit.summary.means,
    }


def _fig9_impl(out_dir: Path, seed: int, nodes: int) -> dict:
    data = sampling.sample_quadratures(QUAD_POINT, QUAD_N, SeededStream(seed, 56))
    prior = est.build_prior_quadrature(data, QUAD_POINT)
    grid, summary = est.quadrature_posterior(data, QUAD_POINT, nodes=nodes)
    post_path = out_dir / "fig9_posterior.tsv"
    coords = _half_max_boundary(grid)
    mio.write_table(
        post_path, ["mu0", "M"], [coords[:, 0], coords[:, 2]]
    )
    axes = grid.axes
    lp = (
        -0.5 * ((axes.mu0[:, None] - prior.mean("mu0")) / prior.sigma("mu0")) ** 2
        - 0.5 * ((axes.M[None, :] - prior.mean("M")) / prior.sigma("M")) ** 2
    )
    prior_grid = est.ParameterGrid(axes, lp[:, None, :, None])
    prior_path = out_dir / "fig9_prior.tsv"
    coords_p = _half_max_boundary(prior_grid)
    mio.write_table(
        prior_path, ["mu0", "M"], [coords_p[:, 0], coords_p[:, 2]]
    )
    return {
        "files": [prior_path.name, post_path.name],
        "estimates": summary.means,
        "prior": {
            "mu0": {"mean": prior.mean("mu0"), "sigma": prior.sigma("mu0")},
            "M": {"mean": prior.mean("M"), "sigma": prior.sigma("M")},
        },
    }


def _table1_impl(out_dir: Path, seed: int, nodes: int, seeds: int) -> dict:
    rows = []
    for delta in (0.10, 0.01):
        for method in ("no_prior", "fixed_m", "bayesian"):
            n = est.required_sample_size(
                method,
                delta,
                WORKING_POINT,
                seeds=seeds,
                base_seed=seed,
                nodes=nodes,
            )
            rows.append((method, delta, n, REFERENCE_SAMPLE_SIZES[(method, delta)]))
    path = out_dir / "table1.tsv"
    mio.write_table(
        path,
        ["method", "delta_target", "computed_n", "reference_n"],
        [
            np.asarray([r[0] for r in rows]),
            np.asarray([r[1] for r in rows]),
            np.asarray([r[2] for r in rows]),
            np.asarray([r[3] for r in rows]),
        ],
    )
    report = {"files": [path.name]}
    for method, delta, n, ref in rows:
        report[f"{method}.delta_{int(delta * 100)}pct"] = {
            "computed": int(n),
            "reference": ref,
            "ratio": n / ref,
        }
    return {"table": report, "files": [path.name]}


def run_target(
    target: str,
    out_dir: str | Path,
    seed: int = 1,
    nodes: int = 61,
    kmax: int = 10,
    seeds: int = 10,
) -> dict:
    """Generate one reproduction target into out_dir; returns report data."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if target == "table1":
        return _table1_impl(out, seed, nodes, seeds)
    if target == "fig4a":
        return _fig4a_impl(out, seed, nodes)
    if target == "fig4b":
        return _fig4b_impl(out, seed, nodes)
    if target == "fig5":
        return _fig5_impl(out, seed, nodes, kmax)
    if target == "fig6":
        return _fig6_impl(out, seed, nodes, kmax)
    if target == "fig7":
        return _fig7_impl(out, seed, nodes, kmax)
    if target == "fig8":
        return _fig8_impl(out, seed, nodes)
    if target == "fig9":
        return _fig9_impl(out, seed, nodes)
    raise ValueError(f"unknown reproduction target {target!r}")
