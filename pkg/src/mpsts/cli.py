"""Command-line interface: simulate, fit, pipeline, reproduce.

All numeric results go to files; diagnostics to stderr.  Exit codes: 0 on
success, 1 on runtime errors, 2 on usage errors, 3 when a fit's grid mode
lands on an axis boundary (escalated warning).
"""

from __future__ import annotations

import argparse
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import estimation as est
from . import io as mio
from . import kernels, reproduce, sampling
from .distributions import CountHistogram, DarkCountConfig, ModelParams
from .pipeline import PipelineConfig, bin_trace, group_and_select, thin_bins
from .rng import SeededStream

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_BOUNDARY = 3

# stream ids per simulation kind keep outputs independent at a shared seed
_STREAM_IDS = {"photocount": 1, "quadrature": 2, "trace": 3, "oracle": 4}


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mu0", type=float, help="per-mode mean photon number")
    p.add_argument("--m", type=float, help="observed modes")
    p.add_argument("--M", type=float, help="total modes")
    p.add_argument("--K", type=int, help="subtracted photons")


def _dark_flag(p: argparse.ArgumentParser, default: bool) -> None:
    p.add_argument(
        "--dark",
        action=argparse.BooleanOptionalAction,
        default=default,
        help="fold Poisson dark counts (0.0015 per mode) into the model",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpsts",
        description="Photocount and quadrature statistics of multimode "
        "photon-subtracted thermal light",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate synthetic datasets")
    sim.add_argument("kind", choices=("photocount", "quadrature", "trace", "oracle"))
    _add_param_flags(sim)
    sim.add_argument("--n", type=int, help="sample size")
    sim.add_argument("--seed", type=int, default=1)
    sim.add_argument("--out", required=True)
    _dark_flag(sim, default=False)
    sim.add_argument("--duration", type=float, help="trace duration, seconds")
    sim.add_argument("--tap-ratio", type=float, default=0.1)
    sim.add_argument("--t-coh", type=float, default=40e-6)

    fit = sub.add_parser("fit", help="estimate state parameters from data")
    fit.add_argument("kind", choices=("photocount", "quadrature"))
    fit.add_argument("data", help="histogram or quadrature file")
    fit.add_argument(
        "--prior",
        default="none",
        help="none | fixed:<p=v,...> | bayes:<mu0=..,m=..,M=..,K=..>",
    )
    fit.add_argument("--grid-nodes", type=int, default=61)
    fit.add_argument("--kmax", type=int, default=10)
    fit.add_argument("--seed", type=int, default=1)
    fit.add_argument("--out", required=True)
    fit.add_argument("--dump-grids", help="directory for grid node dumps")
    fit.add_argument("--mu0-range", help="lo:hi override for the mu0 axis")
    fit.add_argument("--m-range", help="lo:hi override for the m axis")
    fit.add_argument("--M-range", help="lo:hi override for the M axis")
    _dark_flag(fit, default=True)

    pipe = sub.add_parser("pipeline", help="bin/thin/group a detector trace")
    pipe.add_argument("trace", help="trace file")
    pipe.add_argument("--tau", type=float, default=10e-6)
    pipe.add_argument("--period", type=float, default=480e-6)
    pipe.add_argument("--M", type=int, required=True)
    pipe.add_argument("--m", type=int, required=True)
    pipe.add_argument("--out-dir", required=True)

    rep = sub.add_parser("reproduce", help="emit reference figure/table data")
    rep.add_argument("target", choices=reproduce.TARGETS)
    rep.add_argument("--seed", type=int, default=1)
    rep.add_argument("--out-dir", required=True)
    rep.add_argument("--grid-nodes", type=int, default=61)
    rep.add_argument("--kmax", type=int, default=10)
    rep.add_argument("--seeds", type=int, default=10, help="seeds per Bayesian point")
    return parser


def _require(args, names: list[str]) -> None:
    missing = [n for n in names if getattr(args, n.replace("-", "_")) is None]
    if missing:
        raise UsageError(f"missing required flags: {', '.join('--' + n for n in missing)}")


class UsageError(ValueError):
    pass


def _params_from_args(args, m_override: float | None = None) -> ModelParams:
    m = args.m if m_override is None else m_override
    return ModelParams(mu0=args.mu0, m=m, M=args.M, K=args.K)


def _report_base(argv: list[str]) -> dict:
    return {
        "command": "mpsts " + " ".join(argv),
        "backend": kernels.backend_name(),
    }


def _finish_report(report: dict, out_path: str | Path, t0: float, warns) -> None:
    report["warnings"] = {
        "count": len(warns),
        "messages": [str(w.message) for w in warns],
    }
    report["meta"] = {"wall_seconds": time.time() - t0}
    text = mio.write_report(out_path, report)
    sys.stderr.write(f"report written to {out_path}\n")
    _ = text


def cmd_simulate(args, argv) -> int:
    t0 = time.time()
    report = _report_base(argv)
    out = Path(args.out)
    stream = SeededStream(args.seed, _STREAM_IDS[args.kind])
    dark = DarkCountConfig() if args.dark else None
    with warnings.catch_warnings(record=True) as warns:
        warnings.simplefilter("always")
        if args.kind == "photocount":
            _require(args, ["mu0", "m", "M", "K", "n"])
            if args.n < 1:
                raise UsageError("--n must be >= 1")
            params = _params_from_args(args)
            hist = sampling.sample_photocounts(params, args.n, stream, dark)
            mio.write_histogram(out, hist, int(params.m), int(params.M), params.K)
            report["output"] = {"path": str(out), "n": int(hist.n)}
        elif args.kind == "quadrature":
            _require(args, ["mu0", "M", "K", "n"])
            if args.n < 1:
                raise UsageError("--n must be >= 1")
            params = _params_from_args(args, m_override=1.0)
            values = sampling.sample_quadratures(params, args.n, stream)
            mio.write_quadratures(out, values, 1, int(params.M), params.K)
            report["output"] = {"path": str(out), "n": int(values.size)}
        elif args.kind == "oracle":
            _require(args, ["mu0", "m", "M", "K", "n"])
            if args.n < 1:
                raise UsageError("--n must be >= 1")
            res = sampling.physical_subtraction_oracle(
                args.mu0, int(args.m), int(args.M), args.K, args.n, stream
            )
            mio.write_histogram(out, res.histogram, int(args.m), int(args.M), args.K)
            report["output"] = {"path": str(out), "n": int(res.histogram.n)}
            report["oracle"] = {
                "attempts": res.attempts,
                "acceptance_rate": res.acceptance_rate,
            }
        else:  # trace
            _require(args, ["mu0", "duration"])
            trace = sampling.synthesize_trace(
                args.mu0, args.t_coh, args.duration, args.tap_ratio, stream
            )
            mio.write_trace(out, trace)
            report["output"] = {
                "path": str(out),
                "clicks_k": int(trace.dk_click_times.size),
                "clicks_n": int(trace.dn_click_times.size),
                "hd_samples": int(trace.hd_samples.shape[0]),
            }
        report["output"]["sha256"] = mio.sha256_digest(out)
        _finish_report(report, out.with_suffix(out.suffix + ".report"), t0, warns)
    return EXIT_OK


def _parse_assignments(raw: str) -> dict[str, float]:
    out = {}
    for part in raw.split(","):
        if not part:
            continue
        if "=" not in part:
            raise UsageError(f"bad assignment {part!r} (expected name=value)")
        name, value = part.split("=", 1)
        name = name.strip()
        if name not in ("mu0", "m", "M", "K"):
            raise UsageError(f"unknown parameter {name!r}")
        out[name] = float(value)
    return out


def _parse_range(raw: str | None, default: tuple[float, float]) -> tuple[float, float]:
    if raw is None:
        return default
    try:
        lo, hi = raw.split(":")
        return float(lo), float(hi)
    except ValueError:
        raise UsageError(f"bad range {raw!r} (expected lo:hi)") from None


def _default_photocount_axes(
    data: CountHistogram, args, fixed: dict[str, float]
) -> est.GridAxes:
    """Broad moment-guided axes for no-prior / fixed-parameter fits."""
    nodes = args.grid_nodes
    mean = max(data.mean(), 1e-3)

    def axis(name, default_range):
        if name in fixed:
            return np.asarray([fixed[name]])
        lo, hi = _parse_range(getattr(args, f"{name}_range"), default_range)
        return np.linspace(lo, hi, nodes)

    return est.GridAxes(
        mu0=axis("mu0", (0.05 * mean, 1.5 * mean + 0.05)),
        m=axis("m", (0.5, 8.0)),
        M=axis("M", (0.6, 12.0)),
        K_values=(int(fixed["K"]),) if "K" in fixed else tuple(range(args.kmax + 1)),
    )


def cmd_fit(args, argv) -> int:
    t0 = time.time()
    report = _report_base(argv)
    report["input"] = {"path": args.data, "sha256": mio.sha256_digest(args.data)}
    dark = DarkCountConfig() if args.dark else None
    mode = args.prior.split(":", 1)[0]
    boundary = False
    with warnings.catch_warnings(record=True) as warns:
        warnings.simplefilter("always")
        if args.kind == "photocount":
            data, meta = mio.read_histogram(args.data)
            report["input"]["n"] = data.n
            report["input"]["meta"] = meta
            if mode == "bayes":
                theory_vals = _parse_assignments(args.prior.split(":", 1)[1])
                theory = ModelParams(
                    mu0=theory_vals["mu0"],
                    m=theory_vals["m"],
                    M=theory_vals["M"],
                    K=int(theory_vals["K"]),
                )
                fit = est.bayesian_fit(data, theory, dark, nodes=args.grid_nodes)
                grid, summary = fit.grid, fit.summary
                report["prior"] = {
                    name: {"mean": fit.prior.mean(name), "sigma": fit.prior.sigma(name)}
                    for name in ("mu0", "m", "M")
                }
                report["condition_numbers"] = {
                    "fisher": est.condition_number(fit.fisher),
                    "posterior": est.condition_number(fit.posterior_info),
                }
            elif mode in ("none", "fixed"):
                fixed = (
                    _parse_assignments(args.prior.split(":", 1)[1])
                    if mode == "fixed"
                    else {}
                )
                axes = _default_photocount_axes(data, args, fixed)
                grid = est.fiducial_grid(data, axes, dark)
                reference = grid.argmax_params()
                summary = est.posterior_moments(grid, reference)
            else:
                raise UsageError(f"unknown prior mode {args.prior!r}")
        else:  # quadrature
            values, meta = mio.read_quadratures(args.data)
            report["input"]["n"] = int(values.size)
            report["input"]["meta"] = meta
            if mode == "bayes":
                theory_vals = _parse_assignments(args.prior.split(":", 1)[1])
                theory = ModelParams(
                    mu0=theory_vals["mu0"],
                    m=1.0,
                    M=theory_vals["M"],
                    K=int(theory_vals["K"]),
                )
                prior = est.build_prior_quadrature(values, theory)
                grid, summary = est.quadrature_posterior(
                    values, theory, nodes=args.grid_nodes
                )
                report["prior"] = {
                    name: {"mean": prior.mean(name), "sigma": prior.sigma(name)}
                    for name in ("mu0", "M")
                }
            elif mode in ("none", "fixed"):
                fixed = (
                    _parse_assignments(args.prior.split(":", 1)[1])
                    if mode == "fixed"
                    else {}
                )
                fixed.setdefault("m", 1.0)
                var_hint = max(float(np.var(values)) - 0.5, 1e-3)
                if "mu0" in fixed:
                    mu0_axis = np.asarray([fixed["mu0"]])
                else:
                    lo, hi = _parse_range(
                        args.mu0_range, (0.05 * var_hint, 2.5 * var_hint + 0.05)
                    )
                    mu0_axis = np.linspace(lo, hi, args.grid_nodes)
                if "M" in fixed:
                    M_axis = np.asarray([fixed["M"]])
                else:
                    lo, hi = _parse_range(args.M_range, (1.05, 12.0))
                    M_axis = np.linspace(lo, hi, args.grid_nodes)
                ks = (
                    (int(fixed["K"]),)
                    if "K" in fixed
                    else tuple(range(args.kmax + 1))
                )
                ev = est.QuadratureEvaluator(values)
                axes = est.GridAxes(
                    mu0=mu0_axis, m=np.asarray([1.0]), M=M_axis, K_values=ks
                )
                ll = np.full(axes.shape, -np.inf)
                for kslot, K in enumerate(axes.K_values):
                    plist, slots = [], []
                    for i, mu0 in enumerate(axes.mu0):
                        for j, M in enumerate(axes.M):
                            if M - 1.0 > est.POLE_BAND or abs(M - 1.0) < est.EPS_POLE:
                                plist.append(ModelParams(float(mu0), 1.0, float(M), K))
                                slots.append((i, j))
                    vals = ev.log_likelihood_batch(plist)
                    for (i, j), v in zip(slots, vals):
                        ll[i, 0, j, kslot] = v
                grid = est.ParameterGrid(axes, ll)
                if grid.boundary_max:
                    warnings.warn(
                        "quadrature fiducial maximum lies on a grid boundary",
                        est.BoundaryMaximumWarning,
                    )
                summary = est.posterior_moments(grid, grid.argmax_params())
            else:
                raise UsageError(f"unknown prior mode {args.prior!r}")

        boundary = grid.boundary_max
        report["estimates"] = {
            "means": summary.means,
            "sigmas": summary.sigmas,
            "delta": summary.delta,
            "delta_params": list(summary.delta_params),
        }
        report["grid"] = {
            "shape": list(grid.log_density.shape),
            "normalization": grid.normalization,
            "boundary_max": grid.boundary_max,
            "floor_cells": grid.floor_cells,
            "argmax": {
                "mu0": grid.argmax_params().mu0,
                "m": grid.argmax_params().m,
                "M": grid.argmax_params().M,
                "K": grid.argmax_params().K,
            },
        }
        if args.dump_grids:
            dump_dir = Path(args.dump_grids)
            dump_dir.mkdir(parents=True, exist_ok=True)
            for name in ("mu0", "m", "M", "K"):
                vals, mass = grid.marginal(name)
                mio.write_table(
                    dump_dir / f"marginal_{name}.tsv",
                    [name, "mass"],
                    [vals, mass],
                )
            report["grid"]["dumped_to"] = str(dump_dir)
        _finish_report(report, args.out, t0, warns)
    return EXIT_BOUNDARY if boundary else EXIT_OK


def cmd_pipeline(args, argv) -> int:
    t0 = time.time()
    report = _report_base(argv)
    report["input"] = {"path": args.trace, "sha256": mio.sha256_digest(args.trace)}
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with warnings.catch_warnings(record=True) as warns:
        warnings.simplefilter("always")
        trace = mio.read_trace(args.trace)
        config = PipelineConfig(tau=args.tau, period=args.period)
        bins = bin_trace(trace, config)
        kept = thin_bins(bins, config)
        groups = group_and_select(kept, args.M, args.m)
        report["pipeline"] = {
            "bins": len(bins),
            "retained_bins": len(kept),
            "retained_fraction": len(kept) / max(len(bins), 1),
            "stride": config.thinning_stride,
            "groups_per_K": {str(K): g.group_count for K, g in groups.items()},
        }
        files = []
        for K, g in groups.items():
            hist_path = out_dir / f"photocounts_m{args.m}_M{args.M}_K{K}.tsv"
            mio.write_histogram(hist_path, g.photocounts, args.m, args.M, K)
            files.append(hist_path.name)
            quad_path = out_dir / f"quadratures_m{args.m}_M{args.M}_K{K}.tsv"
            mio.write_quadratures(quad_path, g.quadratures, args.m, args.M, K)
            files.append(quad_path.name)
        report["output"] = {"dir": str(out_dir), "files": files}
        _finish_report(report, out_dir / "pipeline.report", t0, warns)
    return EXIT_OK


def cmd_reproduce(args, argv) -> int:
    t0 = time.time()
    report = _report_base(argv)
    with warnings.catch_warnings(record=True) as warns:
        warnings.simplefilter("always")
        result = reproduce.run_target(
            args.target,
            args.out_dir,
            seed=args.seed,
            nodes=args.grid_nodes,
            kmax=args.kmax,
            seeds=args.seeds,
        )
        report["reproduce"] = {"target": args.target, **result}
        _finish_report(report, Path(args.out_dir) / f"{args.target}.report", t0, warns)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    handlers = {
        "simulate": cmd_simulate,
        "fit": cmd_fit,
        "pipeline": cmd_pipeline,
        "reproduce": cmd_reproduce,
    }
    try:
        return handlers[args.command](args, argv)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except (mio.TraceFormatError, ValueError, OSError, RuntimeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
