"""End-to-end command-line behavior: file outputs, exit codes, report
reproducibility, and the simulate -> pipeline -> fit round trip."""

import pytest

from mpsts import io as mio
from mpsts.cli import EXIT_BOUNDARY, EXIT_ERROR, EXIT_OK, EXIT_USAGE, main


def run(argv):
    return main(argv)


def strip_meta(text: str) -> str:
    return "\n".join(
        line for line in text.splitlines() if not line.startswith("meta.")
    )


class TestSimulate:
    def test_photocount_writes_requested_total(self, tmp_path):
        out = tmp_path / "hist.tsv"
        code = run(
            [
                "simulate", "photocount", "--mu0", "0.264", "--m", "2", "--M", "3",
                "--K", "3", "--n", "5000", "--seed", "1", "--out", str(out),
            ]
        )
        assert code == EXIT_OK
        hist, meta = mio.read_histogram(out)
        assert hist.n == 5000
        assert meta["m"] == 2 and meta["K"] == 3

    def test_zero_n_rejected(self, tmp_path):
        code = run(
            [
                "simulate", "photocount", "--mu0", "0.264", "--m", "2", "--M", "3",
                "--K", "3", "--n", "0", "--seed", "1",
                "--out", str(tmp_path / "x.tsv"),
            ]
        )
        assert code == EXIT_USAGE

    def test_quadrature_line_count(self, tmp_path):
        out = tmp_path / "quad.tsv"
        code = run(
            [
                "simulate", "quadrature", "--mu0", "0.752", "--M", "5", "--K", "4",
                "--n", "1000", "--seed", "2", "--out", str(out),
            ]
        )
        assert code == EXIT_OK
        values, meta = mio.read_quadratures(out)
        assert values.size == 1000 and meta["n"] == 1000

    def test_oracle_reports_acceptance(self, tmp_path):
        out = tmp_path / "oracle.tsv"
        code = run(
            [
                "simulate", "oracle", "--mu0", "0.5", "--m", "1", "--M", "2",
                "--K", "1", "--n", "2000", "--seed", "3", "--out", str(out),
            ]
        )
        assert code == EXIT_OK
        report = (tmp_path / "oracle.tsv.report").read_text()
        assert "oracle.acceptance_rate:" in report

    def test_deterministic_given_seed(self, tmp_path):
        args = [
            "simulate", "photocount", "--mu0", "0.264", "--m", "2", "--M", "3",
            "--K", "3", "--n", "2000", "--seed", "7",
        ]
        run(args + ["--out", str(tmp_path / "a.tsv")])
        run(args + ["--out", str(tmp_path / "b.tsv")])
        assert (tmp_path / "a.tsv").read_text() == (tmp_path / "b.tsv").read_text()


@pytest.fixture(scope="module")
def photocount_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("fit") / "hist.tsv"
    run(
        [
            "simulate", "photocount", "--mu0", "0.264", "--m", "2", "--M", "3",
            "--K", "3", "--n", "58623", "--seed", "11", "--out", str(path),
        ]
    )
    return path


class TestFit:
    def test_bayes_fit_reaches_small_delta(self, tmp_path, photocount_file):
        out = tmp_path / "fit.report"
        dump = tmp_path / "grids"
        code = run(
            [
                "fit", "photocount", str(photocount_file),
                "--prior", "bayes:mu0=0.264,m=2,M=3,K=3",
                "--no-dark", "--grid-nodes", "41",
                "--dump-grids", str(dump), "--out", str(out),
            ]
        )
        assert code == EXIT_OK
        text = out.read_text()
        delta = float(next(l for l in text.splitlines() if l.startswith("estimates.delta:")).split(": ")[1])
        assert delta <= 0.015
        assert "condition_numbers.fisher:" in text
        assert (dump / "marginal_mu0.tsv").exists()

    def test_fit_report_reproducible(self, tmp_path, photocount_file):
        out = tmp_path / "fit.report"
        args = [
            "fit", "photocount", str(photocount_file),
            "--prior", "bayes:mu0=0.264,m=2,M=3,K=3",
            "--no-dark", "--grid-nodes", "31", "--out", str(out),
        ]
        run(args)
        first = strip_meta(out.read_text())
        run(args)
        assert strip_meta(out.read_text()) == first

    def test_none_prior_on_tiny_data(self, tmp_path):
        hist = tmp_path / "tiny.tsv"
        run(
            [
                "simulate", "photocount", "--mu0", "0.264", "--m", "2", "--M", "3",
                "--K", "3", "--n", "100", "--seed", "12", "--out", str(hist),
            ]
        )
        out = tmp_path / "tiny.report"
        code = run(
            [
                "fit", "photocount", str(hist), "--prior", "none", "--no-dark",
                "--grid-nodes", "15", "--kmax", "6", "--out", str(out),
            ]
        )
        assert code in (EXIT_OK, EXIT_BOUNDARY)  # wide marginals; no crash
        text = out.read_text()
        assert "estimates.sigmas.mu0:" in text

    def test_fixed_m_quadrature_two_parameter_report(self, tmp_path):
        quad = tmp_path / "quad.tsv"
        run(
            [
                "simulate", "quadrature", "--mu0", "0.752", "--M", "5", "--K", "4",
                "--n", "4000", "--seed", "13", "--out", str(quad),
            ]
        )
        out = tmp_path / "quad.report"
        code = run(
            [
                "fit", "quadrature", str(quad), "--prior", "fixed:m=1,K=4",
                "--grid-nodes", "21", "--out", str(out),
            ]
        )
        assert code in (EXIT_OK, EXIT_BOUNDARY)
        text = out.read_text()
        delta_line = next(
            l for l in text.splitlines() if l.startswith("estimates.delta_params:")
        )
        assert delta_line.split(": ")[1].split() == ["mu0", "M"]

    def test_boundary_escalates_exit_code(self, tmp_path, photocount_file):
        out = tmp_path / "edge.report"
        code = run(
            [
                "fit", "photocount", str(photocount_file), "--prior", "fixed:K=3",
                "--no-dark", "--grid-nodes", "11",
                "--mu0-range", "0.5:0.9",  # excludes the truth: mode on edge
                "--out", str(out),
            ]
        )
        assert code == EXIT_BOUNDARY

    def test_missing_file_errors(self, tmp_path):
        code = run(
            [
                "fit", "photocount", str(tmp_path / "nope.tsv"),
                "--prior", "none", "--out", str(tmp_path / "r"),
            ]
        )
        assert code == EXIT_ERROR


class TestPipeline:
    def test_trace_to_datasets_roundtrip(self, tmp_path):
        trace = tmp_path / "trace.tsv"
        code = run(
            [
                "simulate", "trace", "--mu0", "0.4", "--duration", "2.0",
                "--tap-ratio", "0.05", "--seed", "14", "--out", str(trace),
            ]
        )
        assert code == EXIT_OK
        out_dir = tmp_path / "grouped"
        code = run(
            [
                "pipeline", str(trace), "--tau", "1e-5", "--period", "48e-5",
                "--M", "3", "--m", "2", "--out-dir", str(out_dir),
            ]
        )
        assert code == EXIT_OK
        report = (out_dir / "pipeline.report").read_text()
        frac = float(
            next(
                l for l in report.splitlines()
                if l.startswith("pipeline.retained_fraction:")
            ).split(": ")[1]
        )
        assert frac == pytest.approx(1 / 48, rel=0.02)
        hists = list(out_dir.glob("photocounts_*.tsv"))
        assert hists

    def test_trace_without_quadratures(self, tmp_path):
        trace = tmp_path / "noq.tsv"
        trace.write_text(
            "# mpsts-trace v1\n# duration_seconds=0.001\n"
            "1e-05\tn\t1\n2e-05\tk\t1\n5e-05\tn\t1\n"
        )
        out_dir = tmp_path / "grouped"
        code = run(
            [
                "pipeline", str(trace), "--tau", "1e-5", "--period", "1e-5",
                "--M", "2", "--m", "1", "--out-dir", str(out_dir),
            ]
        )
        assert code == EXIT_OK
        quads = sorted(out_dir.glob("quadratures_*.tsv"))
        assert quads
        for q in quads:
            values, _ = mio.read_quadratures(q)
            assert values.size == 0
        hists = sorted(out_dir.glob("photocounts_*.tsv"))
        total = sum(mio.read_histogram(h)[0].n for h in hists)
        assert total > 0

    def test_malformed_trace_reports_line(self, tmp_path, capsys):
        trace = tmp_path / "bad.tsv"
        trace.write_text("# mpsts-trace v1\n1e-6\tk\t1\nbroken\n")
        code = run(
            [
                "pipeline", str(trace), "--tau", "1e-5", "--period", "1e-5",
                "--M", "2", "--m", "1", "--out-dir", str(tmp_path / "o"),
            ]
        )
        assert code == EXIT_ERROR
        assert "line 3" in capsys.readouterr().err

    def test_round_trip_recovers_mu0(self, tmp_path):
        # simulate trace -> pipeline -> fit: fitted mu0 within 3 sigma of the
        # moment estimate implied by the generator
        trace = tmp_path / "trace.tsv"
        run(
            [
                "simulate", "trace", "--mu0", "0.4", "--duration", "3.0",
                "--tap-ratio", "0.03", "--seed", "15", "--out", str(trace),
            ]
        )
        out_dir = tmp_path / "grouped"
        run(
            [
                "pipeline", str(trace), "--tau", "1e-5", "--period", "48e-5",
                "--M", "3", "--m", "2", "--out-dir", str(out_dir),
            ]
        )
        hist_path = out_dir / "photocounts_m2_M3_K0.tsv"
        out = tmp_path / "fit.report"
        code = run(
            [
                "fit", "photocount", str(hist_path),
                "--prior", "fixed:m=2,M=3,K=0", "--no-dark",
                "--grid-nodes", "61", "--mu0-range", "0.25:0.6",
                "--out", str(out),
            ]
        )
        assert code == EXIT_OK
        text = out.read_text()
        mean = float(next(l for l in text.splitlines() if l.startswith("estimates.means.mu0:")).split(": ")[1])
        sigma = float(next(l for l in text.splitlines() if l.startswith("estimates.sigmas.mu0:")).split(": ")[1])
        assert abs(mean - 0.4) < max(3 * sigma, 0.02)


class TestReproduce:
    def test_fig7_output(self, tmp_path):
        code = run(
            [
                "reproduce", "fig7", "--seed", "1", "--out-dir", str(tmp_path),
                "--grid-nodes", "21", "--kmax", "6",
            ]
        )
        assert code == EXIT_OK
        text = (tmp_path / "fig7.tsv").read_text()
        assert text.startswith("# parameter\tvalue\tsample_fiducial\texact_fiducial")
        for name in ("m", "M", "mu0", "K"):
            assert f"\n{name}\t" in text

    def test_fig4a_deterministic(self, tmp_path):
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        for d in (a_dir, b_dir):
            code = run(
                [
                    "reproduce", "fig4a", "--seed", "5", "--out-dir", str(d),
                    "--grid-nodes", "21",
                ]
            )
            assert code == EXIT_OK
        assert (a_dir / "fig4a.tsv").read_text() == (b_dir / "fig4a.tsv").read_text()

    def test_usage_error_on_unknown_target(self, tmp_path):
        assert run(["reproduce", "fig99", "--out-dir", str(tmp_path)]) == EXIT_USAGE
