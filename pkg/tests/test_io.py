"""File formats: roundtrips, malformed-line diagnostics, report rendering."""

import numpy as np
import pytest

from mpsts import io as mio
from mpsts import sampling
from mpsts.distributions import CountHistogram
from mpsts.rng import SeededStream


class TestTraceFormat:
    def test_roundtrip(self, tmp_path):
        trace = sampling.synthesize_trace(0.4, 40e-6, 0.01, 0.1, SeededStream(70))
        path = tmp_path / "trace.tsv"
        mio.write_trace(path, trace)
        back = mio.read_trace(path)
        np.testing.assert_array_equal(back.dk_click_times, trace.dk_click_times)
        np.testing.assert_array_equal(back.dn_click_times, trace.dn_click_times)
        np.testing.assert_array_equal(back.hd_samples, trace.hd_samples)
        assert back.duration == trace.duration

    def test_malformed_line_reports_number(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("# mpsts-trace v1\n1e-6\tk\t1\nbogus line\n")
        with pytest.raises(mio.TraceFormatError, match="line 3"):
            mio.read_trace(path)

    def test_unknown_channel_rejected(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("# mpsts-trace v1\n1e-6\tz\t1\n")
        with pytest.raises(mio.TraceFormatError, match="line 2"):
            mio.read_trace(path)

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("1e-6\tk\t1\n")
        with pytest.raises(mio.TraceFormatError, match="line 1"):
            mio.read_trace(path)


class TestHistogramFormat:
    def test_roundtrip_with_metadata(self, tmp_path):
        hist = CountHistogram({0: 100, 1: 52, 3: 7})
        path = tmp_path / "hist.tsv"
        mio.write_histogram(path, hist, m=2, M=3, K=3)
        back, meta = mio.read_histogram(path)
        assert back == hist
        assert meta["m"] == 2 and meta["M"] == 3 and meta["K"] == 3
        assert meta["n"] == hist.n

    def test_non_integer_counts_roundtrip(self, tmp_path):
        hist = CountHistogram({0: 10.25, 2: 1.5})
        path = tmp_path / "hist.tsv"
        mio.write_histogram(path, hist, m=1, M=1, K=0)
        back, _ = mio.read_histogram(path)
        assert back.counts == hist.counts

    def test_malformed_row(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("# mpsts-histogram v1\n0\tx\n")
        with pytest.raises(mio.TraceFormatError, match="line 2"):
            mio.read_histogram(path)


class TestQuadratureFormat:
    def test_roundtrip_full_precision(self, tmp_path):
        values = np.asarray([0.1234567890123456, -2.5, 1e-17])
        path = tmp_path / "quad.tsv"
        mio.write_quadratures(path, values, m=1, M=5, K=4)
        back, meta = mio.read_quadratures(path)
        np.testing.assert_array_equal(back, values)
        assert meta["n"] == 3


class TestReports:
    def test_deterministic_rendering(self):
        sections = {
            "command": "mpsts fit photocount data.tsv",
            "estimate": {"mu0": {"mean": 0.264123, "sigma": 0.001}},
            "flags": {"dark": True},
            "values": [1, 2.5, "x"],
        }
        a = mio.format_report(sections)
        b = mio.format_report(sections)
        assert a == b
        assert "estimate.mu0.mean: 0.264123" in a
        assert "flags.dark: true" in a
        assert a.startswith("# mpsts-report v1\n")

    def test_write_table(self, tmp_path):
        path = tmp_path / "cols.tsv"
        mio.write_table(path, ["N", "P"], [np.arange(3), np.asarray([0.5, 0.3, 0.2])])
        lines = path.read_text().splitlines()
        assert lines[0] == "# N\tP"
        assert lines[1] == "0\t0.5"
