"""File formats and structured-text reports.

Three tab-separated v1 formats (trace, histogram, quadrature) plus a
diff-friendly key-value report.  Malformed input lines raise with the
offending line number.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from .distributions import CountHistogram
from .pipeline import TimeTrace

TRACE_HEADER = "# mpsts-trace v1"
HISTOGRAM_HEADER = "# mpsts-histogram v1"
QUADRATURE_HEADER = "# mpsts-quadrature v1"


class TraceFormatError(ValueError):
    """Malformed trace line; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def write_trace(path: str | Path, trace: TimeTrace) -> None:
    rows = []
    for t in trace.dk_click_times:
        rows.append((float(t), "k", "1"))
    for t in trace.dn_click_times:
        rows.append((float(t), "n", "1"))
    for t, q in trace.hd_samples:
        rows.append((float(t), "q", repr(float(q))))
    rows.sort(key=lambda r: (r[0], r[1]))
    with open(path, "w") as fh:
        fh.write(TRACE_HEADER + "\n")
        fh.write(f"# duration_seconds={float(trace.duration)!r}\n")
        for t, channel, value in rows:
            fh.write(f"{t!r}\t{channel}\t{value}\n")


def read_trace(path: str | Path) -> TimeTrace:
    dk, dn, hd = [], [], []
    duration = None
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        if first != TRACE_HEADER:
            raise TraceFormatError(1, f"expected header {TRACE_HEADER!r}")
        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# duration_seconds="):
                    duration = float(line.split("=", 1)[1])
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise TraceFormatError(line_no, "expected 3 tab-separated fields")
            try:
                t = float(parts[0])
            except ValueError:
                raise TraceFormatError(line_no, f"bad time {parts[0]!r}") from None
            channel = parts[1]
            if channel == "k":
                dk.append(t)
            elif channel == "n":
                dn.append(t)
            elif channel == "q":
                try:
                    hd.append((t, float(parts[2])))
                except ValueError:
                    raise TraceFormatError(
                        line_no, f"bad quadrature value {parts[2]!r}"
                    ) from None
            else:
                raise TraceFormatError(line_no, f"unknown channel {channel!r}")
    times = [t for t, _ in hd] + dk + dn
    if duration is None:
        duration = max(times, default=0.0) + 1e-12
    return TimeTrace(
        dk_click_times=np.asarray(dk),
        dn_click_times=np.asarray(dn),
        hd_samples=np.asarray(hd, dtype=np.float64).reshape(-1, 2),
        duration=duration,
    )


def write_histogram(
    path: str | Path, hist: CountHistogram, m: int, M: int, K: int
) -> None:
    with open(path, "w") as fh:
        fh.write(HISTOGRAM_HEADER + "\n")
        for name, value in (("m", m), ("M", M), ("K", K), ("n", _fmt_count(hist.n))):
            fh.write(f"# {name}={value}\n")
        ns, ds = hist.cells()
        for n_val, d_val in zip(ns, ds):
            fh.write(f"{int(n_val)}\t{_fmt_count(d_val)}\n")


def _fmt_count(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def read_histogram(path: str | Path) -> tuple[CountHistogram, dict[str, float]]:
    counts: dict[int, float] = {}
    meta: dict[str, float] = {}
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        if first != HISTOGRAM_HEADER:
            raise TraceFormatError(1, f"expected header {HISTOGRAM_HEADER!r}")
        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, val = body.split("=", 1)
                    meta[key.strip()] = float(val)
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise TraceFormatError(line_no, "expected N<TAB>count")
            try:
                counts[int(parts[0])] = float(parts[1])
            except ValueError:
                raise TraceFormatError(line_no, f"bad row {line!r}") from None
    return CountHistogram(counts), meta


def write_quadratures(
    path: str | Path, values: np.ndarray, m: int, M: int, K: int
) -> None:
    values = np.asarray(values, dtype=np.float64)
    with open(path, "w") as fh:
        fh.write(QUADRATURE_HEADER + "\n")
        for name, value in (("m", m), ("M", M), ("K", K), ("n", values.size)):
            fh.write(f"# {name}={value}\n")
        for v in values:
            fh.write(repr(float(v)) + "\n")


def read_quadratures(path: str | Path) -> tuple[np.ndarray, dict[str, float]]:
    values = []
    meta: dict[str, float] = {}
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        if first != QUADRATURE_HEADER:
            raise TraceFormatError(1, f"expected header {QUADRATURE_HEADER!r}")
        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, val = body.split("=", 1)
                    meta[key.strip()] = float(val)
                continue
            try:
                values.append(float(line))
            except ValueError:
                raise TraceFormatError(line_no, f"bad value {line!r}") from None
    return np.asarray(values, dtype=np.float64), meta


def sha256_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def format_report(sections: dict) -> str:
    """Render nested dicts as 'dotted.key: value' lines, sorted per section.

    Values are rendered with repr for floats so identical runs produce
    byte-identical documents.
    """
    lines: list[str] = ["# mpsts-report v1"]

    def emit(prefix: str, obj) -> None:
        if isinstance(obj, dict):
            for key in obj:
                emit(f"{prefix}.{key}" if prefix else str(key), obj[key])
        elif isinstance(obj, (list, tuple, np.ndarray)):
            rendered = " ".join(_render(v) for v in obj)
            lines.append(f"{prefix}: {rendered}")
        else:
            lines.append(f"{prefix}: {_render(obj)}")

    emit("", sections)
    return "\n".join(lines) + "\n"


def _render(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_report(path: str | Path, sections: dict) -> str:
    text = format_report(sections)
    with open(path, "w") as fh:
        fh.write(text)
    return text


def write_table(path: str | Path, header: list[str], columns: list[np.ndarray]) -> None:
    """Plot-ready tab-separated columns with a '#'-prefixed header line."""
    with open(path, "w") as fh:
        fh.write("# " + "\t".join(header) + "\n")
        for row in zip(*columns):
            fh.write("\t".join(_render(v) for v in row) + "\n")
