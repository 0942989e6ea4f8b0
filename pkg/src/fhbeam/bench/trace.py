"""CSV trace and summary files."""

from __future__ import annotations

import csv
import os
from pathlib import Path

from fhbeam.solvers import IterationTrace

TRACE_COLUMNS = ["outer_iter", "inner_iter", "cumulative_seconds", "wsr_bits", "inner_objective"]
SUMMARY_COLUMNS = ["scenario", "variant", "M", "seed", "final_wsr_bits", "total_seconds", "outer_iters", "status"]
META_KEYS = ("scenario", "solver", "variant", "seed", "M", "N", "K", "d", "L", "T")
TIMING_COLUMNS = ("cumulative_seconds", "total_seconds")


class TraceError(ValueError):
    pass


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _atomic_write(path: Path, write) -> None:
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "w", newline="") as fh:
            write(fh)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"failed to write {path}: {exc}") from exc


def emit_trace(trace: IterationTrace, meta: dict, path: str | Path) -> Path:
    """Write one CSV row per trace record, preceded by a ``# key=value`` block."""
    if len(trace) == 0:
        raise TraceError("refusing to write an empty trace")
    path = Path(path)

    def write(fh):
        for key in META_KEYS:
            if key in meta:
                fh.write(f"# {key}={meta[key]}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for r in trace.records:
            writer.writerow([
                r.outer_iteration,
                _fmt(r.inner_iteration),
                f"{r.cumulative_seconds:.6f}",
                _fmt(r.wsr_bits),
                _fmt(r.inner_objective),
            ])

    _atomic_write(path, write)
    return path


def read_trace(path: str | Path) -> tuple[dict, list[dict]]:
    meta, lines = {}, []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key] = val
            else:
                lines.append(line)
    rows = list(csv.DictReader(lines))
    return meta, rows


def validate_trace(path: str | Path) -> None:
    """Check the header and that ``cumulative_seconds`` never decreases."""
    meta, rows = read_trace(path)
    with open(path) as fh:
        header = next(line for line in fh if not line.startswith("#")).strip().split(",")
    if header != TRACE_COLUMNS:
        raise TraceError(f"{path}: unexpected header {header}")
    if not rows:
        raise TraceError(f"{path}: no data rows")
    times = [float(r["cumulative_seconds"]) for r in rows]
    if any(b < a for a, b in zip(times, times[1:])):
        raise TraceError(f"{path}: cumulative_seconds decreases")


def write_summary(rows: list[dict], path: str | Path) -> Path:
    path = Path(path)

    def write(fh):
        writer = csv.DictWriter(fh, SUMMARY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row.get(k)) for k in SUMMARY_COLUMNS})

    _atomic_write(path, write)
    return path


def read_summary(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def strip_timing(path: str | Path) -> str:
    """File contents with timing columns blanked, for determinism comparisons."""
    out = []
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    header_idx = next(i for i, line in enumerate(lines) if not line.startswith("#"))
    header = lines[header_idx].split(",")
    drop = {i for i, h in enumerate(header) if h in TIMING_COLUMNS}
    out.extend(lines[:header_idx + 1])
    for line in lines[header_idx + 1:]:
        cells = next(csv.reader([line]))
        out.append(",".join("" if i in drop else c for i, c in enumerate(cells)))
    return "\n".join(out)
