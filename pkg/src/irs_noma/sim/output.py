"""CSV emitters for result tables and solver traces (9 significant digits)."""

from __future__ import annotations

import csv
import io
from pathlib import Path

from ..trace import TRACE_COLUMNS, SolverTrace, TraceRow
from .experiment import TABLE_COLUMNS, ResultRow, ResultTable


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def _write(path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    path = Path(path)
    try:
        path.write_text(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def emit_csv(table: ResultTable, path) -> None:
    _write(path, TABLE_COLUMNS,
           ([getattr(r, c) for c in TABLE_COLUMNS] for r in table.rows))


def emit_trace(trace: SolverTrace, path) -> None:
    _write(path, TRACE_COLUMNS,
           ([getattr(r, c) for c in TRACE_COLUMNS] for r in trace.rows))


def _opt(text: str):
    return None if text == "" else float(text)


def read_csv(path) -> ResultTable:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TABLE_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = [ResultRow(v, s, _opt(p), _opt(sd), float(fr), _opt(it), _opt(ms))
                for v, s, p, sd, fr, it, ms in reader]
    return ResultTable(rows)


def read_trace(path, solver: str = "") -> SolverTrace:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TRACE_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = [TraceRow(int(i), float(p), float(r), float(s), float(ms), b)
                for i, p, r, s, ms, b in reader]
    return SolverTrace(solver, rows, status="loaded")
