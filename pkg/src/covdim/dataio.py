"""CSV ingestion and JSON/CSV report emission."""

from __future__ import annotations

import csv
import json
import math
import re
from pathlib import Path

import numpy as np

from . import __version__
from .estimators import MIN_SAMPLES, GroupSample
from .exceptions import DataError, EmptyInputError, IoError, SampleTooSmallError

__all__ = [
    "load_groups",
    "load_matrix_observations",
    "groups_from_observations",
    "build_payload",
    "emit_report",
    "report_paths",
]

_GROUP_FILE = re.compile(r"^group_(\d+)\.csv$")


def _parse_float(text: str, where: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"{where}: non-numeric value {text!r}") from None
    if not math.isfinite(value):
        raise DataError(f"{where}: non-finite value {text!r}")
    return value


def load_groups(directory, center: bool = False) -> list[GroupSample]:
    """Read ``group_<id>.csv`` files (header of p names, one observation per row)."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"{directory}: not a directory")
    found = []
    for path in directory.iterdir():
        m = _GROUP_FILE.match(path.name)
        if m:
            found.append((int(m.group(1)), path))
    if not found:
        raise EmptyInputError(f"{directory}: no group_<id>.csv files")
    found.sort()
    groups, p = [], None
    for gid, path in found:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header:
                raise DataError(f"{path.name}: missing header row")
            rows = []
            for line_no, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise DataError(f"{path.name} row {line_no}: expected {len(header)} columns, got {len(row)}")
                rows.append(
                    [_parse_float(cell, f"{path.name} row {line_no} column {header[c]!r}") for c, cell in enumerate(row)]
                )
        if p is None:
            p = len(header)
        elif len(header) != p:
            raise DataError(f"{path.name}: {len(header)} columns, expected {p}")
        if len(rows) < MIN_SAMPLES:
            raise SampleTooSmallError(f"{path.name}: {len(rows)} observations, need at least {MIN_SAMPLES}")
        groups.append(GroupSample.from_rows(np.array(rows), gid, center=center))
    return groups


def load_matrix_observations(path) -> list[np.ndarray]:
    """Read long-format ``obs,row,col,value`` CSV into a list of dense ``p x q`` matrices.

    ``row``/``col`` are 1-based; every observation must fill the full grid.
    Observations are ordered by id (numerically when all ids are integers).
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    cells: dict[str, dict[tuple[int, int], float]] = {}
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["obs", "row", "col", "value"]:
            raise DataError(f"{path.name}: header must be obs,row,col,value")
        for line_no, rec in enumerate(reader, start=2):
            where = f"{path.name} line {line_no}"
            obs = rec["obs"].strip()
            try:
                r, c = int(rec["row"]), int(rec["col"])
            except (TypeError, ValueError):
                raise DataError(f"{where}: row/col must be integers") from None
            if r < 1 or c < 1:
                raise DataError(f"{where}: row/col are 1-based")
            grid = cells.setdefault(obs, {})
            if (r, c) in grid:
                raise DataError(f"{where}: duplicate cell (obs={obs}, row={r}, col={c})")
            grid[(r, c)] = _parse_float(rec["value"], where)
    if not cells:
        raise EmptyInputError(f"{path.name}: no observations")
    p = max(r for grid in cells.values() for r, _ in grid)
    q = max(c for grid in cells.values() for _, c in grid)
    keys = list(cells)
    if all(k.lstrip("-").isdigit() for k in keys):
        keys.sort(key=int)
    else:
        keys.sort()
    out = []
    for obs in keys:
        grid = cells[obs]
        M = np.empty((p, q))
        for r in range(1, p + 1):
            for c in range(1, q + 1):
                if (r, c) not in grid:
                    raise DataError(f"{path.name}: missing cell (obs={obs}, row={r}, col={c})")
                M[r - 1, c - 1] = grid[(r, c)]
        out.append(M)
    return out


def groups_from_observations(observations, center: bool = False) -> list[GroupSample]:
    """Treat column ``j`` of each ``p x q`` observation as a draw from group ``j``."""
    stack = np.stack([np.asarray(X, dtype=np.float64) for X in observations])  # (n, p, q)
    return [GroupSample.from_rows(stack[:, :, j], j + 1, center=center) for j in range(stack.shape[2])]


def report_paths(out) -> tuple[Path, Path]:
    base = Path(out)
    if base.suffix in (".json", ".csv"):
        base = base.with_suffix("")
    return base.with_name(base.name + ".json"), base.with_name(base.name + ".csv")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return obj if math.isfinite(obj) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _table(report) -> list[dict] | None:
    if hasattr(report, "rows"):
        return report.rows()
    if hasattr(report, "per_d"):
        return [{"d": d, "statistic": r.statistic, "p_value": r.p_value, "reject": r.reject} for d, r in report.per_d]
    return None


def build_payload(report, config: dict | None = None) -> dict:
    """JSON-ready payload: package version, resolved configuration, seed and result.

    No timestamp is included, so identical runs serialize to identical bytes.
    """
    config = dict(config or {})
    payload = {
        "artifact": "covdim",
        "version": __version__,
        "kind": type(report).__name__,
        "seed": config.get("seed", getattr(report, "seed", None)),
        "config": config,
        "result": report.to_dict(),
    }
    return _clean(payload)


def dumps_payload(payload: dict) -> str:
    return json.dumps(payload, indent=2) + "\n"


def emit_report(report, out, config: dict | None = None) -> dict:
    """Write ``<out>.json`` (and ``<out>.csv`` for tabular results); return the JSON payload."""
    payload = build_payload(report, config)
    json_path, csv_path = report_paths(out)
    table = _table(report)
    try:
        json_path.parent.mkdir(parents=True, exist_ok=True)
        json_path.write_text(dumps_payload(payload), encoding="utf-8")
        if table:
            with open(csv_path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.DictWriter(fh, fieldnames=list(table[0]))
                writer.writeheader()
                for row in table:
                    writer.writerow({k: ("" if v is None else v) for k, v in _clean(row).items()})
    except OSError as exc:
        raise IoError(f"cannot write report to {out}: {exc.strerror}") from exc
    return payload
