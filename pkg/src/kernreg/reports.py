"""JSON and CSV writers/readers for curves, thresholds, spectra and rates.

JSON is UTF-8 with insertion-ordered keys and ``null`` for non-finite
numbers. CSV files are comma separated with a header row. Every writer has
a matching reader so that emitted files round-trip.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .analysis import DiagnosticCurve

CURVE_COLUMNS = ("kind", "r", "s", "J", "partial_sum", "tail_slope", "slope_stderr", "verdict", "resolved_truncation")
MERCER_COLUMNS = ("j", "mu")
HEAT_RATE_COLUMNS = ("J", "tail", "slope")


def _clean(obj):
    """Replace non-finite floats by None and numpy scalars by Python ones."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_clean(obj), indent=2, allow_nan=False, ensure_ascii=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ""
    return str(v)


def _write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _read_rows(path, header: Sequence[str]) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != tuple(header):
            raise ValueError(f"{path}: expected columns {list(header)}, found {reader.fieldnames}")
        return list(reader)


def _num(text: str):
    return None if text == "" else float(text)


def write_curves_csv(path, curves: Sequence[DiagnosticCurve]) -> Path:
    rows = []
    for c in curves:
        for J, S in zip(c.truncations, c.partial_sums):
            rows.append((c.kind, float(c.r), None if c.s is None else float(c.s), J, S, c.tail_slope,
                         c.slope_stderr, c.verdict, c.resolved_truncation))
    return _write_rows(path, CURVE_COLUMNS, rows)


def read_curves_csv(path) -> list[DiagnosticCurve]:
    """Inverse of ``write_curves_csv``; curves are keyed by (kind, r, s)."""
    grouped: dict = {}
    for row in _read_rows(path, CURVE_COLUMNS):
        key = (row["kind"], row["r"], row["s"])
        grouped.setdefault(key, []).append(row)
    curves = []
    for (kind, r, s), rows in grouped.items():
        slope = _num(rows[0]["tail_slope"])
        curves.append(
            DiagnosticCurve(
                kind=kind,
                r=float(r),
                s=_num(s),
                truncations=tuple(int(x["J"]) for x in rows),
                partial_sums=tuple(float(x["partial_sum"]) for x in rows),
                tail_slope=math.inf if slope is None else slope,
                slope_stderr=float(rows[0]["slope_stderr"]),
                verdict=rows[0]["verdict"],
                resolved_truncation=int(rows[0]["resolved_truncation"]),
            )
        )
    return curves


def write_mercer_csv(path, mu) -> Path:
    return _write_rows(path, MERCER_COLUMNS, ((j + 1, float(m)) for j, m in enumerate(mu)))


def read_mercer_csv(path) -> np.ndarray:
    rows = _read_rows(path, MERCER_COLUMNS)
    if [int(r["j"]) for r in rows] != list(range(1, len(rows) + 1)):
        raise ValueError(f"{path}: mode indices must run 1, 2, ...")
    return np.array([float(r["mu"]) for r in rows])


def write_heat_rate_csv(path, J_list, tails, slope: float) -> Path:
    return _write_rows(path, HEAT_RATE_COLUMNS, ((int(J), float(t), float(slope)) for J, t in zip(J_list, tails)))


def read_heat_rate_csv(path):
    rows = _read_rows(path, HEAT_RATE_COLUMNS)
    J = [int(r["J"]) for r in rows]
    tails = np.array([float(r["tail"]) for r in rows])
    slopes = {r["slope"] for r in rows}
    if len(slopes) != 1:
        raise ValueError(f"{path}: slope column must be constant")
    return J, tails, float(slopes.pop())
