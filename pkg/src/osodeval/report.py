"""Cross-split aggregation, result tables and sweep CSV export."""

from __future__ import annotations

import csv
import io
import json
import os
import statistics
import tempfile
from collections.abc import Sequence
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from .evaluation import MetricsReport, OperatingPointStats

SWEEP_HEADER = ("threshold", "aose", "wi", "tp", "fp", "recall")


@dataclass(frozen=True)
class AggregateRow:
    """One method's AP_known / AP_unk per split, with mean and population std.

    Values are fractions in [0, 1]; ``None`` marks a missing AP (no unknown
    ground truth), in which case that column's mean and std are ``None`` too.
    """

    method: str
    splits: tuple[str, ...]
    ap_known: tuple[float | None, ...]
    ap_unk: tuple[float | None, ...]

    @staticmethod
    def _mean_std(values):
        if not values or any(v is None for v in values):
            return None, None
        return statistics.fmean(values), statistics.pstdev(values)

    @property
    def known_mean_std(self) -> tuple[float | None, float | None]:
        return self._mean_std(self.ap_known)

    @property
    def unk_mean_std(self) -> tuple[float | None, float | None]:
        return self._mean_std(self.ap_unk)


def aggregate(method: str, reports: Sequence[tuple[str, MetricsReport]]) -> AggregateRow:
    return AggregateRow(
        method,
        tuple(name for name, _ in reports),
        tuple(r.map_known for _, r in reports),
        tuple(r.ap_unk for _, r in reports),
    )


def round_half_away(value: float, places: int = 1) -> str:
    """Decimal rendering with ties away from zero, applied to the shortest repr of ``value``."""
    quant = Decimal(1).scaleb(-places)
    d = Decimal(repr(value)).quantize(quant, rounding=ROUND_HALF_UP)
    if d == 0:
        d = abs(d)
    return f"{d:.{places}f}"


def _pct(value: float | None) -> str:
    return "-" if value is None else round_half_away(100.0 * value)


def _pm(mean: float | None, std: float | None) -> str:
    if mean is None:
        return "-"
    return f"{_pct(mean)}±{_pct(std)}"


def _check_homogeneous(rows: Sequence[AggregateRow]) -> tuple[str, ...]:
    if not rows:
        return ()
    splits = rows[0].splits
    for row in rows[1:]:
        if row.splits != splits:
            raise ValueError(f"row {row.method!r} has splits {row.splits}, expected {splits}")
    return splits


def render_table(rows: Sequence[AggregateRow], format: str = "markdown", splits: Sequence[str] | None = None) -> bytes:
    """Render aggregate rows.

    Markdown shows APs x100 to one decimal and ``mean±std`` in the last two
    columns; CSV and JSON carry full-precision fractions. Column order is
    method, per-split (AP_known, AP_unk) pairs, then the mean pair.
    """
    split_names = _check_homogeneous(rows) or tuple(splits or ())
    if format == "markdown":
        header = ["Method"]
        for s in split_names:
            header += [f"{s} AP_known", f"{s} AP_unk"]
        header += ["mean AP_known", "mean AP_unk"]
        lines = ["| " + " | ".join(header) + " |", "|" + "|".join(["---"] * len(header)) + "|"]
        for row in rows:
            cells = [row.method]
            for k, u in zip(row.ap_known, row.ap_unk):
                cells += [_pct(k), _pct(u)]
            cells += [_pm(*row.known_mean_std), _pm(*row.unk_mean_std)]
            lines.append("| " + " | ".join(cells) + " |")
        return ("\n".join(lines) + "\n").encode("utf-8")
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["method"]
        for s in split_names:
            header += [f"{s}_ap_known", f"{s}_ap_unk"]
        header += ["mean_ap_known", "std_ap_known", "mean_ap_unk", "std_ap_unk"]
        writer.writerow(header)
        for row in rows:
            cells = [row.method]
            for k, u in zip(row.ap_known, row.ap_unk):
                cells += [_num(k), _num(u)]
            cells += [_num(v) for v in (*row.known_mean_std, *row.unk_mean_std)]
            writer.writerow(cells)
        return buf.getvalue().encode("utf-8")
    if format in ("json", "json-like"):
        doc = [
            {
                "method": row.method,
                "splits": [
                    {"split": s, "ap_known": k, "ap_unk": u}
                    for s, k, u in zip(row.splits, row.ap_known, row.ap_unk)
                ],
                "mean_ap_known": row.known_mean_std[0],
                "std_ap_known": row.known_mean_std[1],
                "mean_ap_unk": row.unk_mean_std[0],
                "std_ap_unk": row.unk_mean_std[1],
            }
            for row in rows
        ]
        return (json.dumps(doc, indent=2) + "\n").encode("utf-8")
    raise ValueError(f"unknown table format {format!r}")


def _num(value: float | int | None) -> str:
    return "" if value is None else repr(value)


def atomic_write(path: str | os.PathLike, data: bytes) -> None:
    """Write via a temporary file in the target directory, then rename into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def sweep_csv(stats: Sequence[OperatingPointStats]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for s in stats:
        writer.writerow([_num(s.conf_threshold), s.aose, _num(s.wi), s.tp_known, s.fp_known, _num(s.recall_known)])
    return buf.getvalue().encode("utf-8")


def export_sweep(stats: Sequence[OperatingPointStats], path: str | os.PathLike) -> Path:
    """Write operating-point stats as CSV (``threshold,aose,wi,tp,fp,recall``).

    An undefined WI is written as an empty field.
    """
    if not stats:
        raise ValueError("no operating points to export")
    atomic_write(path, sweep_csv(stats))
    return Path(path)


GRID_COLUMNS = ("temperature", "gamma", "n_unknown", "map_known", "ap_unk", "aose", "wi")


def render_sweep_grid(cells, format: str = "markdown") -> bytes:
    """Render baseline grid cells (objects with gamma, temperature, n_unknown, report)."""
    records = [
        (c.temperature, c.gamma, c.n_unknown, c.report.map_known, c.report.ap_unk, c.report.aose, c.report.wi)
        for c in cells
    ]
    if format == "markdown":
        lines = ["| " + " | ".join(GRID_COLUMNS) + " |", "|" + "|".join(["---"] * len(GRID_COLUMNS)) + "|"]
        for t, g, n, k, u, a, w in records:
            wi = "-" if w is None else f"{w:.4f}"
            lines.append(f"| {t:g} | {g:g} | {n} | {_pct(k)} | {_pct(u)} | {a} | {wi} |")
        return ("\n".join(lines) + "\n").encode("utf-8")
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(GRID_COLUMNS)
        for rec in records:
            writer.writerow([_num(v) for v in rec])
        return buf.getvalue().encode("utf-8")
    if format in ("json", "json-like"):
        doc = [dict(zip(GRID_COLUMNS, rec)) for rec in records]
        return (json.dumps(doc, indent=2) + "\n").encode("utf-8")
    raise ValueError(f"unknown table format {format!r}")
