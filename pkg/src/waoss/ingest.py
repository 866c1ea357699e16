"""CSV ingestion for two-period panels, wide or long.

One unambiguous format: comma-delimited, UTF-8, header row required,
scientific notation accepted.  Empty cells in required columns are errors;
the estimators have no missing-data handling.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import (
    DuplicatePeriod,
    DuplicateUnitId,
    EmptyFile,
    InconsistentWeight,
    MissingColumn,
    MissingPeriod,
    NonNumericCell,
)
from .panel import UnitObservation


@dataclass(frozen=True)
class ColumnSpec:
    """Names the columns of a panel file.

    For ``layout='wide'`` give ``d1_col``/``d2_col``/``y1_col``/``y2_col``
    (plus optional ``d0_col``/``y0_col`` for a pre-period).  For
    ``layout='long'`` give ``period_col``/``d_col``/``y_col`` and the period
    labels ``p1``/``p2`` (optional ``p0``).  ``weight_col`` is optional in
    both layouts.
    """

    layout: str = "wide"
    unit_col: str = "unit_id"
    d1_col: str = "d1"
    d2_col: str = "d2"
    y1_col: str = "y1"
    y2_col: str = "y2"
    d0_col: Optional[str] = None
    y0_col: Optional[str] = None
    period_col: str = "period"
    d_col: str = "d"
    y_col: str = "y"
    p0: Optional[str] = None
    p1: str = "1"
    p2: str = "2"
    weight_col: Optional[str] = None

    def __post_init__(self):
        if self.layout not in ("wide", "long"):
            raise ValueError(f"layout must be 'wide' or 'long', got {self.layout!r}")
        if (self.d0_col is None) != (self.y0_col is None):
            raise ValueError("d0_col and y0_col must be given together")
        required = self._required_names()
        if any(not name for name in required):
            raise ValueError("column names must be nonempty")
        if len(set(required)) != len(required):
            raise ValueError(f"column names must be distinct, got {required}")

    def _required_names(self) -> list[str]:
        if self.layout == "wide":
            names = [self.unit_col, self.d1_col, self.d2_col, self.y1_col, self.y2_col]
            if self.d0_col is not None:
                names += [self.d0_col, self.y0_col]
        else:
            names = [self.unit_col, self.period_col, self.d_col, self.y_col]
        if self.weight_col is not None:
            names.append(self.weight_col)
        return names


def _open_rows(path, spec: ColumnSpec):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        missing = [c for c in spec._required_names() if c not in header]
        if missing:
            raise MissingColumn(f"{path}: missing column(s) {missing}; header is {header}")
        rows = [row for row in reader if any(cell.strip() for cell in row)]
    if not rows:
        raise EmptyFile(f"{path}: no data rows")
    idx = {c: header.index(c) for c in header}
    return header, idx, rows


def _cell(row: list[str], idx: dict, col: str, rownum: int) -> float:
    try:
        raw = row[idx[col]]
    except IndexError:
        raise NonNumericCell(rownum, col, None) from None
    raw = raw.strip()
    try:
        return float(raw)
    except ValueError:
        raise NonNumericCell(rownum, col, raw) from None


def read_wide(path, spec: ColumnSpec) -> list[UnitObservation]:
    """Read a wide-layout panel: one row per unit.

    Raises :class:`MissingColumn`, :class:`NonNumericCell` (with row and
    column), :class:`DuplicateUnitId` or :class:`EmptyFile`.
    """
    if spec.layout != "wide":
        raise ValueError("spec.layout must be 'wide'")
    _, idx, rows = _open_rows(path, spec)

    seen = set()
    out = []
    for rownum, row in enumerate(rows, start=2):
        uid = row[idx[spec.unit_col]].strip()
        if uid in seen:
            raise DuplicateUnitId(f"{path}: unit id {uid!r} appears more than once")
        seen.add(uid)
        weight = 1.0 if spec.weight_col is None else _cell(row, idx, spec.weight_col, rownum)
        d0 = y0 = None
        if spec.d0_col is not None:
            d0 = _cell(row, idx, spec.d0_col, rownum)
            y0 = _cell(row, idx, spec.y0_col, rownum)
        out.append(
            UnitObservation(
                unit_id=uid,
                d1=_cell(row, idx, spec.d1_col, rownum),
                d2=_cell(row, idx, spec.d2_col, rownum),
                y1=_cell(row, idx, spec.y1_col, rownum),
                y2=_cell(row, idx, spec.y2_col, rownum),
                weight=weight,
                d0=d0,
                y0=y0,
            )
        )
    return out


def read_long(path, spec: ColumnSpec) -> list[UnitObservation]:
    """Read a long-layout panel: one row per unit and period, pivoted.

    Every unit must have exactly one row per declared period label, and a
    constant weight across its rows.
    """
    if spec.layout != "long":
        raise ValueError("spec.layout must be 'long'")
    _, idx, rows = _open_rows(path, spec)

    labels = [spec.p1, spec.p2] if spec.p0 is None else [spec.p0, spec.p1, spec.p2]
    per_unit: dict = {}
    order: list = []
    for rownum, row in enumerate(rows, start=2):
        uid = row[idx[spec.unit_col]].strip()
        period = row[idx[spec.period_col]].strip()
        if period not in labels:
            continue
        if uid not in per_unit:
            per_unit[uid] = {}
            order.append(uid)
        if period in per_unit[uid]:
            raise DuplicatePeriod(uid, period)
        weight = 1.0 if spec.weight_col is None else _cell(row, idx, spec.weight_col, rownum)
        per_unit[uid][period] = (
            _cell(row, idx, spec.d_col, rownum),
            _cell(row, idx, spec.y_col, rownum),
            weight,
        )

    out = []
    for uid in order:
        cells = per_unit[uid]
        for label in labels:
            if label not in cells:
                raise MissingPeriod(uid, label)
        weights = {cells[label][2] for label in labels}
        if len(weights) > 1:
            raise InconsistentWeight(uid)
        d1, y1, w = cells[spec.p1]
        d2, y2, _ = cells[spec.p2]
        d0 = y0 = None
        if spec.p0 is not None:
            d0, y0, _ = cells[spec.p0]
        out.append(
            UnitObservation(unit_id=uid, d1=d1, d2=d2, y1=y1, y2=y2, weight=w, d0=d0, y0=y0)
        )
    return out


def write_wide(path, panel: Sequence[UnitObservation], include_weight: bool = True) -> None:
    """Write a wide-layout CSV that :func:`read_wide` round-trips exactly.

    Floats are rendered with ``repr``, the shortest representation that
    parses back to the identical double.
    """
    has_pre = any(u.has_pre_period for u in panel)
    header = ["unit_id", "d1", "d2", "y1", "y2"]
    if has_pre:
        header += ["d0", "y0"]
    if include_weight:
        header.append("weight")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for u in panel:
            row = [str(u.unit_id), repr(u.d1), repr(u.d2), repr(u.y1), repr(u.y2)]
            if has_pre:
                row += ["" if u.d0 is None else repr(u.d0), "" if u.y0 is None else repr(u.y0)]
            if include_weight:
                row.append(repr(u.weight))
            writer.writerow(row)
