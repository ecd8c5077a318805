"""Observation panels, Euler-normalized returns and CSV ingestion."""

from __future__ import annotations

import csv
import datetime as _dt
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import EmptyPanel, MissingFactorColumn, NonMonotoneDates, ParseError

DATE_HEADERS = {"date", "time", "timestamp", "day", "week"}


@dataclass(frozen=True)
class PanelSeries:
    """Levels X_{t_i} on a regular grid with spacing ``delta`` (years).

    ``factor_col`` picks the column used as the state variable; ``None``
    means the first column.
    """

    values: np.ndarray
    delta: float
    factor_col: Optional[int] = None
    columns: tuple = ()
    dates: Optional[tuple] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise ValueError("values must be a T x d matrix")
        if values.shape[0] < 2:
            raise EmptyPanel(f"need at least 2 observations, got {values.shape[0]}")
        if not np.all(np.isfinite(values)):
            raise ValueError("panel contains non-finite values")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.factor_col is not None and not 0 <= self.factor_col < values.shape[1]:
            raise MissingFactorColumn(f"factor column {self.factor_col} out of range")
        columns = tuple(self.columns) or tuple(f"x{j}" for j in range(values.shape[1]))
        if len(columns) != values.shape[1]:
            raise ValueError("column names do not match the number of columns")
        if self.dates is not None and len(self.dates) != values.shape[0]:
            raise ValueError("dates do not match the number of rows")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "columns", columns)

    @property
    def n_obs(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_obs)

    @property
    def factor(self) -> np.ndarray:
        return self.values[:, self.factor_col or 0]


@dataclass(frozen=True)
class NormalizedReturns:
    """Y_i = (X_{t_{i+1}} - X_{t_i}) / sqrt(delta), paired with f_{t_i}."""

    delta: float
    rows: np.ndarray
    factor: np.ndarray
    columns: tuple = field(default=())

    def __len__(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def outer(self) -> np.ndarray:
        """Stack of Y_i Y_i^T, shape (T-1, d, d)."""
        return self.rows[:, :, None] * self.rows[:, None, :]


def normalize(panel: PanelSeries) -> NormalizedReturns:
    if panel.n_obs < 2:
        raise EmptyPanel("need at least 2 observations")
    rows = np.diff(panel.values, axis=0) / math.sqrt(panel.delta)
    factor = panel.factor[:-1].copy()
    return NormalizedReturns(delta=panel.delta, rows=rows, factor=factor, columns=panel.columns)


def _parse_date(text: str) -> Optional[_dt.date]:
    try:
        return _dt.date.fromisoformat(text.strip()[:10])
    except ValueError:
        return None


def ingest_csv(
    path: Union[str, Path],
    delta: float,
    factor_col: Union[str, int, None] = None,
    has_dates: Optional[bool] = None,
) -> PanelSeries:
    """Read a panel of levels from a CSV file.

    The first column is treated as an ISO-8601 date label when ``has_dates``
    is true, or, if ``has_dates`` is None, when its header looks like a date
    column or its first cell parses as a date. ``delta`` always comes from
    the caller; dates are labels only.

    ``factor_col`` may be a header name or a zero-based index into the
    numeric columns.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyPanel(f"{path} is empty") from None
        body = [(reader.line_num, row) for row in reader if any(cell.strip() for cell in row)]

    if has_dates is None:
        has_dates = header[0].lower() in DATE_HEADERS or (
            bool(body) and _parse_date(body[0][1][0]) is not None
        )
    offset = 1 if has_dates else 0
    columns = tuple(header[offset:])
    if not columns:
        raise ParseError("no numeric columns", line=1)

    values = np.empty((len(body), len(columns)))
    dates = [] if has_dates else None
    for r, (line, row) in enumerate(body):
        if len(row) != len(header):
            raise ParseError(f"line {line}: expected {len(header)} fields, got {len(row)}", line=line)
        if has_dates:
            d = _parse_date(row[0])
            if d is None:
                raise ParseError(f"line {line}, column 1: bad date {row[0]!r}", line=line, column=1)
            dates.append(d)
        for c, cell in enumerate(row[offset:]):
            try:
                x = float(cell)
            except ValueError:
                x = math.nan
            if not math.isfinite(x):
                col = c + offset + 1
                raise ParseError(
                    f"line {line}, column {col} ({header[col - 1]}): not a finite number: {cell!r}",
                    line=line,
                    column=col,
                )
            values[r, c] = x

    if dates is not None and any(b <= a for a, b in zip(dates, dates[1:])):
        raise NonMonotoneDates(f"{path}: dates are not strictly increasing")

    fcol = resolve_factor_col(columns, factor_col)
    return PanelSeries(
        values=values,
        delta=delta,
        factor_col=fcol,
        columns=columns,
        dates=tuple(d.isoformat() for d in dates) if dates is not None else None,
    )


def resolve_factor_col(columns: Sequence[str], factor_col: Union[str, int, None]) -> Optional[int]:
    if factor_col is None:
        return None
    if isinstance(factor_col, int):
        if not 0 <= factor_col < len(columns):
            raise MissingFactorColumn(f"factor column index {factor_col} out of range")
        return factor_col
    if factor_col in columns:
        return list(columns).index(factor_col)
    if factor_col.isdigit() and int(factor_col) < len(columns):
        return int(factor_col)
    raise MissingFactorColumn(f"no column named {factor_col!r}; have {list(columns)}")


def write_panel_csv(panel: PanelSeries, path: Union[str, Path]) -> None:
    """Write a panel in the schema read by :func:`ingest_csv` (lossless floats)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = list(panel.columns)
        if panel.dates is not None:
            head = ["date"] + head
        w.writerow(head)
        for i, row in enumerate(panel.values):
            cells = [repr(float(x)) for x in row]
            if panel.dates is not None:
                cells = [panel.dates[i]] + cells
            w.writerow(cells)
