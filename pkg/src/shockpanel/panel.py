"""Panel data model, CSV ingestion and lead/lag alignment.

A :class:`PanelDataset` is stored in long format: one row per (unit, year),
rows sorted by unit id and then year, each named series a float array aligned
to the rows with ``NaN`` marking a missing cell.  Years within a unit must
form a contiguous run, which makes shifting a pure index computation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exceptions import DuplicateKey, GapInPanel, ParseError, UnknownSeries

__all__ = [
    "PanelDataset",
    "SeriesView",
    "load_csv",
    "write_csv",
    "shift",
    "listwise_complete",
    "format_float",
]


def format_float(x: float) -> str:
    """17 significant digits; empty string for missing."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return format(float(x), ".17g")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SeriesView:
    """One unit's series as ascending (year, value) pairs; NaN is missing."""

    unit: str
    years: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        years = np.asarray(self.years, dtype=np.int64)
        values = np.asarray(self.values, dtype=float)
        if years.shape != values.shape or years.ndim != 1:
            raise ValueError("years and values must be 1-d arrays of equal length")
        if years.size > 1 and np.any(np.diff(years) <= 0):
            raise ValueError("years must be strictly ascending")
        object.__setattr__(self, "years", _frozen(years))
        object.__setattr__(self, "values", _frozen(values))

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    def __len__(self):
        return self.years.size

    def observed(self):
        """Return ``(years, values)`` restricted to non-missing points."""
        keep = ~self.missing
        return self.years[keep], self.values[keep]


def shift(series: SeriesView, offset: int) -> SeriesView:
    """Lag (``offset > 0``) or lead (``offset < 0``) a series in place of its years.

    The output value at year ``y`` is the input value at ``y - offset``;
    years whose source falls outside the unit's range become missing.
    """
    src = series.years - int(offset)
    pos = np.searchsorted(series.years, src)
    pos_c = np.minimum(pos, max(len(series) - 1, 0))
    hit = (pos < len(series)) & (series.years[pos_c] == src) if len(series) else pos.astype(bool)
    out = np.full(series.values.shape, np.nan)
    out[hit] = series.values[pos_c[hit]]
    return SeriesView(series.unit, series.years, out)


@dataclass(frozen=True)
class PanelDataset:
    """Rectangular unit-by-year table of named numeric series.

    Use :meth:`from_columns` or :func:`load_csv` rather than the raw
    constructor; they sort rows and validate the panel invariants.
    """

    units: tuple
    unit_index: np.ndarray
    year: np.ndarray
    series: Mapping[str, np.ndarray] = field(default_factory=dict)

    # --- construction -----------------------------------------------------
    @classmethod
    def from_columns(
        cls,
        unit: Sequence,
        year: Sequence,
        series: Mapping[str, Sequence[float]],
    ) -> "PanelDataset":
        unit = np.asarray([str(u) for u in unit], dtype=object)
        year = np.asarray(year, dtype=np.int64)
        n = unit.size
        if year.size != n:
            raise ValueError("unit and year columns differ in length")
        cols = {}
        for name, values in series.items():
            v = np.asarray(values, dtype=float)
            if v.shape != (n,):
                raise ValueError(f"series {name!r} has {v.size} values, expected {n}")
            cols[str(name)] = v

        units = tuple(sorted(set(unit.tolist())))
        code = {u: i for i, u in enumerate(units)}
        uidx = np.fromiter((code[u] for u in unit), dtype=np.int64, count=n)
        order = np.lexsort((year, uidx))
        uidx, year = uidx[order], year[order]

        same = (np.diff(uidx) == 0)
        dup = same & (np.diff(year) == 0)
        if np.any(dup):
            r = int(np.flatnonzero(dup)[0]) + 1
            raise DuplicateKey(f"duplicate (unit, year) = ({units[uidx[r]]}, {year[r]})")
        gap = same & (np.diff(year) != 1)
        if np.any(gap):
            r = int(np.flatnonzero(gap)[0])
            raise GapInPanel(
                f"unit {units[uidx[r]]} jumps from {year[r]} to {year[r + 1]}"
            )
        cols = {k: _frozen(v[order]) for k, v in cols.items()}
        return cls(units, _frozen(uidx), _frozen(year), cols)

    # --- basic accessors --------------------------------------------------
    @property
    def n_rows(self) -> int:
        return int(self.year.size)

    @property
    def n_units(self) -> int:
        return len(self.units)

    @property
    def series_names(self) -> list:
        return list(self.series)

    @property
    def unit_ids(self) -> np.ndarray:
        """Unit id for every row."""
        return np.asarray(self.units, dtype=object)[self.unit_index]

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.series[name]
        except KeyError:
            raise UnknownSeries(f"unknown series {name!r}") from None

    def __contains__(self, name):
        return name in self.series

    def missing(self, name: str) -> np.ndarray:
        return np.isnan(self[name])

    def _bounds(self):
        # first row and row count for each unit index
        counts = np.bincount(self.unit_index, minlength=self.n_units)
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        return starts, counts

    def unit_rows(self, unit: str) -> slice:
        i = self.units.index(unit)
        starts, counts = self._bounds()
        return slice(int(starts[i]), int(starts[i] + counts[i]))

    def view(self, name: str, unit: str) -> SeriesView:
        rows = self.unit_rows(unit)
        return SeriesView(unit, self.year[rows], self[name][rows])

    def views(self, name: str) -> list:
        return [self.view(name, u) for u in self.units]

    # --- derived datasets -------------------------------------------------
    def lagged(self, values, offset: int) -> np.ndarray:
        """Shift a row-aligned array (or series name) by ``offset`` years within units."""
        if isinstance(values, str):
            values = self[values]
        values = np.asarray(values, dtype=float)
        starts, counts = self._bounds()
        first_year = self.year[starts][self.unit_index]
        pos = self.year - int(offset) - first_year
        ok = (pos >= 0) & (pos < counts[self.unit_index])
        out = np.full(self.n_rows, np.nan)
        src = starts[self.unit_index] + pos
        out[ok] = values[src[ok]]
        return out

    def with_series(self, **new) -> "PanelDataset":
        cols = dict(self.series)
        for k, v in new.items():
            v = np.asarray(v, dtype=float)
            if v.shape != (self.n_rows,):
                raise ValueError(f"series {k!r} is not row-aligned")
            cols[k] = _frozen(v.copy())
        return PanelDataset(self.units, self.unit_index, self.year, cols)

    def select_units(self, keep: Iterable[str]) -> "PanelDataset":
        keep = set(keep)
        mask = np.isin(self.unit_ids, list(keep))
        return self.take(np.flatnonzero(mask))

    def drop_units(self, drop: Iterable[str]) -> "PanelDataset":
        drop = set(drop)
        return self.select_units([u for u in self.units if u not in drop])

    def take(self, rows) -> "PanelDataset":
        rows = np.asarray(rows, dtype=np.int64)
        return PanelDataset.from_columns(
            self.unit_ids[rows],
            self.year[rows],
            {k: v[rows] for k, v in self.series.items()},
        )


def listwise_complete(dataset: PanelDataset, columns: Iterable[str], extra=None) -> np.ndarray:
    """Row indices where every named column is non-missing, in (unit, year) order.

    ``extra`` optionally maps further names to row-aligned arrays that are
    checked alongside the dataset's own series (used for derived lead/lag
    columns that are never stored in the panel).
    """
    ok = np.ones(dataset.n_rows, dtype=bool)
    extra = extra or {}
    for name in columns:
        col = extra[name] if name in extra else dataset[name]
        ok &= ~np.isnan(col)
    return np.flatnonzero(ok)


def load_csv(path, schema: Sequence[str] | None = None) -> PanelDataset:
    """Read a ``unit,year,<series...>`` CSV into a validated panel.

    Empty fields are missing values.  ``schema`` lists series that must be
    present in the header.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file", row=1) from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[0] != "unit" or header[1] != "year":
            raise ParseError(f"{path}: header must start with 'unit,year'", row=1)
        names = header[2:]
        if len(set(names)) != len(names):
            raise ParseError(f"{path}: repeated column name in header", row=1)
        for s in schema or ():
            if s not in names:
                raise UnknownSeries(f"{path}: missing series {s!r}")

        units, years = [], []
        cols = [[] for _ in names]
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ParseError(
                    f"{path}: expected {len(header)} fields, got {len(rec)}", row=lineno
                )
            units.append(rec[0].strip())
            try:
                years.append(int(rec[1]))
            except ValueError:
                raise ParseError(f"{path}: bad year {rec[1]!r}", lineno, "year") from None
            for j, cell in enumerate(rec[2:]):
                cell = cell.strip()
                if cell == "":
                    cols[j].append(np.nan)
                    continue
                try:
                    cols[j].append(float(cell))
                except ValueError:
                    raise ParseError(
                        f"{path}: cannot parse {cell!r} as a number", lineno, names[j]
                    ) from None
    return PanelDataset.from_columns(units, years, dict(zip(names, cols)))


def write_csv(dataset: PanelDataset, path, columns: Sequence[str] | None = None) -> None:
    columns = list(columns) if columns is not None else dataset.series_names
    data = [dataset[c] for c in columns]
    uid = dataset.unit_ids
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit", "year", *columns])
        for r in range(dataset.n_rows):
            w.writerow([uid[r], int(dataset.year[r]), *(format_float(c[r]) for c in data)])
