"""Weekday x hour summaries and labeled contingency tables."""

from __future__ import annotations

import calendar
from collections import Counter
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import IO, Iterable, NamedTuple, Sequence, Union

import numpy as np

from .ingest import NormalizedRequest
from .pages import CATALOG_TABLE_FOR, Catalog, PageInfo, PageType

PathLike = Union[str, Path]

WEEKDAYS = tuple(calendar.day_name)  # Monday first
N_SLICES = 7 * 24


class TimeSlice(NamedTuple):
    weekday: int
    hour: int

    @property
    def index(self) -> int:
        return self.weekday * 24 + self.hour

    @property
    def label(self) -> str:
        return f"{WEEKDAYS[self.weekday]}_{self.hour}"

    @classmethod
    def of(cls, dt: datetime) -> "TimeSlice":
        """Slice of a datetime, read in its own (local) offset."""
        return cls(dt.weekday(), dt.hour)

    @classmethod
    def from_index(cls, index: int) -> "TimeSlice":
        if not 0 <= index < N_SLICES:
            raise ValueError(f"slice index {index} out of range")
        return cls(*divmod(index, 24))


ALL_SLICES = tuple(TimeSlice.from_index(i) for i in range(N_SLICES))
SLICE_LABELS = tuple(s.label for s in ALL_SLICES)


class AggregateError(Exception):
    pass


class EmptySelection(AggregateError):
    pass


class MalformedTableFile(AggregateError):
    pass


class ContingencyTable:
    """Labeled non-negative integer matrix with margins."""

    def __init__(self, row_labels: Sequence[str], col_labels: Sequence[str], cells):
        cells = np.asarray(cells)
        if cells.ndim != 2:
            raise ValueError("cells must be a 2-d array")
        if cells.size and not np.all(np.equal(np.mod(cells, 1), 0)):
            raise ValueError("cells must be integers")
        cells = cells.astype(np.int64)
        if cells.shape != (len(row_labels), len(col_labels)):
            raise ValueError(
                f"cells have shape {cells.shape}, labels give {(len(row_labels), len(col_labels))}"
            )
        if (cells < 0).any():
            raise ValueError("cells must be non-negative")
        self.row_labels = [str(s) for s in row_labels]
        self.col_labels = [str(s) for s in col_labels]
        self.cells = cells

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    @property
    def row_margins(self) -> np.ndarray:
        return self.cells.sum(axis=1)

    @property
    def col_margins(self) -> np.ndarray:
        return self.cells.sum(axis=0)

    @property
    def grand_total(self) -> int:
        return int(self.cells.sum())

    def __eq__(self, other):
        if not isinstance(other, ContingencyTable):
            return NotImplemented
        return (
            self.row_labels == other.row_labels
            and self.col_labels == other.col_labels
            and np.array_equal(self.cells, other.cells)
        )

    def __repr__(self):
        return f"ContingencyTable({self.shape[0]}x{self.shape[1]}, total={self.grand_total})"

    def __add__(self, other: "ContingencyTable") -> "ContingencyTable":
        if self.row_labels != other.row_labels or self.col_labels != other.col_labels:
            raise ValueError("tables with different labels cannot be added")
        return ContingencyTable(self.row_labels, self.col_labels, self.cells + other.cells)

    def reindex(self, col_labels: Sequence[str]) -> "ContingencyTable":
        """Reorder/extend the columns; new columns are zero."""
        pos = {label: j for j, label in enumerate(self.col_labels)}
        missing = set(self.col_labels) - set(col_labels)
        if missing and self.cells[:, [pos[m] for m in missing]].any():
            raise ValueError("reindexing would drop non-zero columns")
        cells = np.zeros((self.shape[0], len(col_labels)), dtype=np.int64)
        for j, label in enumerate(col_labels):
            if label in pos:
                cells[:, j] = self.cells[:, pos[label]]
        return ContingencyTable(self.row_labels, col_labels, cells)


@dataclass
class VisitMatrix:
    counts: np.ndarray
    kind: str = "all_visits"
    anchor_rule: str = "first_request"

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_table(self) -> ContingencyTable:
        return ContingencyTable(WEEKDAYS, [str(h) for h in range(24)], self.counts)


VISIT_KINDS = ("all_visits", "multi_shop_visits")
ANCHOR_RULES = ("first_request", "every_request")


def visit_matrix(groups: Iterable, kind: str = "all_visits", anchor_rule: str = "first_request") -> VisitMatrix:
    """Count visits per weekday x hour of local time.

    With ``first_request`` each visit counts once, in the slice of its
    start; ``every_request`` counts each request of the visit instead and
    needs groups that carry their requests.
    """
    if kind not in VISIT_KINDS:
        raise ValueError(f"kind must be one of {VISIT_KINDS}")
    if anchor_rule not in ANCHOR_RULES:
        raise ValueError(f"anchor_rule must be one of {ANCHOR_RULES}")
    counts = np.zeros((7, 24), dtype=np.int64)
    for group in groups:
        if kind == "multi_shop_visits" and len(group.shops) < 2:
            continue
        if anchor_rule == "first_request":
            s = TimeSlice.of(group.start)
            counts[s.weekday, s.hour] += 1
        else:
            for req in group.requests:
                s = TimeSlice.of(req.datetime)
                counts[s.weekday, s.hour] += 1
    return VisitMatrix(counts, kind, anchor_rule)


def _column_value(info: PageInfo, variable: str) -> str | None:
    if variable in CATALOG_TABLE_FOR:
        ident = info.ident(variable)
        return None if ident is None else str(ident)
    value = info.variables.get(variable)
    return value if value else None


def _sort_key(value: str):
    return (0, int(value), "") if value.isdigit() else (1, 0, value)


def column_labels(values: Sequence[str], variable: str, catalog: Catalog | None) -> list[str]:
    """Catalog names for raw values; repeated names get their id appended."""
    if catalog is None or variable not in CATALOG_TABLE_FOR:
        return list(values)
    names = []
    for v in values:
        name = catalog.label(variable, int(v)) if v.isdigit() else None
        names.append(name if name is not None else v)
    seen = Counter(names)
    return [f"{n} [{v}]" if seen[n] > 1 else n for n, v in zip(names, values)]


def build_crosstab(
    records: Iterable[tuple[NormalizedRequest, PageInfo]],
    shop_id: int | None = 14,
    page_type: PageType | str | None = PageType.LS,
    variable: str = "product_id",
    catalog: Catalog | None = None,
    columns: Sequence[str] | None = None,
    skipped: Counter | None = None,
) -> ContingencyTable:
    """Weekday x hour by variable-value counts of the selected requests.

    Rows are always the 168 time slices. Columns are the observed values
    of ``variable`` (an id field such as ``product_id`` or a raw query
    variable name) in id order, or the raw values given in ``columns``.
    Selected requests lacking the variable are counted in
    ``skipped["missing_variable"]``.
    """
    if page_type is not None:
        page_type = PageType(page_type)
    tally: Counter = Counter()
    selected = 0
    for req, info in records:
        if shop_id is not None and req.shop_id != shop_id:
            continue
        if page_type is not None and info.page_type != page_type:
            continue
        selected += 1
        value = _column_value(info, variable)
        if value is None:
            if skipped is not None:
                skipped["missing_variable"] += 1
            continue
        tally[(TimeSlice.of(req.datetime).index, value)] += 1
    if not tally:
        raise EmptySelection(f"no requests matched (selected={selected})")
    if columns is None:
        values = sorted({v for _, v in tally}, key=_sort_key)
    else:
        values = list(columns)
        unknown = {v for _, v in tally} - set(values)
        if unknown:
            raise ValueError(f"observed values outside the given columns: {sorted(unknown)[:5]}")
    pos = {v: j for j, v in enumerate(values)}
    cells = np.zeros((N_SLICES, len(values)), dtype=np.int64)
    for (i, v), n in tally.items():
        cells[i, pos[v]] = n
    return ContingencyTable(SLICE_LABELS, column_labels(values, variable, catalog), cells)


# Table file: header row of column labels, one row per table row, margins
# in the last row and column, grand total bottom right. Tab-separated.

TOTAL = "Total"


def _check_label(label: str) -> None:
    if any(ch in label for ch in "\t\r\n"):
        raise ValueError(f"label {label!r} contains a tab or newline")


def write_table(table: ContingencyTable, dest: PathLike | IO[str], corner: str = "") -> None:
    if not isinstance(dest, (str, Path)):
        dest.write(format_table(table, corner))
        return
    with open(dest, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_table(table, corner))


def format_table(table: ContingencyTable, corner: str = "") -> str:
    for label in [corner, *table.row_labels, *table.col_labels]:
        _check_label(label)
    lines = ["\t".join([corner, *table.col_labels, TOTAL])]
    for label, row, margin in zip(table.row_labels, table.cells, table.row_margins):
        lines.append("\t".join([label, *map(str, row), str(margin)]))
    lines.append("\t".join([TOTAL, *map(str, table.col_margins), str(table.grand_total)]))
    return "\n".join(lines) + "\n"


def read_table(source: PathLike | IO[str]) -> ContingencyTable:
    """Read a table file, checking shape, signs and margins."""
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = source.read()
    rows = [line.split("\t") for line in text.split("\n") if line != ""]
    if len(rows) < 2:
        raise MalformedTableFile("a table file needs a header and a margin row")
    header, body, footer = rows[0], rows[1:-1], rows[-1]
    width = len(header)
    if width < 2 or header[-1] != TOTAL:
        raise MalformedTableFile("header must end with the margin column")
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise MalformedTableFile(f"line {lineno}: {len(row)} fields, header has {width}")
    if footer[0] != TOTAL:
        raise MalformedTableFile("last row must hold the column margins")
    col_labels = header[1:-1]
    try:
        numbers = np.array([[int(x) for x in row[1:]] for row in body + [footer]], dtype=np.int64)
    except ValueError as exc:
        raise MalformedTableFile(f"non-integer cell: {exc}") from None
    numbers = numbers.reshape(len(body) + 1, width - 1)
    cells = numbers[:-1, :-1]
    if (numbers < 0).any():
        raise MalformedTableFile("negative cell or margin")
    if not np.array_equal(numbers[:-1, -1], cells.sum(axis=1)):
        raise MalformedTableFile("row margins do not match the cells")
    if not np.array_equal(numbers[-1, :-1], cells.sum(axis=0)):
        raise MalformedTableFile("column margins do not match the cells")
    if numbers[-1, -1] != cells.sum():
        raise MalformedTableFile("grand total does not match the cells")
    return ContingencyTable([row[0] for row in body], col_labels, cells)
