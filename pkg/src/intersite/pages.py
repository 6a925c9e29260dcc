"""Page types, query variables and the product catalog."""

from __future__ import annotations

import csv
import enum
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import IO, Mapping, Union
from urllib.parse import unquote_plus

PathLike = Union[str, Path]


class PageType(str, enum.Enum):
    HOME = "/"
    CT = "ct"
    LS = "ls"
    DT = "dt"
    ZNACKA = "znacka"
    AKCE = "akce"
    DF = "df"
    FINDF = "findf"
    FINDP = "findp"
    SETP = "setp"
    PORADNA = "poradna"
    KOSIK = "kosik"
    OBCHODY_ELEKTRO = "obchody-elektro"
    KONTAKT = "kontakt"
    FAQ = "faq"
    ONAKUPU = "onakupu"
    SPLATKY = "splatky"
    MAILC = "mailc"
    MAILP = "mailp"
    MAILF = "mailf"
    MAILR = "mailr"
    OTHER = "other"

    def __str__(self):
        return self.value


#: First-level path tokens; HOME and OTHER are not tokens.
PAGE_TOKENS: dict[str, PageType] = {
    t.value: t for t in PageType if t not in (PageType.HOME, PageType.OTHER)
}

ID_FIELDS = ("category_id", "product_id", "brand_id", "theme_id")

#: Query variable -> id field. Only ``c`` (category) is attested in the data.
DEFAULT_VARIABLE_MAP: dict[str, str] = {
    "c": "category_id",
    "p": "product_id",
    "z": "brand_id",
    "t": "theme_id",
}

#: id field -> catalog table holding its labels
CATALOG_TABLE_FOR = {
    "category_id": "kategorie",
    "product_id": "list",
    "brand_id": "znacka",
    "theme_id": "tema",
}


@dataclass(frozen=True)
class PageInfo:
    page_type: PageType
    variables: Mapping[str, str] = field(default_factory=dict)
    category_id: int | None = None
    product_id: int | None = None
    brand_id: int | None = None
    theme_id: int | None = None
    labels: Mapping[str, str | None] = field(default_factory=dict)

    def ident(self, name: str) -> int | None:
        return getattr(self, name)


def parse_query(query: str) -> dict[str, str]:
    """Split ``a=1&b=x%20y`` into a dict; a bare ``a`` maps to ``""``."""
    variables: dict[str, str] = {}
    for pair in query.split("&"):
        if not pair:
            continue
        name, _, value = pair.partition("=")
        variables[unquote_plus(name)] = unquote_plus(value)
    return variables


def _as_id(value: str) -> int | None:
    if value.isascii() and value.isdigit():
        return int(value)
    return None


def classify(path_and_query: str, variable_map: Mapping[str, str] = DEFAULT_VARIABLE_MAP) -> PageInfo:
    """Classify a server-relative page into its page type.

    >>> classify("/ct/?c=148").category_id
    148
    """
    path, _, query = path_and_query.partition("?")
    segments = [s for s in path.split("/") if s]
    if not segments:
        page_type = PageType.HOME
    else:
        page_type = PAGE_TOKENS.get(segments[0].lower(), PageType.OTHER)
    variables = parse_query(query)
    ids: dict[str, int] = {}
    for name, value in variables.items():
        target = variable_map.get(name)
        if target is not None and target not in ids:
            ident = _as_id(value)
            if ident is not None:
                ids[target] = ident
    return PageInfo(page_type, variables, **ids)


class CatalogError(Exception):
    pass


class DuplicateId(CatalogError):
    pass


class MalformedCatalogRow(CatalogError):
    pass


@dataclass(frozen=True)
class Catalog:
    kategorie: Mapping[int, str] = field(default_factory=dict)
    list: Mapping[int, str] = field(default_factory=dict)
    znacka: Mapping[int, str] = field(default_factory=dict)
    tema: Mapping[int, str] = field(default_factory=dict)

    def label(self, id_field: str, ident: int) -> str | None:
        return getattr(self, CATALOG_TABLE_FOR[id_field]).get(ident)


TABLE_NAMES = ("kategorie", "list", "znacka", "tema")


def read_catalog_table(source: PathLike | IO[str], delimiter: str = ",") -> dict[int, str]:
    """Read ``id,label[,extra...]`` rows into ``{id: label}``."""
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8", newline="") as fh:
            return read_catalog_table(fh, delimiter)
    table: dict[int, str] = {}
    for lineno, row in enumerate(csv.reader(source, delimiter=delimiter), start=1):
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) < 2:
            raise MalformedCatalogRow(f"line {lineno}: expected at least 2 columns")
        try:
            ident = int(row[0].strip())
        except ValueError:
            raise MalformedCatalogRow(f"line {lineno}: id {row[0]!r} is not an integer") from None
        if ident in table:
            raise DuplicateId(f"line {lineno}: duplicate id {ident}")
        table[ident] = row[1].strip()
    return table


def load_catalog(kategorie, list_, znacka, tema, delimiter: str = ",") -> Catalog:
    """Load the four catalog tables from paths or open text handles."""
    return Catalog(*(read_catalog_table(src, delimiter) for src in (kategorie, list_, znacka, tema)))


def load_catalog_dir(directory: PathLike, delimiter: str = ",", suffix: str = ".csv") -> Catalog:
    """Load ``kategorie.csv``, ``list.csv``, ... from a directory; missing files give empty tables."""
    directory = Path(directory)
    tables = {}
    for name in TABLE_NAMES:
        path = directory / f"{name}{suffix}"
        tables[name] = read_catalog_table(path, delimiter) if path.exists() else {}
    return Catalog(**tables)


def write_catalog_table(table: Mapping[int, str], path: PathLike, delimiter: str = ",") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        for ident in sorted(table):
            writer.writerow([ident, table[ident]])


def resolve(info: PageInfo, catalog: Catalog, unresolved: Counter | None = None) -> PageInfo:
    """Attach catalog labels to the ids of ``info``.

    Ids missing from the catalog get a ``None`` label and are counted in
    ``unresolved`` under the id field name.
    """
    labels = dict(info.labels)
    for name in ID_FIELDS:
        ident = info.ident(name)
        if ident is None:
            continue
        label = catalog.label(name, ident)
        labels[name] = label
        if label is None and unresolved is not None:
            unresolved[name] += 1
    return replace(info, labels=labels)
