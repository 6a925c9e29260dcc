"""Parsing, fusion, normalization and cleaning of hourly shop log files.

Raw lines have six delimited fields::

    shop_id, unix_time, ip, session_id, page, referrer

and are turned into normalized records whose URL carries the shop host,
so that it can be compared with the referrer field of later requests.
"""

from __future__ import annotations

import csv
import heapq
import io
import logging
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping, Sequence, Union

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

#: Shop id -> host, as distributed with the challenge data.
DEFAULT_SHOP_TABLE: dict[int, str] = {
    10: "www.shop1.cz",
    11: "www.shop2.cz",
    12: "www.shop3.cz",
    14: "www.shop4.cz",
    15: "www.shop5.cz",
    16: "www.shop6.cz",
    17: "www.shop7.cz",
}

DEFAULT_CLEANING_SUFFIXES = (".jpg", ".jpeg", ".gif", ".png", ".css", ".js", ".ico")

N_FIELDS = 6


class IngestError(Exception):
    pass


class MalformedLine(IngestError):
    """A log line that cannot be turned into a request."""

    def __init__(self, reason: str, lineno: int | None = None, source: str | None = None):
        self.reason = reason
        self.lineno = lineno
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if lineno is not None:
            where += f"{lineno}: "
        super().__init__(f"{where}{reason}")


class UnknownShop(IngestError):
    def __init__(self, shop_id: int):
        self.shop_id = shop_id
        super().__init__(f"shop id {shop_id} is not in the shop table")


class UnreadableFile(IngestError):
    pass


@dataclass(frozen=True)
class RawRequest:
    shop_id: int
    timestamp: int
    ip: str
    session_id: str
    page: str
    referrer: str | None = None


@dataclass(frozen=True)
class NormalizedRequest:
    datetime: datetime
    ip: str
    session_id: str
    url: str
    referrer: str | None
    shop_id: int

    @property
    def timestamp(self) -> int:
        return int(self.datetime.timestamp())

    @property
    def path(self) -> str:
        """Server-relative page, i.e. the url without scheme and host."""
        rest = self.url.split("://", 1)[-1]
        slash = rest.find("/")
        return rest[slash:] if slash >= 0 else "/"


@dataclass
class IngestConfig:
    utc_offset: int = 60
    shop_table: Mapping[int, str] = field(default_factory=lambda: dict(DEFAULT_SHOP_TABLE))
    cleaning_suffixes: Sequence[str] = DEFAULT_CLEANING_SUFFIXES
    input_delimiter: str = ","
    quoting: bool = False
    strict: bool = False

    def __post_init__(self):
        if len(self.input_delimiter) != 1:
            raise ValueError("input_delimiter must be a single character")
        hosts = list(self.shop_table.values())
        if len(set(hosts)) != len(hosts):
            raise ValueError("shop_table maps two shops to the same host")
        self.cleaning_suffixes = tuple(self.cleaning_suffixes)

    @property
    def tz(self) -> timezone:
        return timezone(timedelta(minutes=self.utc_offset))

    def host_to_shop(self) -> dict[str, int]:
        return {host: shop for shop, host in self.shop_table.items()}


@dataclass
class IngestStats:
    files: int = 0
    lines: int = 0
    malformed: int = 0
    dropped: Counter = field(default_factory=Counter)

    @property
    def n_dropped(self) -> int:
        return sum(self.dropped.values())


def _split(line: str, config: IngestConfig) -> list[str]:
    line = line.rstrip("\r\n")
    if config.quoting:
        return next(csv.reader([line], delimiter=config.input_delimiter))
    return line.split(config.input_delimiter)


def parse_line(line: str, config: IngestConfig | None = None, lineno: int | None = None) -> RawRequest:
    """Parse one delimited log record.

    Raises MalformedLine on a wrong field count, non-numeric shop id or
    timestamp, negative timestamp, empty session id or a page that is not
    server-relative.
    """
    config = config or IngestConfig()
    fields = [f.strip() for f in _split(line, config)]
    if len(fields) != N_FIELDS:
        raise MalformedLine(f"expected {N_FIELDS} fields, got {len(fields)}", lineno)
    shop, ts, ip, sid, page, ref = fields
    try:
        shop_id = int(shop)
        timestamp = int(ts)
    except ValueError:
        raise MalformedLine("shop id and timestamp must be integers", lineno) from None
    if timestamp < 0:
        raise MalformedLine("negative timestamp", lineno)
    if not sid:
        raise MalformedLine("empty session id", lineno)
    if not page.startswith("/"):
        raise MalformedLine(f"page {page!r} does not start with '/'", lineno)
    return RawRequest(shop_id, timestamp, ip, sid, page, ref or None)


def format_line(req: RawRequest, config: IngestConfig | None = None) -> str:
    """Inverse of :func:`parse_line` (without the line terminator)."""
    config = config or IngestConfig()
    values = [str(req.shop_id), str(req.timestamp), req.ip, req.session_id, req.page, req.referrer or ""]
    if config.quoting:
        buf = io.StringIO()
        csv.writer(buf, delimiter=config.input_delimiter, lineterminator="").writerow(values)
        return buf.getvalue()
    return config.input_delimiter.join(values)


def read_log(
    source: PathLike | IO[str],
    config: IngestConfig | None = None,
    stats: IngestStats | None = None,
) -> Iterator[RawRequest]:
    """Yield the requests of one log file.

    Malformed lines are counted and skipped, or raised when
    ``config.strict`` is set. Blank lines are ignored.
    """
    config = config or IngestConfig()
    stats = stats if stats is not None else IngestStats()
    if isinstance(source, (str, Path)):
        name = str(source)
        try:
            fh = open(source, encoding="utf-8", newline="")
        except OSError as exc:
            raise UnreadableFile(f"cannot open {name}: {exc}") from exc
    else:
        name = getattr(source, "name", "<stream>")
        fh = source
    stats.files += 1
    try:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            stats.lines += 1
            try:
                yield parse_line(line, config, lineno)
            except MalformedLine as exc:
                exc.source = name
                if config.strict:
                    raise MalformedLine(exc.reason, lineno, name) from None
                stats.malformed += 1
                logger.warning("skipping %s:%d: %s", name, lineno, exc.reason)
    except OSError as exc:
        raise UnreadableFile(f"error reading {name}: {exc}") from exc
    finally:
        if fh is not source:
            fh.close()


def fuse(
    files: Sequence[PathLike | IO[str]],
    config: IngestConfig | None = None,
    stats: IngestStats | None = None,
) -> Iterator[RawRequest]:
    """K-way merge of individually time-ordered log files.

    Equal timestamps keep file order, then line order.
    """
    config = config or IngestConfig()
    stats = stats if stats is not None else IngestStats()
    streams = [read_log(f, config, stats) for f in files]
    # heapq.merge breaks key ties by iterable position, which gives the stable order
    return heapq.merge(*streams, key=lambda r: r.timestamp)


def gregorian(timestamp: int, utc_offset: int = 60) -> datetime:
    return datetime.fromtimestamp(timestamp, timezone(timedelta(minutes=utc_offset)))


def format_datetime(dt: datetime) -> str:
    """``2004-01-20 09:01:03 +01:00`` style rendering."""
    iso = dt.isoformat(sep=" ")
    return f"{iso[:-6]} {iso[-6:]}"


def host_url(host: str, page: str) -> str:
    return f"http://{host}{page}"


def normalize(req: RawRequest, config: IngestConfig | None = None) -> NormalizedRequest:
    config = config or IngestConfig()
    host = config.shop_table.get(req.shop_id)
    if host is None:
        raise UnknownShop(req.shop_id)
    return NormalizedRequest(
        datetime=gregorian(req.timestamp, config.utc_offset),
        ip=req.ip,
        session_id=req.session_id,
        url=host_url(host, req.page),
        referrer=req.referrer,
        shop_id=req.shop_id,
    )


def clean(
    stream: Iterable[NormalizedRequest],
    config: IngestConfig | None = None,
    dropped: Counter | None = None,
) -> Iterator[NormalizedRequest]:
    """Drop requests for resources whose path ends with a cleaning suffix.

    ``dropped`` is incremented per matched suffix.
    """
    config = config or IngestConfig()
    suffixes = tuple(s.lower() for s in config.cleaning_suffixes)
    if dropped is None:
        dropped = Counter()
    for req in stream:
        if suffixes:
            path = req.path.split("?", 1)[0].lower()
            hit = next((s for s in suffixes if path.endswith(s)), None)
            if hit is not None:
                dropped[hit] += 1
                continue
        yield req


def ingest(
    files: Sequence[PathLike | IO[str]],
    config: IngestConfig | None = None,
    stats: IngestStats | None = None,
) -> Iterator[NormalizedRequest]:
    """fuse -> normalize -> clean, lazily."""
    config = config or IngestConfig()
    stats = stats if stats is not None else IngestStats()
    normalized = (normalize(r, config) for r in fuse(files, config, stats))
    return clean(normalized, config, stats.dropped)


# Normalized request file: one tab-separated record per line.

def format_normalized(req: NormalizedRequest) -> str:
    return "\t".join(
        [req.datetime.isoformat(), req.ip, req.session_id, req.url, req.referrer or "-", str(req.shop_id)]
    )


def parse_normalized(line: str, lineno: int | None = None) -> NormalizedRequest:
    fields = line.rstrip("\r\n").split("\t")
    if len(fields) != N_FIELDS:
        raise MalformedLine(f"expected {N_FIELDS} tab-separated fields, got {len(fields)}", lineno)
    dt, ip, sid, url, ref, shop = fields
    try:
        when = datetime.fromisoformat(dt)
        shop_id = int(shop)
    except ValueError as exc:
        raise MalformedLine(str(exc), lineno) from None
    if when.tzinfo is None:
        raise MalformedLine("datetime lacks a UTC offset", lineno)
    return NormalizedRequest(when, ip, sid, url, None if ref == "-" else ref, shop_id)


def write_normalized(requests: Iterable[NormalizedRequest], path: PathLike) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for req in requests:
            fh.write(format_normalized(req))
            fh.write("\n")
            n += 1
    return n


def read_normalized(path: PathLike) -> Iterator[NormalizedRequest]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                yield parse_normalized(line, lineno)
