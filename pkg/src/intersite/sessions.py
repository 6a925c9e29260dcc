"""Stitching per-shop session ids into cross-shop visits.

A shop hands out a fresh session id whenever a user enters it, so a user
browsing three shops leaves three session ids. When a request arrives
with a referrer that was itself requested from the same IP within the
time window, under another session id, the two session ids are joined.
By default the referrer may lie on any shop, which also catches a session
id renewed inside one shop; ``cross_shop_only`` restricts joins to
referrers on a different host.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Hashable, Iterable, Iterator, Sequence, Union
from urllib.parse import urlsplit

from .ingest import NormalizedRequest

PathLike = Union[str, Path]

DEFAULT_WINDOW = 1800


class OutOfOrderInput(ValueError):
    pass


class ZeroSessions(ValueError):
    pass


class UnionFind:
    """Disjoint sets over hashable items, created on first use."""

    def __init__(self):
        self.parent: dict[Hashable, Hashable] = {}
        self.size: dict[Hashable, int] = {}

    def add(self, item: Hashable) -> None:
        if item not in self.parent:
            self.parent[item] = item
            self.size[item] = 1

    def find(self, item: Hashable) -> Hashable:
        self.add(item)
        root = item
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[item] != root:
            self.parent[item], item = root, self.parent[item]
        return root

    def union(self, a: Hashable, b: Hashable) -> Hashable:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return ra

    def __contains__(self, item):
        return item in self.parent


def normalize_url(url: str) -> str:
    """Give a bare host URL its root slash: ``http://h`` -> ``http://h/``."""
    parts = urlsplit(url)
    if parts.netloc and not parts.path and not parts.query and not parts.fragment:
        return url + "/"
    return url


def url_host(url: str) -> str:
    return urlsplit(url).netloc.lower()


@dataclass
class SessionizerConfig:
    window: float = DEFAULT_WINDOW
    same_ip_required: bool = True
    cross_shop_only: bool = False
    order_tolerance: float = 0.0

    def __post_init__(self):
        if self.window < 0:
            raise ValueError("window must be non-negative")


class RecentAccessIndex:
    """Most recent (session id, time) per (ip, url), pruned to the window.

    An entry is usable while ``now - time < window``; older entries are
    dropped whenever something is recorded.
    """

    def __init__(self, window: float, same_ip_required: bool = True):
        self.window = window
        self.same_ip_required = same_ip_required
        self._entries: OrderedDict[tuple, tuple[str, int]] = OrderedDict()

    def _key(self, ip: str, url: str) -> tuple:
        return (ip if self.same_ip_required else None, normalize_url(url))

    def lookup(self, ip: str, url: str, now: int) -> str | None:
        hit = self._entries.get(self._key(ip, url))
        if hit is None:
            return None
        session_id, when = hit
        return session_id if now - when < self.window else None

    def record(self, ip: str, url: str, session_id: str, when: int) -> None:
        key = self._key(ip, url)
        self._entries[key] = (session_id, when)
        self._entries.move_to_end(key)
        self.prune(when)

    def prune(self, now: int) -> None:
        entries = self._entries
        while entries:
            key, (_, when) = next(iter(entries.items()))
            if now - when < self.window:
                break
            del entries[key]

    def __len__(self):
        return len(self._entries)


@dataclass
class VisitGroup:
    group_id: int
    session_ids: frozenset[str]
    ip: str
    requests: list[NormalizedRequest] = field(default_factory=list)
    shops: frozenset[int] = frozenset()

    @property
    def start(self) -> datetime:
        return self.requests[0].datetime

    @property
    def end(self) -> datetime:
        return self.requests[-1].datetime

    @property
    def is_multi_shop(self) -> bool:
        return len(self.shops) >= 2

    @property
    def n_requests(self) -> int:
        return len(self.requests)


def group_sessions(
    stream: Iterable[NormalizedRequest],
    config: SessionizerConfig | None = None,
) -> list[VisitGroup]:
    """Group session ids into visits by referrer evidence.

    For each request with a referrer (on a different host only, under
    ``cross_shop_only``), the most recent access to that referrer URL from
    the same IP is looked up; if it is younger than the window, its
    session id is united with the request's. Groups are numbered by first
    appearance in the stream.
    """
    config = config or SessionizerConfig()
    index = RecentAccessIndex(config.window, config.same_ip_required)
    uf = UnionFind()
    requests: list[NormalizedRequest] = []
    last = None
    for req in stream:
        now = req.timestamp
        if last is not None and now < last - config.order_tolerance:
            raise OutOfOrderInput(f"timestamp {now} after {last} (request #{len(requests)})")
        last = now if last is None else max(last, now)
        uf.add(req.session_id)
        if req.referrer:
            ref = normalize_url(req.referrer)
            if not config.cross_shop_only or url_host(ref) != url_host(req.url):
                previous = index.lookup(req.ip, ref, now)
                if previous is not None:
                    uf.union(req.session_id, previous)
        index.record(req.ip, req.url, req.session_id, now)
        requests.append(req)

    groups: dict[Hashable, VisitGroup] = {}
    members: dict[Hashable, set[str]] = {}
    shops: dict[Hashable, set[int]] = {}
    for req in requests:
        root = uf.find(req.session_id)
        group = groups.get(root)
        if group is None:
            group = groups[root] = VisitGroup(len(groups), frozenset(), req.ip)
            members[root] = set()
            shops[root] = set()
        group.requests.append(req)
        members[root].add(req.session_id)
        shops[root].add(req.shop_id)
    for root, group in groups.items():
        group.session_ids = frozenset(members[root])
        group.shops = frozenset(shops[root])
    return list(groups.values())


def reduction_ratio(n_sessions: int, n_groups: int) -> float:
    """Fraction by which grouping reduced the number of visits."""
    if n_sessions <= 0:
        raise ZeroSessions("no sessions to group")
    if not 0 <= n_groups <= n_sessions:
        raise ValueError(f"n_groups={n_groups} outside [0, {n_sessions}]")
    return 1.0 - n_groups / n_sessions


def multi_shop_filter(groups: Iterable) -> list:
    return [g for g in groups if len(g.shops) >= 2]


def session_partition(groups: Iterable) -> set[frozenset[str]]:
    """The groups as a set partition of session ids (for comparisons)."""
    return {frozenset(g.session_ids) for g in groups}


# Visits file: group_id, ip, session ids, first, last, shops, request count.

@dataclass(frozen=True)
class VisitRecord:
    group_id: int
    ip: str
    session_ids: tuple[str, ...]
    start: datetime
    end: datetime
    shops: frozenset[int]
    n_requests: int

    @property
    def is_multi_shop(self) -> bool:
        return len(self.shops) >= 2


def format_visit(group: VisitGroup) -> str:
    return "\t".join(
        [
            str(group.group_id),
            group.ip,
            ";".join(sorted(group.session_ids)),
            group.start.isoformat(),
            group.end.isoformat(),
            ",".join(str(s) for s in sorted(group.shops)),
            str(group.n_requests),
        ]
    )


def write_visits(groups: Sequence[VisitGroup], path: PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for group in groups:
            fh.write(format_visit(group) + "\n")


def read_visits(path: PathLike) -> Iterator[VisitRecord]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 7:
                raise ValueError(f"{path}:{lineno}: expected 7 fields, got {len(fields)}")
            gid, ip, sids, first, last, shops, n = fields
            yield VisitRecord(
                int(gid),
                ip,
                tuple(sids.split(";")),
                datetime.fromisoformat(first),
                datetime.fromisoformat(last),
                frozenset(int(s) for s in shops.split(",") if s),
                int(n),
            )
