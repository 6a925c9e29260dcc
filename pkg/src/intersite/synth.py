"""Seeded synthetic shop logs with known visits and product tallies.

Each simulated user makes one visit from its own IP. A visit browses one
shop, or with probability ``multi_shop_fraction`` two to four shops in a
row; every shop change is a click whose referrer is the last page seen on
the previous shop, so the true grouping of session ids is known. Product
list pages on the tally shop are counted per weekday x hour slice as they
are emitted.

Randomness comes from one seed split into named sub-streams, so changing
how product pages are drawn does not move the visit start times.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Union

import numpy as np

from .aggregate import N_SLICES, ContingencyTable, TimeSlice, write_table
from .ingest import DEFAULT_SHOP_TABLE, RawRequest, format_line, host_url
from .pages import write_catalog_table

PathLike = Union[str, Path]

#: 2004-01-20 09:00 local (UTC+1)
DEFAULT_START = 1074585600

#: Relative request volumes of the seven shops in the challenge data.
SHOP_WEIGHTS = {10: 509688, 11: 400045, 12: 645724, 14: 1290870, 15: 308367, 16: 298030, 17: 164447}

EXTERNAL_REFERRERS = (
    "http://www.google.cz/search?q=lednice",
    "http://www.seznam.cz/",
    "http://www.zbozi.cz/",
)

STREAMS = ("visits", "shops", "pages", "products", "ids")


class InvalidSpec(ValueError):
    pass


def default_intensity(n_products: int = 20, weekend_factor: float = 0.35) -> np.ndarray:
    """168 x n_products request intensities with a planted block pattern.

    Products fall into five groups, each with a preferred band of hours;
    weekend rows and the early morning are damped.
    """
    hours = np.arange(24)
    daily = 0.15 + np.exp(-0.5 * ((hours - 11) / 3.0) ** 2) + 0.8 * np.exp(-0.5 * ((hours - 19) / 2.5) ** 2)
    daily[12:14] *= 0.7
    weekday = np.array([1.0, 1.15, 1.15, 1.0, 0.95, weekend_factor, weekend_factor])
    base = np.outer(weekday, daily).reshape(N_SLICES)
    groups = np.arange(n_products) % 5
    peaks = np.array([9, 12, 15, 18, 21])
    out = np.empty((N_SLICES, n_products))
    for j in range(n_products):
        pref = np.exp(-0.5 * ((np.tile(hours, 7) - peaks[groups[j]]) / 2.0) ** 2)
        out[:, j] = base * (0.3 + pref) * (1.0 + 0.1 * (j % 3))
    return out


@dataclass
class SynthSpec:
    n_users: int = 1000
    shops: int = 7
    multi_shop_fraction: float = 0.3
    window_respecting_links: bool = True
    window: int = 1800
    n_products: int = 20
    intensity: np.ndarray | None = None
    days: int = 24
    start: int = DEFAULT_START
    utc_offset: int = 60
    tally_shop: int = 14
    decoy_referrer_fraction: float = 0.1
    shop_table: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.shop_table:
            ids = list(DEFAULT_SHOP_TABLE)[: self.shops]
            ids += list(range(18, 18 + max(0, self.shops - len(ids))))
            self.shop_table = {s: DEFAULT_SHOP_TABLE.get(s, f"www.shop{i + 1}.cz") for i, s in enumerate(ids)}
        if self.intensity is None:
            self.intensity = default_intensity(self.n_products)
        self.intensity = np.asarray(self.intensity, dtype=np.float64)
        self.validate()

    def validate(self) -> None:
        if self.n_users < 0:
            raise InvalidSpec("n_users must be >= 0")
        if self.shops < 1 or len(self.shop_table) != self.shops:
            raise InvalidSpec("shops must be >= 1 and match the shop table")
        if not 0.0 <= self.multi_shop_fraction <= 1.0:
            raise InvalidSpec("multi_shop_fraction must lie in [0, 1]")
        if self.multi_shop_fraction > 0 and self.shops < 2:
            raise InvalidSpec("multi-shop visits need at least two shops")
        if not 0.0 <= self.decoy_referrer_fraction <= 1.0:
            raise InvalidSpec("decoy_referrer_fraction must lie in [0, 1]")
        if self.window <= 10:
            raise InvalidSpec("window must exceed 10 seconds")
        if self.days < 1:
            raise InvalidSpec("days must be >= 1")
        if self.intensity.shape != (N_SLICES, self.n_products):
            raise InvalidSpec(f"intensity must have shape ({N_SLICES}, {self.n_products})")
        if (self.intensity < 0).any() or not np.isfinite(self.intensity).all():
            raise InvalidSpec("intensities must be finite and >= 0")
        if self.intensity.sum() <= 0:
            raise InvalidSpec("intensity table is all zero")
        if self.tally_shop not in self.shop_table:
            raise InvalidSpec(f"tally shop {self.tally_shop} is not one of the shops")

    @property
    def tz(self) -> timezone:
        return timezone(timedelta(minutes=self.utc_offset))


@dataclass
class SynthResult:
    requests: list[RawRequest]
    visits: list[tuple[str, list[str], list[int]]]
    tally: ContingencyTable
    catalog: dict[str, dict[int, str]]

    def truth_partition(self) -> set[frozenset[str]]:
        return {frozenset(sids) for _, sids, _ in self.visits}

    @property
    def n_multi_shop(self) -> int:
        return sum(len(shops) >= 2 for _, _, shops in self.visits)


def _streams(seed: int) -> dict[str, np.random.Generator]:
    out = {}
    for name in STREAMS:
        key = int.from_bytes(hashlib.sha256(name.encode()).digest()[:8], "little")
        out[name] = np.random.default_rng([seed & (2**64 - 1), key])
    return out


PRODUCT_NAMES = (
    "Built-in electric hobs", "Built-in dish washers 60cm", "Corner single sinks",
    "Free standing combi refrigerators", "Built-in hoods", "Built-in microwave ovens",
    "Built-in dish washers 45cm", "Built-in freezers", "Kitchen taps with shower",
    "Garbage disposers", "Earphones", "Built-in ovens", "Washing machines",
    "Tumble dryers", "Vacuum cleaners", "Coffee makers", "Kettles", "Toasters",
    "Food processors", "Irons",
)


def make_catalog(n_products: int, n_categories: int = 12, n_brands: int = 8) -> dict[str, dict[int, str]]:
    products = {}
    for j in range(n_products):
        name = PRODUCT_NAMES[j] if j < len(PRODUCT_NAMES) else f"Product {j + 1}"
        products[j + 1] = name
    return {
        "kategorie": {100 + c: f"Category {c + 1}" for c in range(n_categories)} | {148: "Earphones"},
        "list": products,
        "znacka": {b + 1: f"Brand {b + 1}" for b in range(n_brands)},
        "tema": {1: "Kitchen", 2: "Laundry", 3: "Audio"},
    }


class _Ids:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.sessions: set[str] = set()
        self.ips: set[str] = set()

    def session(self) -> str:
        while True:
            sid = self.rng.bytes(16).hex()
            if sid not in self.sessions:
                self.sessions.add(sid)
                return sid

    def ip(self) -> str:
        while True:
            a, b, c, d = self.rng.integers([1, 0, 0, 1], [224, 256, 256, 255])
            ip = f"{a}.{b}.{c}.{d}"
            if ip not in self.ips:
                self.ips.add(ip)
                return ip


def generate(spec: SynthSpec, seed: int) -> SynthResult:
    """Simulate the logs; returns requests in time order plus ground truth."""
    rng = _streams(seed)
    ids = _Ids(rng["ids"])
    shop_ids = list(spec.shop_table)
    weights = np.array([SHOP_WEIGHTS.get(s, 300000) for s in shop_ids], dtype=np.float64)
    weights /= weights.sum()
    catalog = make_catalog(spec.n_products)
    categories = sorted(catalog["kategorie"])
    brands = sorted(catalog["znacka"])

    # visit starts: hour of the simulated period weighted by its slice intensity
    n_hours = spec.days * 24
    hour_starts = spec.start + 3600 * np.arange(n_hours)
    slice_of_hour = np.array(
        [TimeSlice.of(datetime.fromtimestamp(int(t), spec.tz)).index for t in hour_starts]
    )
    slice_weight = spec.intensity.sum(axis=1)
    p_hour = slice_weight[slice_of_hour]
    p_hour = p_hour / p_hour.sum()
    row_p = spec.intensity / np.where(slice_weight > 0, slice_weight, 1.0)[:, None]

    tally = np.zeros((N_SLICES, spec.n_products), dtype=np.int64)
    requests: list[RawRequest] = []
    visits = []
    for _ in range(spec.n_users):
        ip = ids.ip()
        hour = rng["visits"].choice(n_hours, p=p_hour)
        t = int(hour_starts[hour] + rng["visits"].integers(0, 3600))
        multi = spec.shops >= 2 and rng["visits"].random() < spec.multi_shop_fraction
        n_shops = int(rng["shops"].integers(2, min(4, spec.shops) + 1)) if multi else 1
        shops = [shop_ids[i] for i in rng["shops"].choice(len(shop_ids), n_shops, replace=False, p=weights)]

        sessions = []
        prev_url = None
        for s_idx, shop in enumerate(shops):
            sid = ids.session()
            sessions.append(sid)
            host = spec.shop_table[shop]
            pages = _browse(rng, spec, categories, brands)
            for p_idx, page in enumerate(pages):
                if p_idx == 0:
                    if s_idx == 0:
                        referrer = _entry_referrer(rng["pages"], spec)
                    else:
                        if spec.window_respecting_links:
                            t += int(rng["pages"].integers(2, 60))
                        else:
                            t += spec.window + int(rng["pages"].integers(60, 3600))
                        referrer = prev_url
                else:
                    t += int(rng["pages"].integers(3, 240))
                    referrer = prev_url
                if page == "LS":
                    slice_idx = TimeSlice.of(datetime.fromtimestamp(t, spec.tz)).index
                    product = int(rng["products"].choice(spec.n_products, p=row_p[slice_idx])) + 1
                    page = f"/ls/?p={product}"
                    if shop == spec.tally_shop:
                        tally[slice_idx, product - 1] += 1
                requests.append(RawRequest(shop, t, ip, sid, page, _as_referrer(referrer)))
                prev_url = host_url(host, page)
        visits.append((ip, sessions, shops))

    requests.sort(key=lambda r: r.timestamp)
    observed = np.flatnonzero(tally.sum(axis=0) > 0)
    table = ContingencyTable(
        [s.label for s in map(TimeSlice.from_index, range(N_SLICES))],
        [catalog["list"][j + 1] for j in observed],
        tally[:, observed],
    )
    return SynthResult(requests, visits, table, catalog)


def _as_referrer(url: str | None) -> str | None:
    # the dataset records links from a shop's home page as the bare host
    if url is not None and url.endswith(".cz/"):
        return url[:-1]
    return url


def _entry_referrer(rng: np.random.Generator, spec: SynthSpec) -> str | None:
    u = rng.random()
    if u < spec.decoy_referrer_fraction:
        # a link from a shop page this IP never loaded; must not join anything
        host = list(spec.shop_table.values())[int(rng.integers(0, spec.shops))]
        return host_url(host, f"/dt/?p={int(rng.integers(1, spec.n_products + 1))}")
    if u < spec.decoy_referrer_fraction + 0.3:
        return EXTERNAL_REFERRERS[int(rng.integers(0, len(EXTERNAL_REFERRERS)))]
    return None


def _browse(rng, spec: SynthSpec, categories, brands) -> list[str]:
    r = rng["pages"]
    n = int(r.integers(1, 9))
    pages = []
    for i in range(n):
        u = r.random()
        if i == 0 and u < 0.4:
            pages.append("/")
        elif u < 0.55:
            pages.append("LS")
        elif u < 0.7:
            pages.append(f"/ct/?c={categories[int(r.integers(0, len(categories)))]}")
        elif u < 0.8:
            pages.append(f"/dt/?p={int(r.integers(1, spec.n_products + 1))}")
        elif u < 0.87:
            pages.append(f"/znacka/?z={brands[int(r.integers(0, len(brands)))]}")
        elif u < 0.93:
            pages.append("/kosik/")
        else:
            pages.append(["/faq/", "/kontakt/", "/onakupu/", "/akce/"][int(r.integers(0, 4))])
    return pages


def write_synth(result: SynthResult, spec: SynthSpec, out_dir: PathLike) -> dict[str, Path]:
    """Write hourly log files, catalog tables and ground truth under ``out_dir``.

    Layout::

        logs/YYYY-MM-DD_HH.csv    one file per local hour, raw log format
        catalog/{kategorie,list,znacka,tema}.csv
        truth/visits.tsv          ip, session ids (;-joined), shops (,-joined)
        truth/tally.tsv           slice x product counts for the tally shop
    """
    out = Path(out_dir)
    logs, cat, truth = out / "logs", out / "catalog", out / "truth"
    for d in (logs, cat, truth):
        d.mkdir(parents=True, exist_ok=True)

    by_hour: dict[int, list[RawRequest]] = {}
    for r in result.requests:
        by_hour.setdefault((r.timestamp - spec.start) // 3600, []).append(r)
    last = max(spec.days * 24 - 1, max(by_hour, default=0))
    for h in range(last + 1):
        stamp = datetime.fromtimestamp(spec.start + 3600 * h, spec.tz).strftime("%Y-%m-%d_%H")
        with open(logs / f"{stamp}.csv", "w", encoding="utf-8", newline="\n") as fh:
            for r in by_hour.get(h, ()):
                fh.write(format_line(r) + "\n")

    for name, table in result.catalog.items():
        write_catalog_table(table, cat / f"{name}.csv")

    with open(truth / "visits.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for ip, sids, shops in result.visits:
            fh.write(f"{ip}\t{';'.join(sids)}\t{','.join(map(str, shops))}\n")
    write_table(result.tally, truth / "tally.tsv", corner="Weekday x Hour")
    return {"logs": logs, "catalog": cat, "truth": truth}


def read_truth_visits(path: PathLike) -> list[tuple[str, list[str], list[int]]]:
    visits = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                ip, sids, shops = line.rstrip("\n").split("\t")
                visits.append((ip, sids.split(";"), [int(s) for s in shops.split(",")]))
    return visits
