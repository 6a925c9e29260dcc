from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intersite.ingest import NormalizedRequest, gregorian, normalize, read_normalized
from intersite.sessions import (
    OutOfOrderInput,
    RecentAccessIndex,
    SessionizerConfig,
    VisitGroup,
    ZeroSessions,
    group_sessions,
    multi_shop_filter,
    normalize_url,
    read_visits,
    reduction_ratio,
    session_partition,
    write_visits,
)
from intersite.synth import SynthSpec, generate

HOSTS = {10: "www.shop1.cz", 11: "www.shop2.cz", 12: "www.shop3.cz"}


def req(t, ip, sid, shop, page, referrer=None):
    return NormalizedRequest(gregorian(t), ip, sid, f"http://{HOSTS[shop]}{page}", referrer, shop)


def test_table3_lines_form_one_group(data_dir):
    groups = group_sessions(read_normalized(data_dir / "table3_requests.tsv"))
    assert len(groups) == 1
    assert groups[0].session_ids == {"939dad92c4...84208dca", "87ee02ddcff...7655bb9e"}
    assert groups[0].n_requests == 2


def test_table3_cross_shop_only_keeps_both(data_dir):
    cfg = SessionizerConfig(cross_shop_only=True)
    assert len(group_sessions(read_normalized(data_dir / "table3_requests.tsv"), cfg)) == 2


def test_cross_shop_link_joins_sessions():
    stream = [
        req(100, "1.1.1.1", "a", 10, "/ls/?p=4"),
        req(110, "1.1.1.1", "b", 11, "/dt/?p=4", "http://www.shop1.cz/ls/?p=4"),
    ]
    groups = group_sessions(stream, SessionizerConfig(cross_shop_only=True))
    assert [g.session_ids for g in groups] == [{"a", "b"}]
    assert groups[0].shops == {10, 11} and groups[0].is_multi_shop


def test_different_ips_never_join():
    stream = [
        req(100, "1.1.1.1", "a", 10, "/"),
        req(105, "2.2.2.2", "b", 11, "/ct/?c=1", "http://www.shop1.cz"),
    ]
    assert len(group_sessions(stream)) == 2


def test_bare_host_referrer_matches_root_url():
    stream = [req(100, "1.1.1.1", "a", 10, "/"), req(105, "1.1.1.1", "b", 11, "/", "http://www.shop1.cz")]
    assert len(group_sessions(stream)) == 1
    assert normalize_url("http://www.shop1.cz") == "http://www.shop1.cz/"
    assert normalize_url("http://www.shop1.cz/ct/") == "http://www.shop1.cz/ct/"


def test_window_boundary_is_strict():
    stream = [req(0, "1.1.1.1", "a", 10, "/x"), req(1800, "1.1.1.1", "b", 11, "/", "http://www.shop1.cz/x")]
    assert len(group_sessions(stream, SessionizerConfig(window=1800))) == 2
    assert len(group_sessions(stream, SessionizerConfig(window=1801))) == 1


def test_chain_through_three_shops():
    stream = [
        req(0, "1.1.1.1", "a", 10, "/"),
        req(10, "1.1.1.1", "b", 11, "/ls/", "http://www.shop1.cz"),
        req(20, "1.1.1.1", "c", 12, "/", "http://www.shop2.cz/ls/"),
    ]
    groups = group_sessions(stream)
    assert len(groups) == 1 and groups[0].session_ids == {"a", "b", "c"}


def test_most_recent_access_wins():
    stream = [
        req(0, "1.1.1.1", "a", 10, "/x"),
        req(5, "1.1.1.1", "b", 10, "/x"),
        req(10, "1.1.1.1", "c", 11, "/", "http://www.shop1.cz/x"),
    ]
    groups = group_sessions(stream)
    assert session_partition(groups) == {frozenset("a"), frozenset("bc")}


def test_out_of_order_input():
    with pytest.raises(OutOfOrderInput):
        group_sessions([req(10, "1.1.1.1", "a", 10, "/"), req(9, "1.1.1.1", "b", 10, "/")])
    groups = group_sessions(
        [req(10, "1.1.1.1", "a", 10, "/"), req(9, "1.1.1.1", "b", 10, "/")],
        SessionizerConfig(order_tolerance=2),
    )
    assert len(groups) == 2


def test_group_ids_follow_first_appearance():
    stream = [
        req(0, "9.9.9.9", "z", 10, "/"),
        req(1, "1.1.1.1", "a", 10, "/"),
        req(2, "9.9.9.9", "y", 11, "/", "http://www.shop1.cz/"),
    ]
    groups = group_sessions(stream)
    assert [g.group_id for g in groups] == [0, 1]
    assert groups[0].session_ids == {"z", "y"} and groups[0].ip == "9.9.9.9"


def test_index_prunes_to_window():
    index = RecentAccessIndex(window=10)
    for t in range(100):
        index.record("1.1.1.1", f"http://h/{t}", "s", t)
        assert len(index) <= 10
    assert index.lookup("1.1.1.1", "http://h/99", 100) == "s"
    assert index.lookup("1.1.1.1", "http://h/90", 100) is None


def test_reduction_ratio():
    assert reduction_ratio(522410, 397629) == pytest.approx(0.2388, abs=1e-4)
    assert reduction_ratio(100, 100) == 0.0
    assert reduction_ratio(10, 1) == pytest.approx(0.9)
    with pytest.raises(ZeroSessions):
        reduction_ratio(0, 0)
    with pytest.raises(ValueError):
        reduction_ratio(5, 6)


def test_multi_shop_filter_keeps_order():
    g1 = VisitGroup(0, frozenset("a"), "1", shops=frozenset({10, 11}))
    g2 = VisitGroup(1, frozenset("b"), "1", shops=frozenset({10}))
    g3 = VisitGroup(2, frozenset("c"), "1", shops=frozenset({12, 14, 15}))
    assert multi_shop_filter([g1, g2, g3]) == [g1, g3]


def test_synthetic_partition_and_multi_shop_count():
    spec = SynthSpec()
    result = generate(spec, seed=11)
    stream = [normalize(r) for r in result.requests]
    groups = group_sessions(stream)
    assert session_partition(groups) == result.truth_partition()
    assert len(multi_shop_filter(groups)) == result.n_multi_shop
    assert result.n_multi_shop > 0


def test_synthetic_without_multi_shop_is_identity_partition():
    result = generate(SynthSpec(n_users=300, multi_shop_fraction=0.0), seed=2)
    groups = group_sessions(normalize(r) for r in result.requests)
    assert all(len(g.session_ids) == 1 for g in groups)
    assert len(groups) == 300


def test_links_outside_window_are_not_joined():
    spec = SynthSpec(n_users=200, multi_shop_fraction=1.0, window_respecting_links=False)
    result = generate(spec, seed=4)
    groups = group_sessions(normalize(r) for r in result.requests)
    assert all(len(g.session_ids) == 1 for g in groups)


# -- random streams for the structural properties ---------------------------------

def random_stream(seed, n=120):
    rng = np.random.default_rng(seed)
    ips = ["1.1.1.1", "2.2.2.2", "3.3.3.3"]
    pages = ["/", "/ls/?p=1", "/ct/?c=2", "/dt/?p=3"]
    out, seen = [], []
    t = 0
    sessions = {}
    for _ in range(n):
        t += int(rng.integers(0, 400))
        ip = ips[rng.integers(0, len(ips))]
        shop = list(HOSTS)[rng.integers(0, len(HOSTS))]
        key = (ip, shop)
        if key not in sessions or rng.random() < 0.2:
            sessions[key] = f"{ip}-{shop}-{len(sessions)}-{t}"
        ref = None
        if seen and rng.random() < 0.7:
            ref = seen[rng.integers(0, len(seen))]
            if ref.endswith(".cz/") and rng.random() < 0.5:
                ref = ref[:-1]
        r = req(t, ip, sessions[key], shop, pages[rng.integers(0, len(pages))], ref)
        out.append(r)
        seen.append(r.url)
    return out


seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_groups_partition_the_requests(seed):
    stream = random_stream(seed)
    groups = group_sessions(stream)
    assert Counter(r for g in groups for r in g.requests) == Counter(stream)
    assert sum(g.n_requests for g in groups) == len(stream)
    for g in groups:
        assert {r.ip for r in g.requests} == {g.ip}
        assert {r.session_id for r in g.requests} == g.session_ids
        assert {r.shop_id for r in g.requests} == g.shops
        stamps = [r.timestamp for r in g.requests]
        assert stamps == sorted(stamps)
    sids = [s for g in groups for s in g.session_ids]
    assert len(sids) == len(set(sids))


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 3000), st.integers(1, 3000))
def test_more_window_never_more_groups(seed, w1, w2):
    w1, w2 = sorted((w1, w2))
    stream = random_stream(seed)
    assert len(group_sessions(stream, SessionizerConfig(window=w1))) >= len(
        group_sessions(stream, SessionizerConfig(window=w2))
    )


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_zero_window_merges_nothing(seed):
    stream = random_stream(seed)
    groups = group_sessions(stream, SessionizerConfig(window=0))
    assert len(groups) == len({r.session_id for r in stream})


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_same_shop_referrers_never_join_under_cross_shop_only(seed):
    stream = [r for r in random_stream(seed) if r.shop_id == 10]
    stream = [
        NormalizedRequest(r.datetime, r.ip, r.session_id, r.url, r.referrer if r.referrer and "shop1" in r.referrer else None, 10)
        for r in stream
    ]
    groups = group_sessions(stream, SessionizerConfig(cross_shop_only=True))
    assert len(groups) == len({r.session_id for r in stream})


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_deterministic(seed):
    stream = random_stream(seed)
    a, b = group_sessions(stream), group_sessions(list(stream))
    assert [(g.group_id, g.session_ids, g.requests) for g in a] == [(g.group_id, g.session_ids, g.requests) for g in b]


def test_visits_file_roundtrip_and_golden(data_dir, tmp_path):
    groups = group_sessions(read_normalized(data_dir / "golden_requests.tsv"))
    path = tmp_path / "visits.tsv"
    write_visits(groups, path)
    assert path.read_bytes() == (data_dir / "golden_visits.tsv").read_bytes()
    records = list(read_visits(path))
    assert [r.group_id for r in records] == [g.group_id for g in groups]
    assert [set(r.session_ids) for r in records] == [set(g.session_ids) for g in groups]
    assert [r.start for r in records] == [g.start for g in groups]
    assert [r.n_requests for r in records] == [g.n_requests for g in groups]


def test_golden_log_window_sensitivity(data_dir):
    stream = list(read_normalized(data_dir / "golden_requests.tsv"))
    assert len(group_sessions(stream)) == 7
    # the 62.24.70.5 shop4 -> shop1 link is 3270 s old, the 80.188.1.9 one 3599 s
    assert len(group_sessions(stream, SessionizerConfig(window=3300))) == 6
    assert len(group_sessions(stream, SessionizerConfig(window=3600))) == 5
