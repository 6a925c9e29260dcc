from collections import Counter

import numpy as np
import pytest

from intersite.aggregate import read_table
from intersite.ingest import parse_line
from intersite.synth import (
    InvalidSpec,
    SynthSpec,
    default_intensity,
    generate,
    read_truth_visits,
    write_synth,
)


def test_generate_is_deterministic():
    a, b = generate(SynthSpec(n_users=200), 7), generate(SynthSpec(n_users=200), 7)
    assert a.requests == b.requests and a.visits == b.visits and a.tally == b.tally
    assert generate(SynthSpec(n_users=200), 8).requests != a.requests


def test_requests_time_ordered_and_one_ip_per_user():
    result = generate(SynthSpec(n_users=300), 1)
    stamps = [r.timestamp for r in result.requests]
    assert stamps == sorted(stamps)
    ips = [ip for ip, _, _ in result.visits]
    assert len(ips) == len(set(ips)) == 300
    sids = [s for _, group, _ in result.visits for s in group]
    assert len(sids) == len(set(sids)) == len({r.session_id for r in result.requests})


def test_multi_shop_fraction_extremes():
    none = generate(SynthSpec(n_users=200, multi_shop_fraction=0.0), 3)
    assert none.n_multi_shop == 0
    assert all(len(sids) == 1 for _, sids, _ in none.visits)
    every = generate(SynthSpec(n_users=200, multi_shop_fraction=1.0), 3)
    assert every.n_multi_shop == 200


def test_multi_shop_fraction_is_roughly_honoured():
    result = generate(SynthSpec(n_users=2000), 4)
    assert abs(result.n_multi_shop / 2000 - 0.3) < 0.04


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_users": -1},
        {"multi_shop_fraction": 1.5},
        {"shops": 1, "multi_shop_fraction": 0.3},
        {"window": 5},
        {"days": 0},
        {"intensity": np.ones((168, 3))},
        {"intensity": -np.ones((168, 20))},
        {"intensity": np.zeros((168, 20))},
    ],
)
def test_invalid_specs(kwargs):
    with pytest.raises(InvalidSpec):
        SynthSpec(**kwargs)


def test_default_intensity_weekend_depressed():
    lam = default_intensity()
    per_day = lam.sum(axis=1).reshape(7, 24).sum(axis=1)
    assert lam.shape == (168, 20)
    assert per_day[5:].max() < per_day[:5].min()


def test_write_synth_layout(tmp_path):
    spec = SynthSpec(n_users=150, days=2)
    result = generate(spec, 2)
    write_synth(result, spec, tmp_path)
    logs = sorted((tmp_path / "logs").glob("*.csv"))
    assert len(logs) >= 48
    assert logs[0].name == "2004-01-20_09.csv"
    lines = [ln for f in logs for ln in f.read_text().splitlines()]
    assert len(lines) == len(result.requests)
    assert Counter(parse_line(ln) for ln in lines) == Counter(result.requests)
    assert read_table(tmp_path / "truth" / "tally.tsv") == result.tally
    truth = read_truth_visits(tmp_path / "truth" / "visits.tsv")
    assert truth == [(ip, list(s), list(sh)) for ip, s, sh in result.visits]
    assert {p.name for p in (tmp_path / "catalog").iterdir()} == {
        "kategorie.csv", "list.csv", "znacka.csv", "tema.csv"
    }
