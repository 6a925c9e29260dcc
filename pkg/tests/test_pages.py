import io
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from intersite.pages import (
    PAGE_TOKENS,
    Catalog,
    DuplicateId,
    MalformedCatalogRow,
    PageType,
    classify,
    load_catalog,
    load_catalog_dir,
    resolve,
)

LISTED_TOKENS = (
    "ct ls dt znacka akce df findf findp setp poradna kosik obchody-elektro "
    "kontakt faq onakupu splatky mailc mailp mailf mailr"
).split()


def test_classify_category_page():
    info = classify("/ct/?c=148")
    assert info.page_type is PageType.CT
    assert info.variables == {"c": "148"}
    assert info.category_id == 148
    assert info.product_id is None


def test_classify_home():
    info = classify("/")
    assert info.page_type is PageType.HOME
    assert info.variables == {}


def test_classify_unknown_segment():
    info = classify("/unknownseg/x?y=1")
    assert info.page_type is PageType.OTHER
    assert info.variables == {"y": "1"}


def test_listed_tokens_give_distinct_types():
    assert set(PAGE_TOKENS) == set(LISTED_TOKENS)
    types = [classify(f"/{tok}/").page_type for tok in LISTED_TOKENS] + [classify("/").page_type]
    assert len(types) == 21
    assert len(set(types)) == 21
    assert PageType.OTHER not in types


def test_classify_without_trailing_slash_and_case():
    assert classify("/LS?p=3").page_type is PageType.LS
    assert classify("/ls?p=3").product_id == 3


def test_query_parsing_details():
    info = classify("/findp/?q=lednice%20bosch&x&p=12&z=abc&t=0042")
    assert info.variables == {"q": "lednice bosch", "x": "", "p": "12", "z": "abc", "t": "0042"}
    assert info.product_id == 12
    assert info.brand_id is None  # non-numeric
    assert info.theme_id == 42


def test_custom_variable_map():
    info = classify("/dt/?id=77", variable_map={"id": "product_id"})
    assert info.product_id == 77


@given(st.text(alphabet="abcdefkl/-_?=&%0123456789", max_size=40))
def test_classify_total_and_ids_verbatim(tail):
    path = "/" + tail
    info = classify(path)
    assert info.page_type in PageType
    assert classify(path) == info
    query = path.partition("?")[2]
    for name in ("category_id", "product_id", "brand_id", "theme_id"):
        ident = info.ident(name)
        if ident is not None:
            assert str(ident) in query


def test_load_catalog_and_resolve():
    cat = load_catalog(io.StringIO("148,Earphones\n5,Hobs,extra\n"), io.StringIO(""), io.StringIO(""), io.StringIO(""))
    assert cat.kategorie == {148: "Earphones", 5: "Hobs"}
    assert cat.list == {}
    info = resolve(classify("/ct/?c=148"), cat)
    assert info.labels["category_id"] == "Earphones"


def test_catalog_duplicate_id():
    with pytest.raises(DuplicateId):
        load_catalog(io.StringIO("5,a\n5,b\n"), io.StringIO(""), io.StringIO(""), io.StringIO(""))


@pytest.mark.parametrize("row", ["abc,name\n", "5\n"])
def test_catalog_malformed_row(row):
    with pytest.raises(MalformedCatalogRow):
        load_catalog(io.StringIO(row), io.StringIO(""), io.StringIO(""), io.StringIO(""))


def test_resolve_missing_product_unchanged():
    info = classify("/ct/?c=148")
    out = resolve(info, Catalog(kategorie={148: "Earphones"}))
    assert out.product_id is None and "product_id" not in out.labels


def test_resolve_unknown_id_counts():
    unresolved = Counter()
    out = resolve(classify(f"/dt/?p={10**9}"), Catalog(), unresolved)
    assert out.product_id == 10**9
    assert out.labels["product_id"] is None
    assert unresolved["product_id"] == 1


def test_resolve_keeps_type_and_variables():
    info = classify("/ls/?p=4&c=148&z=3")
    out = resolve(info, Catalog(kategorie={148: "Earphones"}, list={4: "Hobs"}))
    assert out.page_type == info.page_type and out.variables == info.variables
    assert (out.category_id, out.product_id, out.brand_id) == (148, 4, 3)


def test_load_catalog_dir(data_dir):
    cat = load_catalog_dir(data_dir / "catalog")
    assert cat.list[4] == "Free standing combi refrigerators"
    assert cat.tema == {}
