import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reccheck.dataset import (
    Catalog,
    Interaction,
    ItemMeta,
    Session,
    TestCase,
    build_test_cases,
    flatten,
    item_popularity,
    load_catalog,
    load_interactions,
    sessionize,
    temporal_split,
)
from reccheck.errors import DataError

from conftest import sessions


def write_lines(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    return path


class TestLoadInteractions:
    def test_empty_file(self, tmp_path):
        p = tmp_path / "x.jsonl"
        p.write_text("")
        assert load_interactions(p, "jsonl") == []

    def test_file_order_kept(self, tmp_path):
        rows = [
            {"session_id": "s", "item_id": "c", "timestamp": 5},
            {"session_id": "s", "item_id": "a", "timestamp": 1, "event_type": "add"},
            {"session_id": "t", "item_id": "b", "timestamp": 3},
        ]
        got = load_interactions(write_lines(tmp_path / "x.jsonl", rows), "jsonl")
        assert [i.item_id for i in got] == ["c", "a", "b"]
        assert got[1].event_type == "add"

    def test_missing_item_names_line(self, tmp_path):
        rows = [
            {"session_id": "s", "item_id": "a", "timestamp": 1},
            {"session_id": "s", "timestamp": 2},
        ]
        with pytest.raises(DataError, match=r"line 2.*item_id"):
            load_interactions(write_lines(tmp_path / "x.jsonl", rows), "jsonl")

    def test_negative_timestamp(self, tmp_path):
        rows = [{"session_id": "s", "item_id": "a", "timestamp": -1}]
        with pytest.raises(DataError, match="negative"):
            load_interactions(write_lines(tmp_path / "x.jsonl", rows), "jsonl")

    def test_bad_json_line(self, tmp_path):
        p = tmp_path / "x.jsonl"
        p.write_text('{"session_id": "s", "item_id": "a", "timestamp": 1}\n{oops\n')
        with pytest.raises(DataError, match="line 2"):
            load_interactions(p, "jsonl")

    def test_csv(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("session_id,item_id,timestamp,event_type\ns,a,1,view\ns,b,2,\n")
        got = load_interactions(p, "csv")
        assert [(i.item_id, i.timestamp, i.event_type.value) for i in got] == [("a", 1, "view"), ("b", 2, "view")]

    def test_csv_error_line(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("session_id,item_id,timestamp,event_type\ns,a,1,view\ns,,2,view\n")
        with pytest.raises(DataError, match="line 3"):
            load_interactions(p, "csv")


class TestSessionize:
    def test_single_session_sorted(self):
        its = [Interaction("s", "c", 30), Interaction("s", "a", 10), Interaction("s", "b", 20)]
        (s,) = sessionize(its)
        assert s.items == ("a", "b", "c")

    def test_gap_split(self):
        its = [Interaction("s", x, t) for x, t in zip("abc", [0, 10, 10_000_000])]
        out = sessionize(its, gap_ms=1_800_000)
        assert [(s.session_id, len(s)) for s in out] == [("s#0", 2), ("s#1", 1)]

    def test_interleaved(self):
        its = [Interaction("u", "a", 1), Interaction("v", "b", 2), Interaction("u", "c", 3), Interaction("v", "d", 4)]
        out = {s.session_id: s.items for s in sessionize(its)}
        assert out == {"u": ("a", "c"), "v": ("b", "d")}

    def test_ties_keep_input_order(self):
        its = [Interaction("s", "b", 5), Interaction("s", "a", 5)]
        assert sessionize(its)[0].items == ("b", "a")

    @given(st.lists(st.tuples(st.sampled_from("uvw"), st.sampled_from("abcdef"), st.integers(0, 50)), max_size=40))
    def test_idempotent(self, rows):
        its = [Interaction(*r) for r in rows]
        once = sessionize(its)
        assert sessionize(flatten(once)) == once


class TestCatalog:
    def test_chain_under_root(self, tmp_path):
        p = write_lines(tmp_path / "c.jsonl", [{"item_id": "x", "category_path": "root>shoes>running"}])
        cat = load_catalog(p)
        assert ("root",) in cat.taxonomy and ("root", "shoes", "running") in cat.taxonomy
        assert len(cat.taxonomy) == 4  # synthetic root + 3-node chain

    def test_shared_prefixes(self, tmp_path):
        rows = [
            {"item_id": "x", "category_path": "a>b>c"},
            {"item_id": "y", "category_path": "a>b>d"},
            {"item_id": "z", "category_path": "a>e"},
            {"item_id": "w"},
        ]
        cat = load_catalog(write_lines(tmp_path / "c.jsonl", rows))
        # distinct prefixes: a, a>b, a>b>c, a>b>d, a>e
        assert len(cat.taxonomy) == 5 + 1
        assert cat.category_node("w") is None

    def test_duplicate_item(self, tmp_path):
        p = write_lines(tmp_path / "c.jsonl", [{"item_id": "x"}, {"item_id": "x"}])
        with pytest.raises(DataError, match="duplicate"):
            load_catalog(p)

    def test_negative_price(self, tmp_path):
        p = write_lines(tmp_path / "c.jsonl", [{"item_id": "x", "price": -3}])
        with pytest.raises(DataError, match="price"):
            load_catalog(p)

    def test_csv_extra_columns(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("item_id,price,brand,category_path,color\nx,12.5,nike,a>b,red\ny,,,,\n")
        cat = load_catalog(p, "csv")
        assert cat.get("x") == ItemMeta("x", 12.5, "nike", ("a", "b"), {"color": "red"})
        assert cat.get("y").price is None and cat.get("y").brand is None

    def test_jsonl_fields(self, tmp_path):
        rows = [{"item_id": "x", "price": 100, "brand": "asics", "category_path": "a>b", "extra": {"k": "v"}}]
        m = load_catalog(write_lines(tmp_path / "c.jsonl", rows)).get("x")
        assert (m.price, m.brand, m.category_path, dict(m.extra)) == (100.0, "asics", ("a", "b"), {"k": "v"})


class TestTemporalSplit:
    def ten(self):
        return sessions(*[["a", "b"]] * 10)

    def test_fraction_is_ceiling(self):
        ss = self.ten()
        train, test = temporal_split(ss, test_fraction=0.25)
        assert (len(train), len(test)) == (10 - math.ceil(2.5), 3)
        assert {s.session_id for s in test} == {"s7", "s8", "s9"}

    def test_fraction_latest_go_to_test(self):
        train, test = temporal_split(self.ten(), test_fraction=0.2)
        assert (len(train), len(test)) == (8, 2)
        assert {s.session_id for s in test} == {"s8", "s9"}

    def test_timestamp_before_all(self):
        with pytest.raises(DataError, match="train"):
            temporal_split(self.ten(), timestamp=-1)

    def test_timestamp_between(self):
        ss = sessions(*[["a"]] * 5)  # starts 0, 1000, ..., 4000
        train, test = temporal_split(ss, timestamp=2500)
        assert (len(train), len(test)) == (3, 2)

    def test_empty_test(self):
        with pytest.raises(DataError, match="test"):
            temporal_split(self.ten(), timestamp=10**9)

    @given(st.lists(st.integers(0, 100), min_size=2, max_size=30), st.floats(0.01, 0.99))
    def test_partition(self, starts, f):
        ss = tuple(Session(f"s{i}", ("a",), (t,)) for i, t in enumerate(starts))
        try:
            train, test = temporal_split(ss, test_fraction=f)
        except DataError:
            return
        assert len(train) + len(test) == len(ss)
        assert not {s.session_id for s in train} & {s.session_id for s in test}
        assert max(s.start for s in train) <= min(s.start for s in test)


class TestBuildTestCases:
    def test_next_item(self):
        (case,) = build_test_cases(sessions("abc"), "next_item")
        assert (case.query, case.ground_truth) == (("a", "b"), ("c",))

    def test_cart_dedup(self):
        (case,) = build_test_cases(sessions("aab"), "cart_last")
        assert (case.query, case.ground_truth) == (("a",), ("b",))

    def test_single_item_session(self):
        assert build_test_cases(sessions("a"), "next_item") == []

    def test_overlap_dropped_and_counted(self):
        cases = build_test_cases(sessions("aba", "xy"), "next_item")
        assert [c.query for c in cases] == [("x",)]
        assert cases.dropped == 1

    def test_min_query_len(self):
        assert len(build_test_cases(sessions("ab", "abc"), "next_item", min_query_len=2)) == 1

    @settings(max_examples=200)
    @given(
        st.lists(st.lists(st.sampled_from("abcde"), min_size=1, max_size=6), max_size=10),
        st.sampled_from(["next_item", "cart_last"]),
    )
    def test_invariants_hold(self, item_lists, scheme):
        for c in build_test_cases(sessions(*item_lists), scheme):
            assert c.query and c.ground_truth
            assert not set(c.query) & set(c.ground_truth)


class TestPopularity:
    def test_counts(self):
        assert item_popularity(sessions("ab", "a")) == {"a": 2, "b": 1}

    def test_empty(self):
        assert item_popularity(()) == {}

    def test_repeats(self):
        assert item_popularity(sessions("aa")) == {"a": 2}

    @given(st.lists(st.lists(st.sampled_from("abcdef"), min_size=1, max_size=8), max_size=10))
    def test_total(self, item_lists):
        ss = sessions(*item_lists)
        assert sum(item_popularity(ss).values()) == sum(len(s) for s in ss)


def test_testcase_invariants():
    with pytest.raises(ValueError):
        TestCase(("a",), ("a",))
    with pytest.raises(ValueError):
        TestCase((), ("a",))


def test_catalog_rejects_duplicates():
    with pytest.raises(DataError):
        Catalog([ItemMeta("a"), ItemMeta("a")])
