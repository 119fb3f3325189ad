import os

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import golden
import oracles
from chainline import jsonl
from chainline.cluster import (
    DEFAULT_KOUT_GRID,
    ClusterMetricsRow,
    DisjointSet,
    LinkRecord,
    cluster_file,
    emit_links,
    format_kout,
    metrics_filename,
    parse_kout,
    parse_kout_list,
    sort_links,
    sweep,
)
from chainline.collector.synth import SynthSpec, synth_blocks
from chainline.distiller import distill
from chainline.errors import RecordError, SequencingError
from chainline.extsort import SortBudget
from chainline.indexer import index_blocks


def golden_links():
    return list(emit_links(golden.distilled_with_times()))


def test_golden_links():
    assert golden_links() == [
        LinkRecord(0, 0, 1, 2),
        LinkRecord(1, 2, 2, 1),
        LinkRecord(0, 1, 2, 2),
        LinkRecord(4, 4, 1, 2),
    ]


def test_golden_sweep_unbounded():
    rows = list(sweep(sort_links(r.to_line() for r in golden_links())))
    assert rows == [ClusterMetricsRow(1, None, 2, 1), ClusterMetricsRow(2, None, 2, 3)]
    assert rows[1].to_line() == "2 inf 2 3"


def test_golden_sweep_kout_1():
    rows = list(sweep(sort_links(r.to_line() for r in golden_links()), k_out=1))
    assert rows == [ClusterMetricsRow(1, 1, 0, 0), ClusterMetricsRow(2, 1, 1, 2)]


def test_kout_zero_admits_nothing():
    rows = list(sweep(sort_links(r.to_line() for r in golden_links()), k_out=0))
    assert all(r.n_clusters == 0 and r.max_size == 0 for r in rows)


def test_empty_links():
    assert list(sweep([])) == []


def test_single_input_chain():
    lines = ["0 1 0 1 1 5 9", "0 1 1 1 1 6 9", "0 1 2 1 1 5 9"]
    assert list(sweep(sort_links(r.to_line() for r in emit_links(lines)))) == [ClusterMetricsRow(1, None, 2, 1)]


def test_unsorted_links_rejected():
    with pytest.raises(SequencingError):
        list(sweep(["0 1 3 1", "0 2 2 1"]))


def test_bounded_table():
    with pytest.raises(RecordError):
        list(sweep(["0 9 2 1"], n_addresses=5))


def test_kout_parsing():
    assert parse_kout("inf") is None and parse_kout("7") == 7
    assert format_kout(None) == "inf"
    assert parse_kout_list("1..15,inf") == list(DEFAULT_KOUT_GRID)
    assert parse_kout_list("2,5") == [2, 5]
    assert metrics_filename(None) == "kout_inf.txt"
    for bad in ("", "x", "3..1", "-1"):
        with pytest.raises(ValueError):
            parse_kout_list(bad)


def test_link_line_roundtrip():
    rec = LinkRecord(3, 7, 4, 2)
    assert LinkRecord.from_line(rec.to_line()) == rec
    assert LinkRecord(1, 1, 1, 3).is_node


@given(st.lists(st.tuples(st.integers(0, 40), st.integers(0, 40)), max_size=80))
def test_disjoint_set_counts(pairs):
    ds = DisjointSet()
    for a, b in pairs:
        ds.union(a, b)
    nodes = {x for p in pairs for x in p}
    comps = {}
    for x in nodes:
        comps.setdefault(ds.find(x), []).append(x)
    assert ds.n_clusters == len(comps)
    assert ds.max_size == max((len(c) for c in comps.values()), default=0)
    for a, b in pairs:
        assert ds.find(a) == ds.find(b)


def test_cluster_file(tmp_path):
    src = str(tmp_path / "d.txt")
    jsonl.write_lines(src, golden.distilled_with_times())
    written = cluster_file(src, str(tmp_path / "out"), k_outs=[1, None], budget=SortBudget(memory=4096))
    assert sorted(os.path.basename(p) for p in written.values()) == ["kout_1.txt", "kout_inf.txt"]
    assert list(jsonl.read_lines(written[None])) == ["1 inf 2 1", "2 inf 2 3"]
    assert list(jsonl.read_lines(written[1])) == ["1 1 0 0", "2 1 1 2"]


def distilled_chain(spec):
    blocks = list(synth_blocks(spec))
    return list(distill(index_blocks(blocks, memory=1 << 20), "addresses"))


def merges_and_max(rows, lines, k_out):
    out = []
    for row in rows:
        _, largest, n_nodes = oracles.cluster_oracle(lines, row.k_in, k_out)
        out.append((n_nodes - row.n_clusters, row.max_size))
    return out


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 40), st.integers(0, 2 ** 32), st.sampled_from([1, 2, 3, None]))
def test_sweep_matches_components(n_blocks, seed, k_out):
    lines = distilled_chain(SynthSpec(blocks=n_blocks, seed=seed, inputs_per_tx=(1, 5), outputs_per_tx=(1, 4)))
    links = list(sort_links(r.to_line() for r in emit_links(lines)))
    for row in sweep(links, k_out):
        n_comp, largest, _ = oracles.cluster_oracle(lines, row.k_in, k_out)
        assert (row.n_clusters, row.max_size) == (n_comp, largest)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 40), st.integers(0, 2 ** 32))
def test_monotone_in_kin(n_blocks, seed):
    lines = distilled_chain(SynthSpec(blocks=n_blocks, seed=seed, inputs_per_tx=(1, 5)))
    links = list(sort_links(r.to_line() for r in emit_links(lines)))
    for k_out in (1, 2, None):
        stats = merges_and_max(list(sweep(links, k_out)), lines, k_out)
        for (m0, s0), (m1, s1) in zip(stats, stats[1:]):
            assert m1 >= m0 and s1 >= s0
