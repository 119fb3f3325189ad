import math
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import golden
from chainline.analytics import (
    address_occurrences,
    address_reuse,
    address_summary,
    address_timeline,
    amount_icdf,
    amounts_over_time,
    fee_cdf,
    io_correlation,
    log_threshold,
    ratio_text,
    spending_delay,
    top_addresses,
    tx_counts_over_time,
)
from chainline.distiller import AmountRecord, distill

DISTILLED = golden.distilled_with_times()


def golden_amounts():
    return list(distill(golden.indexed_blocks(), "amounts"))


def golden_spends():
    return list(distill(golden.indexed_blocks(), "tios"))


def test_tx_counts_per_block_interval():
    rows = tx_counts_over_time(DISTILLED, bin_seconds=600)
    assert rows == [(golden.T0, 2), (golden.T1, 1), (golden.T2, 2)]


def test_tx_counts_fill_empty_bins():
    lines = ["0 0 0 0 1 1", "1 250 1 0 1 1"]
    assert tx_counts_over_time(lines, bin_seconds=100) == [(0, 1), (100, 0), (200, 1)]
    with pytest.raises(ValueError):
        tx_counts_over_time(lines, bin_seconds=0)


def test_io_correlation_golden():
    assert io_correlation(DISTILLED) == [(0, 2, 1), (1, 2, 2), (2, 1, 1), (2, 2, 1)]


def test_address_reuse_golden():
    occ = address_occurrences(DISTILLED)
    assert occ.inputs == [2, 2, 1, 0, 1, 0]
    # c is paid twice by tx 3 but counts once per transaction
    assert occ.outputs == [2, 3, 1, 1, 1, 1]
    rows = address_reuse(DISTILLED)
    assert rows[0] == (0, 6, 6, 6)
    assert rows[1] == (1, 6, 4, 6)
    assert rows[-1][0] == 5


def test_address_summary_golden():
    s = address_summary(DISTILLED)
    assert s["addresses"] == 6
    # b in tx 1 and f in tx 2 are both spent from and paid to
    assert s["input_and_output_same_tx"] == 2
    assert top_addresses(DISTILLED, 2) == [1, 0]


def test_address_timeline_golden():
    series = address_timeline(DISTILLED, [1])
    assert [r[4] for r in series[1]] == [1, 2, 3, 4, 5]
    assert series[1][-1] == (golden.T2, 4, 2, 3, 5)


def test_spending_delay_golden():
    assert spending_delay(golden_spends()) == [(0, 2), (1, 3), (2, 1)]


def test_fee_cdf_golden():
    assert fee_cdf(golden_amounts()) == [(0, 4, "1.000000")]


def test_fee_cdf_last_and_negative(caplog):
    recs = [AmountRecord(0, 0, 0, 0, 50, 0), AmountRecord(0, 0, 1, 10, 7, 1),
            AmountRecord(0, 0, 2, 5, 6, 1), AmountRecord(0, 0, 3, 9, 9, 2)]
    assert fee_cdf(recs) == [(-1, 1, "0.333333"), (0, 2, "0.666667"), (3, 3, "1.000000")]
    assert "negative fee" in caplog.text
    assert fee_cdf(recs, last=1) == [(0, 1, "1.000000")]


def test_amounts_over_time_golden():
    res = amounts_over_time(golden_amounts(), 2)
    assert sorted(a for _, _, a in res.top) == [7, 7]
    assert sorted(a for _, _, a in res.bottom) == [3, 5]
    assert res.daily == [(golden.T0 // 86400 * 86400, 5, "5.40")]
    with pytest.raises(ValueError):
        amounts_over_time([], 0)


def test_amount_icdf_golden():
    rows = amount_icdf(golden_amounts(), per_decade=1)
    assert rows == [(0, 5), (1, 5)]
    rows = amount_icdf(golden_amounts(), thresholds=[4, 6, 8])
    assert rows == [(4, 4), (6, 2), (8, 0)]


@pytest.mark.parametrize("k,d", [(0, 10), (1, 10), (7, 10), (10, 10), (13, 4), (25, 10), (3, 1)])
def test_log_threshold_exact(k, d):
    t = log_threshold(k, d)
    # smallest integer t with t**d >= 10**k, checked with exact integers
    assert t ** d >= 10 ** k and (t - 1) ** d < 10 ** k


@given(st.integers(-10 ** 12, 10 ** 12), st.integers(1, 10 ** 9), st.integers(0, 8))
def test_ratio_text_matches_fraction(num, den, places):
    exact = Fraction(num, den)
    text = ratio_text(num, den, places)
    # half-up on the magnitude, computed independently with Fraction
    mag = abs(exact) * 10 ** places
    rounded = math.floor(mag + Fraction(1, 2))
    assert Fraction(text) == (rounded if exact >= 0 else -rounded) / Fraction(10 ** places)


amount_records = st.lists(
    st.builds(AmountRecord, st.integers(0, 50), st.integers(0, 10 ** 6), st.integers(0, 10 ** 4),
              st.integers(0, 10 ** 12), st.integers(0, 10 ** 12), st.integers(0, 5)),
    max_size=60,
)


@settings(max_examples=50, deadline=None)
@given(amount_records)
def test_icdf_mass_and_brute_force(recs):
    rows = amount_icdf(recs)
    if not recs:
        assert rows == []
        return
    assert rows[0] == (0, len(recs))
    for t, n in rows:
        assert n == sum(1 for r in recs if r.out_total >= t)
    counts = [n for _, n in rows]
    assert counts == sorted(counts, reverse=True)


@settings(max_examples=50, deadline=None)
@given(amount_records)
def test_fee_cdf_mass(recs):
    rows = fee_cdf(recs)
    paying = [r for r in recs if r.nb_spent > 0]
    assert (rows[-1][1] if rows else 0) == len(paying)
    for fee, cum, _ in rows:
        assert cum == sum(1 for r in paying if r.in_total - r.out_total <= fee)


@settings(max_examples=50, deadline=None)
@given(amount_records, st.integers(1, 5))
def test_amounts_over_time_brute_force(recs, k):
    res = amounts_over_time(recs, k)
    amounts = sorted(r.out_total for r in recs)
    assert sorted(a for *_, a in res.top) == amounts[len(amounts) - min(k, len(amounts)):]
    assert sorted(a for *_, a in res.bottom) == amounts[:k]
    assert sum(n for _, n, _ in res.daily) == len(recs)


distilled_lines = st.lists(
    st.tuples(st.integers(0, 10 ** 6),
              st.sets(st.integers(0, 30), max_size=4), st.sets(st.integers(0, 30), min_size=1, max_size=4)),
    max_size=50,
).map(lambda txs: [" ".join(map(str, [0, ts, i, len(a), len(b)] + sorted(a) + sorted(b)))
                   for i, (ts, a, b) in enumerate(txs)])


@settings(max_examples=50, deadline=None)
@given(distilled_lines)
def test_distilled_histograms_conserve_mass(lines):
    assert sum(n for _, _, n in io_correlation(lines)) == len(lines)
    assert sum(n for _, n in tx_counts_over_time(lines, 3600)) == len(lines)
    ins, outs = Counter(), Counter()
    for line in lines:
        f = list(map(int, line.split()))
        ins.update(f[5:5 + f[3]])
        outs.update(f[5 + f[3]:])
    occ = address_occurrences(lines)
    assert sum(occ.inputs) == sum(f[3] for f in (list(map(int, l.split())) for l in lines))
    rows = address_reuse(lines)
    n_addr = max(list(ins) + list(outs), default=-1) + 1
    assert len(rows) == (max((ins[a] + outs[a] for a in range(n_addr)), default=0) + 1 if lines else 0)
    for c, n_total, n_in, n_out in rows:
        assert n_total == sum(1 for a in range(n_addr) if ins[a] + outs[a] >= c)
        assert n_in == sum(1 for a in range(n_addr) if ins[a] >= c)
        assert n_out == sum(1 for a in range(n_addr) if outs[a] >= c)
    assert occ.inputs == [ins[a] for a in range(n_addr)]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 100), st.integers(0, 100)), max_size=50))
def test_spending_delay_mass(pairs):
    spends = [f"{c + d} {i} {c}" for i, (c, d) in enumerate(pairs)]
    rows = spending_delay(spends)
    assert sum(n for _, n in rows) == len(spends)
    assert dict(rows) == Counter(d for _, d in pairs)
