"""Plot-ready statistics tables computed from the distilled views.

Every function takes an iterable of records (objects or their text lines)
and returns a list of row tuples; :func:`write_table` prints them as
space-separated lines.  All amount arithmetic is integer; ratios are
rendered to fixed decimals with integer rounding.
"""

import bisect
import heapq
import logging
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import List

from . import jsonl
from .distiller import AmountRecord, DistilledTx, SpendRecord

log = logging.getLogger(__name__)

DAY = 86400
DEFAULT_PER_DECADE = 10


def _records(items, cls):
    for item in items:
        yield cls.from_line(item) if isinstance(item, str) else item


def ratio_text(num, den, places=6):
    """``num / den`` rounded half-up to ``places`` decimals, as text."""
    if den <= 0:
        raise ValueError("denominator must be positive")
    neg = num < 0
    scaled, rem = divmod(abs(num) * 10 ** places, den)
    if 2 * rem >= den:
        scaled += 1
    whole, frac = divmod(scaled, 10 ** places)
    text = f"{whole}.{frac:0{places}d}" if places else str(whole)
    return "-" + text if neg and scaled else text


def write_table(path, rows):
    return jsonl.write_lines(path, (" ".join(str(v) for v in row) for row in rows))


# -- transactions over time, input/output correlation -------------------------


def tx_counts_over_time(records, bin_seconds=DAY):
    """``(bin_start, count)`` rows; empty bins in between are reported as 0."""
    if bin_seconds <= 0:
        raise ValueError("bin width must be positive")
    counts = Counter()
    for rec in _records(records, DistilledTx):
        counts[rec.timestamp // bin_seconds * bin_seconds] += 1
    if not counts:
        return []
    lo, hi = min(counts), max(counts)
    return [(start, counts.get(start, 0)) for start in range(lo, hi + bin_seconds, bin_seconds)]


def io_correlation(records):
    """``(nb_in, nb_out, frequency)`` rows sorted by the pair."""
    counts = Counter((rec.nb_in, rec.nb_out) for rec in _records(records, DistilledTx))
    return [(i, o, n) for (i, o), n in sorted(counts.items())]


# -- amounts -------------------------------------------------------------------


def log_threshold(k, per_decade=DEFAULT_PER_DECADE):
    """Smallest integer ``t`` with ``t >= 10 ** (k / per_decade)``, exactly."""
    target = 10 ** k
    lo, hi = 1, 1
    while hi ** per_decade < target:
        hi *= 2
    while lo < hi:
        mid = (lo + hi) // 2
        if mid ** per_decade >= target:
            hi = mid
        else:
            lo = mid + 1
    return lo


def _log_bin(amount, per_decade):
    # largest k with 10**k <= amount**per_decade
    return len(str(amount ** per_decade)) - 1


def amount_icdf(records, per_decade=DEFAULT_PER_DECADE, thresholds=None):
    """``(threshold, count of transactions with amount >= threshold)`` rows.

    The amount of a transaction is its output total in satoshis.  Default
    thresholds are ``0`` followed by ``per_decade`` logarithmic steps per
    power of ten, rounded up to whole satoshis.
    """
    amounts = (rec.out_total for rec in _records(records, AmountRecord))
    if thresholds is not None:
        ths = sorted(set(thresholds))
        hist = [0] * (len(ths) + 1)
        for a in amounts:
            hist[bisect.bisect_right(ths, a)] += 1
        rows = []
        running = 0
        for i in range(len(ths) - 1, -1, -1):
            running += hist[i + 1]
            rows.append((ths[i], running))
        return rows[::-1]

    total = 0
    bins = Counter()
    for a in amounts:
        total += 1
        if a >= 1:
            bins[_log_bin(a, per_decade)] += 1
    if not total:
        return []
    rows = [(0, total)]
    running = 0
    suffix = {}
    for k in range(max(bins, default=-1), -1, -1):
        running += bins.get(k, 0)
        suffix[k] = running
    for k in range(0, max(bins, default=-1) + 1):
        t = log_threshold(k, per_decade)
        if rows[-1][0] == t:
            continue
        rows.append((t, suffix[k]))
    return rows


@dataclass
class AmountsOverTime:
    top: List[tuple] = field(default_factory=list)
    bottom: List[tuple] = field(default_factory=list)
    daily: List[tuple] = field(default_factory=list)


def amounts_over_time(records, k):
    """The ``k`` largest and smallest transactions plus the daily mean.

    ``top``/``bottom`` rows are ``(timestamp, tx, amount)`` ordered by time;
    ``daily`` rows are ``(day_start, count, mean_amount)`` with UTC days.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    top, bottom = [], []
    days = {}
    for rec in _records(records, AmountRecord):
        a = rec.out_total
        item = (a, -rec.tx, rec.timestamp, rec.tx)
        if len(top) < k:
            heapq.heappush(top, item)
        elif item > top[0]:
            heapq.heapreplace(top, item)
        neg = (-a, -rec.tx, rec.timestamp, rec.tx)
        if len(bottom) < k:
            heapq.heappush(bottom, neg)
        elif neg > bottom[0]:
            heapq.heapreplace(bottom, neg)
        day = rec.timestamp // DAY * DAY
        n, s = days.get(day, (0, 0))
        days[day] = (n + 1, s + a)
    out = AmountsOverTime()
    out.top = sorted((ts, tx, a) for a, _, ts, tx in top)
    out.bottom = sorted((ts, tx, -na) for na, _, ts, tx in bottom)
    out.daily = [(day, n, ratio_text(s, n, 2)) for day, (n, s) in sorted(days.items())]
    return out


def fee_cdf(records, last=None):
    """``(fee, count with fee <= value, fraction)`` over non-coinbase transactions.

    ``last`` restricts the table to the final ``last`` transactions of the
    input.  Negative fees are kept and reported with a warning.
    """
    recs = _records(records, AmountRecord)
    if last is not None:
        recs = deque(recs, maxlen=last)
    fees = Counter(rec.fee for rec in recs if not rec.is_coinbase)
    total = sum(fees.values())
    negatives = sum(n for f, n in fees.items() if f < 0)
    if negatives:
        log.warning("%d transactions with negative fee (outputs exceed inputs)", negatives)
    rows = []
    running = 0
    for fee in sorted(fees):
        running += fees[fee]
        rows.append((fee, running, ratio_text(running, total)))
    return rows


# -- addresses -----------------------------------------------------------------


@dataclass
class AddressOccurrences:
    inputs: List[int] = field(default_factory=list)
    outputs: List[int] = field(default_factory=list)
    both_same_tx: int = 0

    @property
    def total(self):
        return [i + o for i, o in zip(self.inputs, self.outputs)]

    def __len__(self):
        return len(self.inputs)


def address_occurrences(records, n_addresses=0):
    """Per-address occurrence counts in flat tables indexed by address index.

    Also counts addresses that appear among both the inputs and the outputs
    of at least one transaction (``both_same_tx``).
    """
    occ = AddressOccurrences([0] * n_addresses, [0] * n_addresses)
    both = bytearray(n_addresses)

    def grow(a):
        extra = a + 1 - len(occ.inputs)
        occ.inputs.extend([0] * extra)
        occ.outputs.extend([0] * extra)
        both.extend(bytes(extra))

    for rec in _records(records, DistilledTx):
        for a in rec.in_addrs:
            if a >= len(occ.inputs):
                grow(a)
            occ.inputs[a] += 1
        for a in rec.out_addrs:
            if a >= len(occ.outputs):
                grow(a)
            occ.outputs[a] += 1
        if rec.in_addrs and rec.out_addrs:
            for a in set(rec.in_addrs).intersection(rec.out_addrs):
                both[a] = 1
    occ.both_same_tx = sum(both)
    return occ


def _icdf_counts(counts, top):
    hist = Counter(counts)
    out = [0] * (top + 2)
    for c in range(top, -1, -1):
        out[c] = out[c + 1] + hist.get(c, 0)
    return out


def address_reuse(records, n_addresses=0):
    """``(c, n_total, n_in, n_out)``: addresses with at least ``c`` occurrences.

    Rows run from ``c = 0`` (all addresses) to the largest count observed.
    """
    occ = address_occurrences(records, n_addresses)
    if not len(occ):
        return []
    total = occ.total
    top = max(total)
    t, i, o = _icdf_counts(total, top), _icdf_counts(occ.inputs, top), _icdf_counts(occ.outputs, top)
    return [(c, t[c], i[c], o[c]) for c in range(top + 1)]


def address_summary(records, n_addresses=0):
    """Headline reuse figures: addresses used once, twice, and in+out."""
    occ = address_occurrences(records, n_addresses)
    n = len(occ)
    hist = Counter(occ.total)
    return {
        "addresses": n,
        "used_once": hist.get(1, 0),
        "used_twice": hist.get(2, 0),
        "input_and_output_same_tx": occ.both_same_tx,
        "max_input_occurrences": max(occ.inputs, default=0),
        "max_output_occurrences": max(occ.outputs, default=0),
    }


def top_addresses(records, k=2):
    occ = address_occurrences(records)
    return heapq.nlargest(k, range(len(occ)), key=lambda a: (occ.inputs[a] + occ.outputs[a], -a))


def address_timeline(records, addresses):
    """Running occurrence counts for the given addresses.

    Returns ``{address: [(timestamp, tx, cum_in, cum_out, cum_total), ...]}``
    with one row per occurrence; an input occurrence is listed before an
    output occurrence of the same transaction.
    """
    wanted = {a: [0, 0] for a in addresses}
    series = {a: [] for a in addresses}
    for rec in _records(records, DistilledTx):
        for side, addrs in ((0, rec.in_addrs), (1, rec.out_addrs)):
            for a in addrs:
                state = wanted.get(a)
                if state is None:
                    continue
                state[side] += 1
                series[a].append((rec.timestamp, rec.tx, state[0], state[1], state[0] + state[1]))
    for a, rows in series.items():
        if not rows:
            log.warning("address index %d does not occur in the input", a)
    return series


# -- spending delays -------------------------------------------------------------


def spending_delay(records):
    """``(delay_in_blocks, count)`` over all spent TIOs, sorted by delay."""
    counts = Counter(rec.delay for rec in _records(records, SpendRecord))
    return sorted(counts.items())


METRICS = (
    "tx-counts",
    "io-correlation",
    "amount-icdf",
    "amounts-top",
    "amounts-bottom",
    "amounts-daily",
    "address-reuse",
    "address-timeline",
    "address-summary",
    "fee-cdf",
    "spending-delay",
)
