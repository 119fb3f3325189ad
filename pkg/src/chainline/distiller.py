"""Distillation of an indexed chain into flat, space-delimited views.

Three views are produced from one sequential pass:

``addresses``  ``block timestamp tx nb_in nb_out in_1 .. in_k out_1 .. out_m``
``amounts``    ``block timestamp tx in_total out_total nb_spent``
``tios``       ``spend_block tio_index create_block``

Input addresses, amounts and creation heights are resolved through a
:class:`TioStore` that drops an entry as soon as it has been spent.
"""

from dataclasses import dataclass, field
from typing import List, NamedTuple, Tuple

from . import jsonl
from .blockmodel import is_coinbase_input
from .errors import ChainIntegrityError, StructuralDataError

VIEWS = ("addresses", "amounts", "tios")


class TioEntry(NamedTuple):
    addresses: Tuple[int, ...]
    value: int
    height: int


class TioStore:
    """Dense table keyed by TIO index with drop-after-use.

    TIO indexes are handed out densely in creation order, so the table is a
    sequence of fixed-size segments.  Spent entries are tombstoned and a
    segment is released once all of its entries are spent.
    """

    def __init__(self, segment_size=4096):
        self.segment_size = segment_size
        self._segments = {}
        self._next = 0
        self.live = 0
        self.peak_live = 0
        self.allocated = 0
        self.peak_allocated = 0

    def __len__(self):
        return self.live

    def add(self, tio_index, entry):
        if tio_index != self._next:
            raise ChainIntegrityError(f"output tio_index {tio_index} out of sequence, expected {self._next}")
        seg_no, off = divmod(tio_index, self.segment_size)
        seg = self._segments.get(seg_no)
        if seg is None:
            seg = self._segments[seg_no] = [[None] * self.segment_size, 0]
            self.allocated += self.segment_size
            self.peak_allocated = max(self.peak_allocated, self.allocated)
        seg[0][off] = entry
        seg[1] += 1
        self._next += 1
        self.live += 1
        if self.live > self.peak_live:
            self.peak_live = self.live

    def take(self, tio_index):
        """Return the entry for ``tio_index`` and release it."""
        if not 0 <= tio_index < self._next:
            raise ChainIntegrityError(f"input references unknown TIO index {tio_index}")
        seg_no, off = divmod(tio_index, self.segment_size)
        seg = self._segments.get(seg_no)
        entry = seg[0][off] if seg is not None else None
        if entry is None:
            raise ChainIntegrityError(f"input references already spent TIO index {tio_index}")
        seg[0][off] = None
        seg[1] -= 1
        self.live -= 1
        if seg[1] == 0 and (seg_no + 1) * self.segment_size <= self._next:
            del self._segments[seg_no]
            self.allocated -= self.segment_size
        return entry


@dataclass
class ResolvedTx:
    block: int
    timestamp: int
    index: int
    inputs: List[Tuple[int, TioEntry]] = field(default_factory=list)
    outputs: List[TioEntry] = field(default_factory=list)

    @property
    def is_coinbase(self):
        return not self.inputs


def _required(obj, key, where):
    try:
        return obj[key]
    except KeyError:
        raise StructuralDataError(f"{where} lacks {key!r}; is the chain indexed?") from None


def _as_int(value, where):
    if isinstance(value, bool) or not isinstance(value, int):
        raise StructuralDataError(f"{where}: value {value!r} is not an integer satoshi amount; run enrich first")
    return value


def resolve(blocks, store=None):
    """Yield a :class:`ResolvedTx` per transaction, spending inputs from ``store``."""
    store = TioStore() if store is None else store
    for block in blocks:
        height = block["height"]
        ts = block.get("time")
        for tx in block.get("tx", ()):
            where = f"block {height} tx {tx.get('txid')}"
            rtx = ResolvedTx(height, ts, _required(tx, "index", where))
            for vin in tx.get("vin", ()):
                if is_coinbase_input(vin):
                    continue
                tio = _required(vin, "tio_index", where)
                try:
                    rtx.inputs.append((tio, store.take(tio)))
                except ChainIntegrityError as exc:
                    raise ChainIntegrityError(f"{where}: {exc}") from None
            for out in tx.get("vout", ()):
                spk = out.get("scriptPubKey") or {}
                entry = TioEntry(tuple(spk.get("address_indexes", ())), _as_int(out.get("value"), where), height)
                store.add(_required(out, "tio_index", where), entry)
                rtx.outputs.append(entry)
            yield rtx


@dataclass
class DistilledTx:
    block: int
    timestamp: int
    tx: int
    in_addrs: List[int]
    out_addrs: List[int]

    @property
    def nb_in(self):
        return len(self.in_addrs)

    @property
    def nb_out(self):
        return len(self.out_addrs)

    def to_line(self):
        head = [self.block, self.timestamp, self.tx, self.nb_in, self.nb_out]
        return " ".join(map(str, head + self.in_addrs + self.out_addrs))

    @classmethod
    def from_line(cls, line):
        f = [int(x) for x in line.split()]
        if len(f) < 5 or len(f) != 5 + f[3] + f[4]:
            raise StructuralDataError(f"malformed distilled line: {line!r}")
        nb_in = f[3]
        return cls(f[0], f[1], f[2], f[5:5 + nb_in], f[5 + nb_in:])


class AmountRecord(NamedTuple):
    block: int
    timestamp: int
    tx: int
    in_total: int
    out_total: int
    nb_spent: int

    def to_line(self):
        return " ".join(map(str, self))

    @classmethod
    def from_line(cls, line):
        return cls(*(int(x) for x in line.split()))

    @property
    def is_coinbase(self):
        return self.nb_spent == 0

    @property
    def fee(self):
        return self.in_total - self.out_total


class SpendRecord(NamedTuple):
    spend_block: int
    tio: int
    create_block: int

    def to_line(self):
        return " ".join(map(str, self))

    @classmethod
    def from_line(cls, line):
        return cls(*(int(x) for x in line.split()))

    @property
    def delay(self):
        return self.spend_block - self.create_block


def _distinct_sorted(groups):
    return sorted({a for g in groups for a in g})


def distill_addresses(blocks, store=None):
    for rtx in resolve(blocks, store):
        yield DistilledTx(
            rtx.block,
            rtx.timestamp,
            rtx.index,
            _distinct_sorted(e.addresses for _, e in rtx.inputs),
            _distinct_sorted(e.addresses for e in rtx.outputs),
        )


def distill_amounts(blocks, store=None):
    for rtx in resolve(blocks, store):
        yield AmountRecord(
            rtx.block,
            rtx.timestamp,
            rtx.index,
            sum(e.value for _, e in rtx.inputs),
            sum(e.value for e in rtx.outputs),
            len(rtx.inputs),
        )


def distill_tios(blocks, store=None):
    for rtx in resolve(blocks, store):
        for tio, entry in rtx.inputs:
            yield SpendRecord(rtx.block, tio, entry.height)


_VIEW_FUNCS = {"addresses": distill_addresses, "amounts": distill_amounts, "tios": distill_tios}


def distill(blocks, view, store=None):
    """Yield text lines of the requested view."""
    try:
        func = _VIEW_FUNCS[view]
    except KeyError:
        raise ValueError(f"unknown view {view!r}; expected one of {VIEWS}") from None
    for rec in func(blocks, store):
        yield rec.to_line()


def distill_file(in_path, out_path, view, compress=False):
    store = TioStore()
    n = jsonl.write_lines(out_path, distill(jsonl.read_blocks(in_path), view, store), compress)
    return n, store


def read_distilled(path):
    for line in jsonl.read_lines(path):
        yield DistilledTx.from_line(line)


def read_amounts(path):
    for line in jsonl.read_lines(path):
        yield AmountRecord.from_line(line)


def read_spends(path):
    for line in jsonl.read_lines(path):
        yield SpendRecord.from_line(line)
