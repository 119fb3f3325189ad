"""Block data model, address extraction, satoshi arithmetic, traversal order.

Blocks are handled as the plain dicts produced by the JSON decoder so that
fields this module does not know about survive every stage untouched.  The
expected shape is::

    {"height": 2, "hash": "...", "previousblockhash": "...", "time": 1600001400,
     "tx": [{"txid": "...",
             "vin": [{"txid": "...", "vout": 0} | {"coinbase": "..."}],
             "vout": [{"value": 200000000, "n": 0,
                       "scriptPubKey": {"type": "pubkeyhash", "asm": "...",
                                        "addresses": ["..."]}}]}]}

The occurrence traversal defined here is the single source of truth for
the order in which item occurrences are ranked; the indexer and the
annotator both walk blocks through :func:`walk_chain`.
"""

import enum
import logging
import re
from typing import NamedTuple, Optional, Union

from .errors import AmountParseError, SequencingError, StructuralDataError

log = logging.getLogger(__name__)

SATOSHI_PER_BTC = 100_000_000
NO_ADDRESS_TYPES = frozenset({"nulldata", "nonstandard"})

_AMOUNT_RE = re.compile(r"(\d+)(?:\.(\d{1,8}))?")
_AMOUNT_SHAPE_RE = re.compile(r"-?\d*(?:\.\d*)?")
_unknown_types_seen = set()


class Kind(enum.Enum):
    """Namespace of a native identifier; the value is its serialization tag."""

    ADDR = "a"
    TIO = "o"
    TX = "t"


class NativeId(NamedTuple):
    kind: Kind
    payload: Union[str, tuple]

    def text(self):
        """Untagged form as printed in listings: ``A``, ``A,0``, ``b``."""
        if self.kind is Kind.TIO:
            return f"{self.payload[0]},{self.payload[1]}"
        return self.payload

    def serialize(self):
        return self.kind.value + self.text()

    @classmethod
    def parse(cls, text):
        kind = Kind(text[0])
        body = text[1:]
        if kind is Kind.TIO:
            txid, _, rank = body.rpartition(",")
            return cls(kind, (txid, int(rank)))
        return cls(kind, body)

    @classmethod
    def tx(cls, txid):
        return cls(Kind.TX, txid)

    @classmethod
    def tio(cls, txid, rank):
        return cls(Kind.TIO, (txid, rank))

    @classmethod
    def addr(cls, address):
        return cls(Kind.ADDR, address)


def strip_tag(serialized):
    return serialized[1:]


class Occurrence(NamedTuple):
    rank: int
    nid: NativeId
    index: Optional[int] = None

    def to_line(self):
        if self.index is None:
            return f"{self.rank} {self.nid.serialize()}"
        return f"{self.rank} {self.nid.serialize()} {self.index}"

    @classmethod
    def from_line(cls, line):
        parts = line.split(" ")
        index = int(parts[2]) if len(parts) > 2 else None
        return cls(int(parts[0]), NativeId.parse(parts[1]), index)


# -- amounts -----------------------------------------------------------------


def btc_to_satoshi(decimal_text):
    """Convert a decimal bitcoin amount given as text to integer satoshis.

    Pure string/integer arithmetic: ``"1.5"`` -> ``150000000``.
    """
    text = str(decimal_text).strip()
    m = _AMOUNT_RE.fullmatch(text)
    if m is None:
        if text.startswith("-") and _AMOUNT_SHAPE_RE.fullmatch(text):
            raise AmountParseError(f"negative amount: {text!r}")
        if _AMOUNT_SHAPE_RE.fullmatch(text) and "." in text and len(text.split(".")[1]) > 8:
            raise AmountParseError(f"more than 8 fractional digits: {text!r}")
        raise AmountParseError(f"not a decimal bitcoin amount: {text!r}")
    whole, frac = m.group(1), m.group(2) or ""
    return int(whole) * SATOSHI_PER_BTC + int(frac.ljust(8, "0"))


def satoshi_to_btc(amount):
    """Exact inverse of :func:`btc_to_satoshi` (always 8 fractional digits)."""
    if not isinstance(amount, int) or isinstance(amount, bool) or amount < 0:
        raise AmountParseError(f"not a satoshi amount: {amount!r}")
    whole, frac = divmod(amount, SATOSHI_PER_BTC)
    return f"{whole}.{frac:08d}"


# -- addresses ---------------------------------------------------------------


def _check_address(addr, txid, n):
    if not isinstance(addr, str) or not addr or any(c.isspace() for c in addr):
        raise StructuralDataError(f"invalid address {addr!r} in tx {txid} output {n}")
    return addr


def extract_addresses(spk, txid=None, n=None):
    """Addresses owning an output, following the ``scriptPubKey`` rules.

    ``nulldata``/``nonstandard`` outputs have none; an explicit ``addresses``
    list is taken verbatim; a ``pubkey`` output's address is the first word
    of ``asm``.  Any other type without an addresses field is address-less.
    """
    stype = spk.get("type")
    if stype in NO_ADDRESS_TYPES:
        return []
    if "addresses" in spk:
        return [_check_address(a, txid, n) for a in spk["addresses"]]
    if "address" in spk:
        return [_check_address(spk["address"], txid, n)]
    if stype == "pubkey":
        words = (spk.get("asm") or "").split()
        if not words:
            raise StructuralDataError(f"pubkey output with empty asm in tx {txid} output {n}")
        return [_check_address(words[0], txid, n)]
    if stype not in _unknown_types_seen:
        _unknown_types_seen.add(stype)
        log.warning("scriptPubKey type %r has no addresses field; treated as address-less", stype)
    return []


# -- structure ---------------------------------------------------------------


def is_coinbase_input(vin):
    has_cb = "coinbase" in vin
    has_ref = "txid" in vin
    if has_cb == has_ref:
        raise StructuralDataError(f"input must be either coinbase or a (txid, vout) reference: {vin!r}")
    return has_cb


def check_output_rank(out, position, txid):
    if out.get("n") != position:
        raise StructuralDataError(f"tx {txid}: output at position {position} has n={out.get('n')!r}")


def check_sequence(blocks):
    """Yield blocks, requiring heights 0, 1, 2, ... in order."""
    expected = 0
    for block in blocks:
        height = block.get("height")
        if height != expected:
            raise SequencingError(f"expected block height {expected}, got {height!r}")
        expected += 1
        yield block


# -- occurrence traversal ----------------------------------------------------


class Slot(NamedTuple):
    """One item occurrence and the JSON object that will carry its index."""

    rank: int
    nid: NativeId
    index: Optional[int]
    target: dict
    field: str
    pos: Optional[int] = None


def walk_chain(blocks):
    """Yield a :class:`Slot` for every item occurrence, in canonical order.

    Per transaction: its txid (indexed); for each non-coinbase input the
    referenced txid then the referenced TIO; for each output its TIO
    (indexed) then each listed address.
    """
    rank = 0
    n_tx = 0
    n_out = 0
    for block in check_sequence(blocks):
        for tx in block.get("tx", ()):
            txid = tx["txid"]
            yield Slot(rank, NativeId.tx(txid), n_tx, tx, "index")
            rank += 1
            n_tx += 1
            for vin in tx.get("vin", ()):
                if is_coinbase_input(vin):
                    continue
                yield Slot(rank, NativeId.tx(vin["txid"]), None, vin, "txid_index")
                yield Slot(rank + 1, NativeId.tio(vin["txid"], vin["vout"]), None, vin, "tio_index")
                rank += 2
            for pos, out in enumerate(tx.get("vout", ())):
                check_output_rank(out, pos, txid)
                yield Slot(rank, NativeId.tio(txid, pos), n_out, out, "tio_index")
                rank += 1
                n_out += 1
                spk = out.get("scriptPubKey") or {}
                for k, addr in enumerate(extract_addresses(spk, txid, pos)):
                    yield Slot(rank, NativeId.addr(addr), None, spk, "address_indexes", k)
                    rank += 1


def iterate_occurrences(blocks):
    """Stream ``Occurrence(rank, native_id, index_or_None)`` tuples."""
    for slot in walk_chain(blocks):
        yield Occurrence(slot.rank, slot.nid, slot.index)
