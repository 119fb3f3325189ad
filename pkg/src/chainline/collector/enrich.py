"""Enrichment: explicit ``addresses`` fields and integer satoshi values."""

from decimal import Decimal

from ..blockmodel import btc_to_satoshi, extract_addresses
from ..errors import AmountParseError, StructuralDataError


def _to_satoshi(value):
    # an integer JSON token is already in satoshis; decimal tokens and
    # strings are bitcoin amounts as returned by RPC
    if isinstance(value, bool):
        raise AmountParseError(f"boolean is not an amount: {value!r}")
    if isinstance(value, int):
        if value < 0:
            raise AmountParseError(f"negative amount: {value!r}")
        return value
    if isinstance(value, Decimal):
        return btc_to_satoshi(format(value, "f"))
    if isinstance(value, str):
        return btc_to_satoshi(value)
    raise AmountParseError(f"unsupported amount {value!r} ({type(value).__name__})")


def enrich_block(block):
    """Enrich one block in place and return it."""
    height = block.get("height")
    for tx in block.get("tx", ()):
        txid = tx.get("txid")
        for pos, out in enumerate(tx.get("vout", ())):
            try:
                out["value"] = _to_satoshi(out.get("value"))
            except AmountParseError as exc:
                raise AmountParseError(f"block {height} tx {txid} output {pos}: {exc}") from None
            spk = out.get("scriptPubKey")
            if not isinstance(spk, dict):
                raise StructuralDataError(f"block {height} tx {txid} output {pos} has no scriptPubKey object")
            if "addresses" not in spk:
                addrs = extract_addresses(spk, txid, pos)
                if addrs:
                    spk["addresses"] = addrs
    return block


def enrich(blocks):
    """Stream transform; idempotent (an enriched block is left unchanged)."""
    for block in blocks:
        yield enrich_block(block)
