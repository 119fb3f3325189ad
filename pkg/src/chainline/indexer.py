"""Prefix-consistent indexing of transactions, TIOs and addresses.

No index table is ever held in memory.  Instead every item occurrence is
listed with its global rank, the listing is grouped by native identifier
with an external sort, each group's index (carried by its first tuple) is
spread to all its occurrences, and the resulting ``rank index`` pairs are
sorted back by rank.  A final sequential pass over the chain and the pair
file adds the index fields.

Intermediate file formats (one record per line, single-space delimited,
identifiers carry a one-character namespace tag):

* step 1: ``rank id [index]``
* step 2: ``-1 address-id index``
* step 3: step 1 and step 2 merged, grouped by identifier
* step 4: ``rank index``, ranks 0..M-1
"""

import logging
import os
import shutil
import tempfile
from dataclasses import dataclass

from . import jsonl
from .blockmodel import Kind, walk_chain
from .errors import AlignmentError, InvariantViolation
from .extsort import DEFAULT_MEMORY, ExternalSorter, SortBudget, external_unique_first

log = logging.getLogger(__name__)

ADDED_FIELDS = ("index", "txid_index", "tio_index", "address_indexes")

BY_ADDRESS = "1,2n"
BY_RANK_2 = "2n"
BY_ID_THEN_RANK = "2,1n"
BY_RANK = "1n"


def step1_occurrences(blocks):
    """Lines ``rank id [index]`` for every item occurrence."""
    for slot in walk_chain(blocks):
        if slot.index is None:
            yield f"{slot.rank} {slot.nid.serialize()}"
        else:
            yield f"{slot.rank} {slot.nid.serialize()} {slot.index}"


def address_occurrences(blocks):
    """Lines ``address rank`` with a rank counting address occurrences only."""
    rank = 0
    for slot in walk_chain(blocks):
        if slot.nid.kind is Kind.ADDR:
            yield f"{slot.nid.serialize()} {rank}"
            rank += 1


def step2_address_triplets(blocks, budget=None):
    """Lines ``-1 address index``, addresses in first-occurrence order."""
    budget = budget or SortBudget()
    by_addr = ExternalSorter(BY_ADDRESS, budget).sort(address_occurrences(blocks))
    firsts = external_unique_first(by_addr, group_field=0, order_field=1)
    by_rank = ExternalSorter(BY_RANK_2, budget).sort(firsts)
    for index, line in enumerate(by_rank):
        yield f"-1 {line.split(' ', 1)[0]} {index}"


def step3_group(step1_lines, step2_lines, budget=None):
    """Merge both tuple streams so each identifier's tuples are adjacent.

    Within a group tuples are ordered by rank, so the ``-1`` address
    triplet (or the indexed first occurrence) leads.
    """
    budget = budget or SortBudget()

    def both():
        yield from step1_lines
        yield from step2_lines

    return ExternalSorter(BY_ID_THEN_RANK, budget).sort(both())


def _spread(grouped_lines):
    current = None
    index = None
    for line in grouped_lines:
        parts = line.split(" ")
        if parts[1] != current:
            current = parts[1]
            if len(parts) < 3:
                raise InvariantViolation(f"first tuple of group {current!r} carries no index: {line!r}")
            index = parts[2]
        elif len(parts) > 2 and parts[2] != index:
            raise InvariantViolation(f"conflicting indexes {index} and {parts[2]} for {current!r}")
        if parts[0] != "-1":
            yield f"{parts[0]} {index}"


def step4_annotation_stream(grouped_lines, budget=None):
    """``rank index`` pairs sorted by rank, checked to be exactly 0..M-1."""
    budget = budget or SortBudget()
    expected = 0
    for line in ExternalSorter(BY_RANK, budget).sort(_spread(grouped_lines)):
        rank = int(line.split(" ", 1)[0])
        if rank != expected:
            what = "duplicate" if rank < expected else "missing"
            raise InvariantViolation(f"{what} occurrence rank: expected {expected}, got {rank}")
        expected += 1
        yield line


def annotate(blocks, pairs):
    """Add index fields to each block, reading annotation pairs in lockstep.

    Yields the blocks (mutated in place).  Transactions gain ``index``,
    inputs ``txid_index`` and ``tio_index``, outputs ``tio_index`` and
    scriptPubKeys ``address_indexes`` (parallel to their addresses).
    """
    pairs = iter(pairs)
    pending = []
    buffered = []

    def next_index(rank):
        line = next(pairs, None)
        if line is None:
            raise AlignmentError(f"annotation stream exhausted at occurrence rank {rank}")
        got_rank, _, index = line.partition(" ")
        if int(got_rank) != rank:
            raise AlignmentError(f"annotation rank {got_rank} where {rank} was expected")
        return int(index)

    # walk_chain is lazy and per block; we tee blocks through a buffer so
    # each is emitted only after all its occurrences are annotated
    def feed():
        for block in blocks:
            buffered.append(block)
            yield block

    last_rank = -1
    for slot in walk_chain(feed()):
        while len(buffered) > 1:
            _flush(pending)
            yield buffered.pop(0)
        index = next_index(slot.rank)
        last_rank = slot.rank
        if slot.index is not None and slot.index != index:
            raise AlignmentError(f"rank {slot.rank}: annotation index {index} but traversal index {slot.index}")
        if slot.field == "address_indexes":
            if slot.pos == 0:
                pending.append((slot.target, []))
            pending[-1][1].append(index)
        else:
            slot.target[slot.field] = index
    _flush(pending)
    yield from buffered
    buffered.clear()
    extra = next(pairs, None)
    if extra is not None:
        raise AlignmentError(f"annotation stream has extra pair {extra!r} after rank {last_rank}")


def _flush(pending):
    for spk, indexes in pending:
        spk["address_indexes"] = indexes
    pending.clear()


def strip_added_fields(block):
    """Remove every field :func:`annotate` adds (in place) and return the block."""
    for tx in block.get("tx", ()):
        tx.pop("index", None)
        for vin in tx.get("vin", ()):
            vin.pop("txid_index", None)
            vin.pop("tio_index", None)
        for out in tx.get("vout", ()):
            out.pop("tio_index", None)
            spk = out.get("scriptPubKey")
            if isinstance(spk, dict):
                spk.pop("address_indexes", None)
    return block


@dataclass
class IndexStats:
    occurrences: int = 0
    addresses: int = 0
    blocks: int = 0
    workdir: str = ""


def index_chain(in_path, out_path, memory=DEFAULT_MEMORY, tmp_dir=None, keep_intermediates=False,
                compress=False, fan_in=16):
    """Run all four steps and the annotation pass, file to file.

    Intermediate files live in a fresh directory under ``tmp_dir``; they are
    removed unless ``keep_intermediates`` is set.
    """
    budget = SortBudget(memory=memory, spill_dir=tmp_dir, fan_in=fan_in)
    workdir = tempfile.mkdtemp(prefix="chainline-index-", dir=tmp_dir)
    stats = IndexStats(workdir=workdir)
    step1 = os.path.join(workdir, "step1.txt")
    step2 = os.path.join(workdir, "step2.txt")
    step3 = os.path.join(workdir, "step3.txt")
    step4 = os.path.join(workdir, "step4.txt")
    try:
        stats.occurrences = jsonl.write_lines(step1, step1_occurrences(jsonl.read_blocks(in_path)))
        log.info("step 1: %d occurrences", stats.occurrences)
        stats.addresses = jsonl.write_lines(step2, step2_address_triplets(jsonl.read_blocks(in_path), budget))
        log.info("step 2: %d distinct addresses", stats.addresses)
        jsonl.write_lines(step3, step3_group(jsonl.read_lines(step1), jsonl.read_lines(step2), budget))
        jsonl.write_lines(step4, step4_annotation_stream(jsonl.read_lines(step3), budget))
        with jsonl.LineWriter(out_path, compress) as out:
            for block in annotate(jsonl.read_blocks(in_path), jsonl.read_lines(step4)):
                out.write_block(block)
            stats.blocks = out.count
    finally:
        if not keep_intermediates:
            shutil.rmtree(workdir, ignore_errors=True)
    return stats


def index_blocks(blocks, memory=DEFAULT_MEMORY, tmp_dir=None):
    """In-process convenience: index a list of blocks, return indexed copies."""
    tmp = tempfile.mkdtemp(prefix="chainline-mem-", dir=tmp_dir)
    try:
        src = os.path.join(tmp, "chain.jsonl")
        dst = os.path.join(tmp, "indexed.jsonl")
        jsonl.write_lines(src, (jsonl.dumps(b) for b in blocks))
        index_chain(src, dst, memory=memory, tmp_dir=tmp)
        return list(jsonl.read_blocks(dst))
    finally:
        shutil.rmtree(tmp, ignore_errors=True)

