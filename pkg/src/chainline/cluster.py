"""Input-based address clustering swept over input/output count thresholds.

A transaction with ``k_in >= 2`` distinct input addresses contributes
``k_in - 1`` links from its first input address to each other one; a
transaction with a single input address contributes a node record so the
address still counts as a (singleton) cluster.  Records are written as
``a b k_in k_out``; node records repeat the address (``a a 1 k_out``).

The cluster universe for a threshold pair is the set of addresses that are
inputs of at least one admitted transaction.
"""

import logging
import os
from typing import NamedTuple, Optional

from . import jsonl
from .distiller import DistilledTx
from .errors import RecordError, SequencingError
from .extsort import ExternalSorter, SortBudget

log = logging.getLogger(__name__)

BY_KIN = "3n"
DEFAULT_KOUT_GRID = tuple(range(1, 16)) + (None,)


class LinkRecord(NamedTuple):
    a: int
    b: int
    k_in: int
    k_out: int

    def to_line(self):
        return f"{self.a} {self.b} {self.k_in} {self.k_out}"

    @classmethod
    def from_line(cls, line):
        parts = line.split()
        if len(parts) != 4:
            raise RecordError(f"link record needs 4 fields: {line!r}")
        return cls(*map(int, parts))

    @property
    def is_node(self):
        return self.a == self.b


class ClusterMetricsRow(NamedTuple):
    k_in: int
    k_out: Optional[int]
    n_clusters: int
    max_size: int

    def to_line(self):
        return f"{self.k_in} {format_kout(self.k_out)} {self.n_clusters} {self.max_size}"

    @classmethod
    def from_line(cls, line):
        k_in, k_out, n, m = line.split()
        return cls(int(k_in), parse_kout(k_out), int(n), int(m))


def format_kout(k_out):
    return "inf" if k_out is None else str(k_out)


def parse_kout(text):
    if text == "inf":
        return None
    value = int(text)
    if value < 0:
        raise ValueError(f"K_out must be >= 0, got {value}")
    return value


def parse_kout_list(spec):
    """Parse ``"1..15,inf"`` into ``[1, 2, ..., 15, None]``."""
    out = []
    for item in spec.split(","):
        item = item.strip()
        if ".." in item:
            lo, hi = (parse_kout(x) for x in item.split(".."))
            if lo is None or hi is None or hi < lo:
                raise ValueError(f"bad K_out range {item!r}")
            out.extend(range(lo, hi + 1))
        else:
            out.append(parse_kout(item))
    if not out:
        raise ValueError("empty K_out list")
    return out


def emit_links(records):
    """Yield link/node records for each distilled transaction."""
    for rec in records:
        if isinstance(rec, str):
            rec = DistilledTx.from_line(rec)
        k_in, k_out = rec.nb_in, rec.nb_out
        if k_in == 0:
            continue
        first = rec.in_addrs[0]
        if k_in == 1:
            yield LinkRecord(first, first, 1, k_out)
            continue
        for other in rec.in_addrs[1:]:
            yield LinkRecord(first, other, k_in, k_out)


class DisjointSet:
    """Union-find over dense integer ids with union by size and path halving.

    Only ids that have been touched take part in the cluster count.
    """

    def __init__(self, n=0, bounded=False):
        self.parent = [-1] * n
        self.size = [0] * n
        self.bounded = bounded
        self.touched = 0
        self.unions = 0
        self.max_size = 0

    @property
    def n_clusters(self):
        return self.touched - self.unions

    def _grow(self, a):
        if a < 0 or (self.bounded and a >= len(self.parent)):
            raise RecordError(f"address index {a} outside table of {len(self.parent)}")
        if a >= len(self.parent):
            extra = max(a + 1 - len(self.parent), len(self.parent) // 2)
            self.parent.extend([-1] * extra)
            self.size.extend([0] * extra)

    def touch(self, a):
        if a >= len(self.parent) or a < 0:
            self._grow(a)
        if self.parent[a] == -1:
            self.parent[a] = a
            self.size[a] = 1
            self.touched += 1
            if self.max_size < 1:
                self.max_size = 1

    def find(self, a):
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a, b):
        self.touch(a)
        self.touch(b)
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.unions += 1
        if self.size[ra] > self.max_size:
            self.max_size = self.size[ra]
        return True


def sweep(records, k_out=None, n_addresses=None):
    """Union-find over k_in-sorted records, one metrics row per k_in value.

    Records with ``k_out`` above the threshold are skipped but still mark
    k_in breakpoints, so every threshold yields rows on the same grid.
    """
    dsu = DisjointSet(n_addresses or 0, bounded=n_addresses is not None)
    current = None
    for rec in records:
        if isinstance(rec, str):
            rec = LinkRecord.from_line(rec)
        if rec.k_in != current:
            if current is not None:
                if rec.k_in < current:
                    raise SequencingError(f"link records not sorted by k_in: {current} then {rec.k_in}")
                yield ClusterMetricsRow(current, k_out, dsu.n_clusters, dsu.max_size)
            current = rec.k_in
        if k_out is not None and rec.k_out > k_out:
            continue
        dsu.union(rec.a, rec.b)
    if current is not None:
        yield ClusterMetricsRow(current, k_out, dsu.n_clusters, dsu.max_size)


def sort_links(lines, budget=None):
    return ExternalSorter(BY_KIN, budget or SortBudget()).sort(lines)


def metrics_filename(k_out):
    return f"kout_{format_kout(k_out)}.txt"


def sweep_all(sorted_links_path, k_outs, out_dir, n_addresses=None):
    """Run one independent sweep per threshold; return ``{k_out: path}``."""
    os.makedirs(out_dir, exist_ok=True)
    written = {}
    for k_out in k_outs:
        path = os.path.join(out_dir, metrics_filename(k_out))
        rows = sweep(jsonl.read_lines(sorted_links_path), k_out, n_addresses)
        jsonl.write_lines(path, (r.to_line() for r in rows))
        written[k_out] = path
    return written


def cluster_file(distilled_path, out_dir, k_outs=DEFAULT_KOUT_GRID, budget=None, n_addresses=None):
    """Distilled address view in, one metrics file per ``k_out`` out."""
    os.makedirs(out_dir, exist_ok=True)
    links_path = os.path.join(out_dir, "links.txt")
    sorted_path = os.path.join(out_dir, "links.sorted.txt")
    n = jsonl.write_lines(links_path, (r.to_line() for r in emit_links(jsonl.read_lines(distilled_path))))
    log.info("%d link/node records", n)
    jsonl.write_lines(sorted_path, sort_links(jsonl.read_lines(links_path), budget))
    os.remove(links_path)
    return sweep_all(sorted_path, k_outs, out_dir, n_addresses)
