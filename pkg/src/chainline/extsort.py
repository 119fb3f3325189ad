"""Bounded-memory external merge sort over space-delimited text records.

Records are lines (without the newline) whose fields are separated by a
single space.  Input is consumed in memory-bounded chunks; each chunk is
sorted and spilled to a run file; runs are merged ``fan_in`` at a time
with a heap until one ordered stream remains.  Ties keep input order, so
the output does not depend on how the input happened to be chunked.

Memory accounting is approximate: a buffered record is charged
``2 * len(record) + RECORD_OVERHEAD`` bytes, which covers the string, the
list slot and the decorated sort key CPython builds for it.
"""

import heapq
import itertools
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

from .errors import RecordError, SequencingError, SpillError

RECORD_OVERHEAD = 160
MIN_MEMORY = 4096
DEFAULT_MEMORY = 64 * 1024 * 1024
DEFAULT_FAN_IN = 16
_IO_BUFFER = 1 << 16

INT64_MIN = -(1 << 63)
INT64_MAX = (1 << 63) - 1


class KeyPart(NamedTuple):
    field: int  # 0-based field position
    numeric: bool = False


class SortKeySpec:
    """Ordered key parts, e.g. ``SortKeySpec.parse("2,1n")``.

    Fields are 1-based in the textual form (like ``sort -k``); an ``n``
    suffix selects numeric order, otherwise byte-lexicographic text order.
    Numeric fields must fit a signed 64-bit integer.
    """

    def __init__(self, parts):
        parts = [p if isinstance(p, KeyPart) else KeyPart(*p) for p in parts]
        if not parts:
            raise ValueError("a sort key needs at least one part")
        for p in parts:
            if p.field < 0:
                raise ValueError(f"invalid field selector {p.field}")
        self.parts = tuple(parts)
        self._width = max(p.field for p in parts) + 1
        self.func = self._build()

    @classmethod
    def parse(cls, spec):
        parts = []
        for item in spec.split(","):
            item = item.strip()
            numeric = item.endswith("n")
            if numeric:
                item = item[:-1]
            if not item.isdigit() or int(item) < 1:
                raise ValueError(f"bad key part {item!r} in {spec!r}")
            parts.append(KeyPart(int(item) - 1, numeric))
        return cls(parts)

    def __repr__(self):
        return "SortKeySpec(%r)" % (",".join(f"{p.field + 1}{'n' if p.numeric else ''}" for p in self.parts),)

    def _build(self):
        parts = self.parts
        width = self._width

        def numeric(text, line):
            try:
                value = int(text)
            except ValueError:
                raise RecordError(f"non-numeric key field {text!r} in record {line!r}") from None
            if len(text) > 18 and not INT64_MIN <= value <= INT64_MAX:
                raise RecordError(f"numeric key field overflows 64 bits in record {line!r}")
            return value

        def key(line):
            fields = line.split(" ")
            if len(fields) < width:
                raise RecordError(f"record has {len(fields)} fields, key needs {width}: {line!r}")
            return tuple(numeric(fields[p.field], line) if p.numeric else fields[p.field] for p in parts)

        if len(parts) == 1:
            (only,) = parts
            if only.numeric:
                return lambda line: (numeric(_field(line, only.field, width), line),)
            return lambda line: (_field(line, only.field, width),)
        return key


def _field(line, i, width):
    fields = line.split(" ", width)
    if len(fields) < width:
        raise RecordError(f"record has {len(fields)} fields, key needs {width}: {line!r}")
    return fields[i]


@dataclass
class SortBudget:
    memory: int = DEFAULT_MEMORY
    spill_dir: Optional[str] = None
    fan_in: int = DEFAULT_FAN_IN

    def __post_init__(self):
        if self.memory < MIN_MEMORY:
            raise ValueError(f"memory budget {self.memory} below minimum {MIN_MEMORY} bytes")
        if self.fan_in < 2:
            raise ValueError("fan-in must be at least 2")


@dataclass
class SortStats:
    records: int = 0
    runs: int = 0
    merge_passes: int = 0
    peak_buffered_bytes: int = 0
    spill_files: List[str] = field(default_factory=list)


def record_cost(line):
    return 2 * len(line) + RECORD_OVERHEAD


class ExternalSorter:
    """Sort an iterable of records under a memory budget.

    >>> s = ExternalSorter(SortKeySpec.parse("1n"))
    >>> list(s.sort(["10 x", "9 y", "10 a"]))
    ['9 y', '10 x', '10 a']
    """

    def __init__(self, key, budget=None):
        self.key = key if isinstance(key, SortKeySpec) else SortKeySpec.parse(key)
        self.budget = budget or SortBudget()
        self.stats = SortStats()
        self._tmpdir = None

    # run generation

    def _spill(self, chunk):
        if self._tmpdir is None:
            try:
                self._tmpdir = tempfile.mkdtemp(prefix="chainline-sort-", dir=self.budget.spill_dir)
            except OSError as exc:
                raise SpillError(
                    f"cannot create spill directory in {self.budget.spill_dir or tempfile.gettempdir()}: {exc}",
                    self.budget.spill_dir,
                ) from exc
        path = os.path.join(self._tmpdir, f"run{len(self.stats.spill_files):06d}")
        self.stats.spill_files.append(path)
        try:
            with open(path, "w", encoding="utf-8", newline="\n", buffering=_IO_BUFFER) as fh:
                for line in chunk:
                    fh.write(line)
                    fh.write("\n")
        except OSError as exc:
            self._abort()
            raise SpillError(
                f"spill write failed in {self._tmpdir}: {exc}", self._tmpdir, self.stats.spill_files
            ) from exc
        self.stats.runs += 1
        return path

    def _read_run(self, path):
        try:
            with open(path, "r", encoding="utf-8", newline="\n", buffering=_IO_BUFFER) as fh:
                for line in fh:
                    yield line[:-1]
        except OSError as exc:
            raise SpillError(f"spill read failed for {path}: {exc}", self._tmpdir, self.stats.spill_files) from exc

    def _merge(self, paths):
        return heapq.merge(*(self._read_run(p) for p in paths), key=self.key.func)

    def _abort(self):
        if self._tmpdir is not None:
            shutil.rmtree(self._tmpdir, ignore_errors=True)
            self._tmpdir = None

    def sort(self, records):
        """Return an iterator over the sorted records.

        Spill files are removed once the iterator is exhausted or closed.
        """
        keyfunc = self.key.func
        limit = self.budget.memory
        chunk = []
        used = 0
        runs = []
        try:
            for line in records:
                if "\n" in line:
                    raise RecordError(f"record contains a newline: {line!r}")
                chunk.append(line)
                used += record_cost(line)
                self.stats.records += 1
                if used >= limit:
                    self.stats.peak_buffered_bytes = max(self.stats.peak_buffered_bytes, used)
                    chunk.sort(key=keyfunc)
                    runs.append(self._spill(chunk))
                    chunk = []
                    used = 0
            self.stats.peak_buffered_bytes = max(self.stats.peak_buffered_bytes, used)
            chunk.sort(key=keyfunc)
        except BaseException:
            self._abort()
            raise
        if not runs:
            return iter(chunk)
        if chunk:
            runs.append(self._spill(chunk))
        chunk = None
        return self._final(runs)

    def _final(self, runs):
        try:
            fan_in = self.budget.fan_in
            while len(runs) > fan_in:
                self.stats.merge_passes += 1
                merged = []
                # consecutive groups keep the earlier-input-first tie order
                for i in range(0, len(runs), fan_in):
                    group = runs[i:i + fan_in]
                    if len(group) == 1:
                        merged.append(group[0])
                        continue
                    merged.append(self._spill(self._merge(group)))
                    for p in group:
                        os.remove(p)
                runs = merged
            self.stats.merge_passes += 1
            yield from self._merge(runs)
        finally:
            self._abort()


def external_sort(records, key, budget=None):
    """Sort ``records`` by ``key`` (a :class:`SortKeySpec` or its text form)."""
    return ExternalSorter(key, budget).sort(records)


def sort_file(in_path, out_path, key, budget=None):
    from .jsonl import read_lines, write_lines

    sorter = ExternalSorter(key, budget)
    write_lines(out_path, sorter.sort(read_lines(in_path)))
    return sorter.stats


def external_unique_first(records, group_field=0, order_field=1):
    """Keep the first record of each group from a group-sorted stream.

    Input must be sorted by the text of ``group_field`` and, inside a group,
    numerically by ``order_field``; the survivor is the record with the
    smallest order value.  Unsorted input raises :class:`SequencingError`.
    """
    prev_group = None
    prev_order = None
    width = max(group_field, order_field) + 1
    for line in records:
        fields = line.split(" ")
        if len(fields) < width:
            raise RecordError(f"record has {len(fields)} fields, need {width}: {line!r}")
        group = fields[group_field]
        order = int(fields[order_field])
        if prev_group is None or group > prev_group:
            yield line
        elif group < prev_group:
            raise SequencingError(f"group key decreases: {prev_group!r} then {group!r}")
        elif order < prev_order:
            raise SequencingError(f"order key decreases inside group {group!r}: {prev_order} then {order}")
        prev_group, prev_order = group, order


def is_sorted(records, key):
    key = key if isinstance(key, SortKeySpec) else SortKeySpec.parse(key)
    a, b = itertools.tee(records)
    next(b, None)
    return all(key.func(x) <= key.func(y) for x, y in zip(a, b))
