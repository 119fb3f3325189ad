"""JSON-lines I/O: gzip sniffing, stdin/stdout, lossless number handling.

Floating-point literals are decoded as :class:`JsonDecimal` and re-encoded
with their original digits, so a load/dump cycle never alters a number
written in positional notation (``50.00000000`` stays ``50.00000000``).
Exponent forms such as ``1e-08`` come back positional.
"""

import gzip
import io
import sys
from decimal import Decimal

import simplejson

GZIP_MAGIC = b"\x1f\x8b"


class JsonDecimal(Decimal):
    """Decimal that prints in positional notation (``0.00000003``, not ``3E-8``)."""

    def __str__(self):
        return format(self, "f")

    __repr__ = __str__


def loads(text):
    return simplejson.loads(text, parse_float=JsonDecimal)


def dumps(obj):
    return simplejson.dumps(obj, use_decimal=True, ensure_ascii=False, separators=(",", ":"))


def _is_stdio(path):
    return path is None or str(path) == "-"


def open_binary_in(path):
    """Open ``path`` for binary reading, transparently gunzipping."""
    if _is_stdio(path):
        raw = sys.stdin.buffer
        peek = raw.peek(2)[:2] if hasattr(raw, "peek") else b""
        if peek == GZIP_MAGIC:
            return gzip.GzipFile(fileobj=raw, mode="rb")
        return raw
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == GZIP_MAGIC:
        return gzip.open(path, "rb")
    return open(path, "rb")


def open_text_in(path):
    return io.TextIOWrapper(open_binary_in(path), encoding="utf-8", newline="\n")


def open_binary_out(path, compress=False, append=False):
    mode = "ab" if append else "wb"
    if _is_stdio(path):
        raw = sys.stdout.buffer
        if compress:
            return gzip.GzipFile(fileobj=raw, mode="wb")
        return raw
    if compress:
        return gzip.open(path, mode)
    return open(path, mode)


def open_text_out(path, compress=False, append=False):
    return io.TextIOWrapper(
        open_binary_out(path, compress, append), encoding="utf-8", newline="\n", write_through=False
    )


def read_lines(path):
    """Yield lines of a text file without their trailing newline."""
    fh = open_text_in(path)
    try:
        for line in fh:
            line = line.rstrip("\n")
            if line:
                yield line
    finally:
        if not _is_stdio(path):
            fh.close()
        else:
            fh.detach()


def read_blocks(path):
    for line in read_lines(path):
        yield loads(line)


class LineWriter:
    """Context manager writing one record per line to a path or stdout."""

    def __init__(self, path, compress=False, append=False):
        self.path = path
        self._fh = open_text_out(path, compress, append)
        self.count = 0

    def write(self, line):
        self._fh.write(line)
        self._fh.write("\n")
        self.count += 1

    def write_block(self, block):
        self.write(dumps(block))

    def writelines(self, lines):
        for line in lines:
            self.write(line)

    def close(self):
        if self._fh is None:
            return
        if _is_stdio(self.path):
            self._fh.flush()
            inner = self._fh.detach()
            if isinstance(inner, gzip.GzipFile):
                inner.close()
            inner.flush()
        else:
            self._fh.close()
        self._fh = None

    def flush(self):
        self._fh.flush()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_lines(path, lines, compress=False):
    with LineWriter(path, compress) as out:
        out.writelines(lines)
        return out.count
