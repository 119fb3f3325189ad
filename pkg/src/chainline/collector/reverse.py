"""Line-level file reversal with bounded memory, like ``tac``.

The input is read forward in segments of at most ``memory`` bytes; each
segment is written reversed to a spill file, and the spill files are then
concatenated last to first.  Lines are copied as bytes, so content the
data model does not know about is preserved exactly.
"""

import os
import shutil
import tempfile

from .. import jsonl
from ..errors import SpillError

DEFAULT_MEMORY = 64 * 1024 * 1024
_COPY_CHUNK = 1 << 20


def _lines(fh):
    for line in fh:
        if not line.endswith(b"\n"):
            line += b"\n"
        yield line


def reverse_lines(in_fh, out_fh, memory=DEFAULT_MEMORY, tmp_dir=None):
    """Reverse binary line stream ``in_fh`` into ``out_fh``; return spill count."""
    if memory <= 0:
        raise ValueError("memory budget must be positive")
    segment = []
    used = 0
    spills = []
    spill_dir = None
    try:
        for line in _lines(in_fh):
            segment.append(line)
            used += len(line)
            if used >= memory:
                if spill_dir is None:
                    spill_dir = _mkdir(tmp_dir)
                spills.append(_spill(segment, spill_dir, len(spills)))
                segment = []
                used = 0
        segment.reverse()
        out_fh.writelines(segment)
        segment = None
        for path in reversed(spills):
            with open(path, "rb") as fh:
                shutil.copyfileobj(fh, out_fh, _COPY_CHUNK)
            os.remove(path)
    finally:
        if spill_dir is not None:
            shutil.rmtree(spill_dir, ignore_errors=True)
    return len(spills)


def _mkdir(tmp_dir):
    try:
        return tempfile.mkdtemp(prefix="chainline-rev-", dir=tmp_dir)
    except OSError as exc:
        raise SpillError(f"cannot create spill directory under {tmp_dir or tempfile.gettempdir()}: {exc}", tmp_dir) from exc


def _spill(segment, spill_dir, n):
    path = os.path.join(spill_dir, f"seg{n:06d}")
    segment.reverse()
    try:
        with open(path, "wb") as fh:
            fh.writelines(segment)
    except OSError as exc:
        raise SpillError(f"spill write failed in {spill_dir}: {exc}", spill_dir, [path]) from exc
    return path


def reverse_blockfile(in_path, out_path, memory=DEFAULT_MEMORY, tmp_dir=None, compress=False):
    """Reverse the lines of ``in_path`` (gzip allowed) into ``out_path``."""
    src = jsonl.open_binary_in(in_path)
    dst = jsonl.open_binary_out(out_path, compress)
    try:
        return reverse_lines(src, dst, memory, tmp_dir)
    finally:
        if str(in_path) != "-":
            src.close()
        if str(out_path) != "-":
            dst.close()
        else:
            dst.flush()
