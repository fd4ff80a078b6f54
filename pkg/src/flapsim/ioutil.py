"""Small file-output helpers shared by the CSV writers and the CLI."""

from __future__ import annotations

import os
import tempfile

__all__ = ["atomic_write_text", "fmt"]


def fmt(x: float) -> str:
    """Full-precision decimal for a float (round-trips exactly)."""
    return repr(float(x))


def atomic_write_text(path: str, text: str) -> None:
    """Write a text file via a sibling temp file + rename.

    Readers never observe a half-written file, and two identical writes
    produce byte-identical results.
    """
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
