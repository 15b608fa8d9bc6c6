"""CSV and text artifacts.

CSV files start with ``# key=value`` metadata lines, followed by a header
row and RFC-4180 quoted data. Floats are written with ``repr`` so values
round-trip exactly and re-runs are byte-identical. Every file is written to
a temporary sibling and renamed into place.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def csv_text(columns, rows, meta: dict | None = None) -> str:
    buf = io.StringIO()
    for k, v in (meta or {}).items():
        buf.write(f"# {k}={_fmt(v)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, columns, rows, meta: dict | None = None) -> Path:
    return atomic_write(path, csv_text(columns, rows, meta))


def read_csv(path):
    """Return ``(meta, columns, rows)``; values are left as strings."""
    meta, lines = {}, []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                meta[k] = v
            else:
                lines.append(line)
    reader = csv.reader(lines)
    columns = next(reader)
    return meta, columns, list(reader)


def histogram_rows(samples, bins: int):
    counts, edges = np.histogram(np.asarray(samples, float), bins=bins)
    return [(edges[i], edges[i + 1], int(c)) for i, c in enumerate(counts)]


def table_text(title: str, col_labels, row_labels, cells) -> str:
    """Fixed-width text table; ``cells[r][c]`` are preformatted strings."""
    widths = [max(len(title), *(len(r) for r in row_labels))]
    widths += [max(len(c), *(len(cells[r][i]) for r in range(len(row_labels))))
               for i, c in enumerate(col_labels)]
    def line(items):
        return " | ".join(s.ljust(w) for s, w in zip(items, widths)).rstrip()
    out = [line([title, *col_labels]), "-+-".join("-" * w for w in widths)]
    out += [line([r, *cells[i]]) for i, r in enumerate(row_labels)]
    return "\n".join(out) + "\n"
