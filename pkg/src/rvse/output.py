"""CSV emission with ``#`` metadata headers, and the matching config reader.

Run parameters are written as ``# key = value`` so that a header can be fed
back as a config file. Provenance that is not a parameter (hashes, version,
derived scaling) uses ``# @key = value`` and is skipped on reload.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import sys
from pathlib import Path
from typing import Iterable, Mapping, Sequence, TextIO

from .errors import ParseError


class ConfigError(ParseError):
    """Malformed or inconsistent run configuration."""


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def file_sha256(path) -> str:
    return sha256_bytes(Path(path).read_bytes())


def format_value(x) -> str:
    if isinstance(x, bool) or x is None:
        return str(x).lower()
    if isinstance(x, complex):
        return f"({format_value(x.real)},{format_value(x.imag)})"
    if isinstance(x, float) or hasattr(x, "dtype"):
        v = float(x)
        return "nan" if math.isnan(v) else repr(v)
    return str(x)


def metadata_lines(params: Mapping[str, object], provenance: Mapping[str, object] = ()) -> list[str]:
    lines = [f"# {k} = {format_value(v)}" for k, v in params.items() if v is not None]
    lines += [f"# @{k} = {format_value(v)}" for k, v in dict(provenance).items()]
    return lines


def render_csv(
    columns: Sequence[str],
    rows: Iterable[Sequence[object]],
    params: Mapping[str, object] = (),
    provenance: Mapping[str, object] = (),
    comments: Sequence[str] = (),
) -> str:
    buf = io.StringIO()
    for line in metadata_lines(dict(params), provenance):
        buf.write(line + "\n")
    for c in comments:
        buf.write(f"# {c}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_text(text: str, path=None, stream: TextIO | None = None) -> None:
    if path is None:
        (stream or sys.stdout).write(text)
        return
    Path(path).write_text(text, encoding="utf-8")


def csv_body(text: str) -> str:
    """Everything below the ``#`` header."""
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))


def parse_config(text: str) -> dict[str, str]:
    """``key = value`` pairs; a leading ``#`` is stripped, other lines ignored.

    Keys starting with ``@`` are provenance and dropped. Hyphens in keys are
    normalized to underscores.
    """
    out: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if line.startswith("#"):
            line = line[1:].strip()
        if "=" not in line:
            continue
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not key or key.startswith("@") or not key.isidentifier():
            continue
        out[key] = value.strip()
    return out


def load_config(path) -> dict[str, str]:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def read_csv(text: str) -> tuple[list[str], list[list[str]]]:
    """Column names and raw rows of a CSV written by :func:`render_csv`."""
    reader = csv.reader(io.StringIO(csv_body(text)))
    rows = list(reader)
    if not rows:
        raise ParseError("empty CSV body")
    return rows[0], rows[1:]


def gnuplot_script(data_path: str, columns: Sequence[str], x: str, ys: Sequence[str], title: str = "") -> str:
    """Plain gnuplot script plotting ``ys`` against ``x`` from a CSV file."""
    idx = {c: i + 1 for i, c in enumerate(columns)}
    plots = ", ".join(f"'{data_path}' using {idx[x]}:{idx[y]} with lines title '{y}'" for y in ys)
    lines = [
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key autotitle columnhead",
        f"set title '{title}'" if title else "",
        f"set xlabel '{x}'",
        f"plot {plots}",
    ]
    return "\n".join(line for line in lines if line) + "\n"
