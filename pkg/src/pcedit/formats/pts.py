"""Leica-style .pts: a count line followed by ``x y z intensity r g b`` rows.

The intensity column is read past and written as 0; colors are bytes.
The row count declared on line 1 is enforced both ways — short files fail
at the line where the missing row should start, long files fail at the
first surplus row.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..cloud import quantize_colors
from ..errors import ParseError
from ._ascii import TableChunks, rows_to_text
from ._base import (ASCII, ASCII_DECIMALS, DEFAULT_CHUNK_POINTS, Chunk,
                    FormatDescriptor)

_COLUMNS = 7  # x y z intensity r g b

_ROW_FMT = " ".join([f"%.{ASCII_DECIMALS}f"] * 3) + " 0 %d %d %d"


def _descriptor() -> FormatDescriptor:
    return FormatDescriptor(kind="pts", encoding=ASCII,
                            has_color=True, has_normals=False)


def _read_count(path) -> int:
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        first = fh.readline()
    if not first:
        raise ParseError("missing point-count header", path=path, line=1)
    try:
        count = int(first.strip())
    except ValueError:
        raise ParseError(f"point-count header is not an integer: "
                         f"{first.strip()!r}", path=path, line=1) from None
    if count < 0:
        raise ParseError(f"negative point count {count}", path=path, line=1)
    return count


class PtsReader:
    def __init__(self, path):
        self.path = Path(path)
        self.descriptor = _descriptor()
        self.count = _read_count(path)

    def chunks(self, chunk_size: int = DEFAULT_CHUNK_POINTS):
        table = TableChunks(self.path, _COLUMNS, skip_header_lines=1,
                            max_rows=self.count, forbid_extra_rows=True,
                            chunk_size=chunk_size)
        for values, lines in table:
            raw = values[:, 4:7]
            bad = (raw < 0) | (raw > 255)
            if bad.any():
                row = int(np.argwhere(bad.any(axis=1))[0, 0])
                raise ParseError(f"color value {raw[bad][0]:g} outside 0..255",
                                 path=self.path, line=int(lines[row]))
            yield Chunk(np.ascontiguousarray(values[:, :3]),
                        quantize_colors(raw), None)
        if table.rows_read < self.count:
            raise ParseError(
                f"header declares {self.count} points but file ends "
                f"after {table.rows_read}",
                path=self.path, line=table.line_no + 1)


class PtsWriter:
    """Needs the total row count up front for the header line."""

    def __init__(self, path, descriptor: FormatDescriptor, count: int):
        self.path = Path(path)
        self.descriptor = descriptor
        self._fh = open(self.path, "wb")
        header = f"{count}\n".encode("ascii")
        self._fh.write(header)
        self._bytes = len(header)

    def write(self, chunk: Chunk):
        matrix = np.hstack([chunk.positions,
                            chunk.colors.astype(np.float64)])
        data = rows_to_text(matrix, _ROW_FMT)
        self._fh.write(data)
        self._bytes += len(data)

    def close(self) -> int:
        self._fh.close()
        return self._bytes


def probe(path) -> FormatDescriptor:
    _read_count(path)
    return _descriptor()


def open_reader(path) -> PtsReader:
    return PtsReader(path)


def open_writer(path, descriptor: FormatDescriptor, count: int | None = None,
                **_opts) -> PtsWriter:
    if count is None:
        raise ValueError("pts writer requires the point count up front")
    return PtsWriter(path, descriptor, count)
