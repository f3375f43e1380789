"""The whitespace-table family: .xyz, .xyzn, .xyzrgb.

.xyz      x y z
.xyzn     x y z nx ny nz
.xyzrgb   x y z r g b   -- colors are either bytes 0..255 or floats 0..1;
                           if every color value in the file is <= 1.0 the
                           float convention applies and values scale by 255.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..cloud import quantize_colors
from ..errors import ParseError
from ._ascii import TableChunks, count_data_rows, rows_to_text
from ._base import (ASCII, ASCII_DECIMALS, DEFAULT_CHUNK_POINTS, Chunk,
                    FormatDescriptor)

_COLUMNS = {"xyz": 3, "xyzn": 6, "xyzrgb": 6}

_POS_FMT = " ".join([f"%.{ASCII_DECIMALS}f"] * 3)
_NRM_FMT = _POS_FMT
_RGB_FMT = "%d %d %d"


def _descriptor(kind: str) -> FormatDescriptor:
    return FormatDescriptor(kind=kind, encoding=ASCII,
                            has_color=kind == "xyzrgb",
                            has_normals=kind == "xyzn")


class XyzReader:
    def __init__(self, path, kind: str):
        self.path = Path(path)
        self.kind = kind
        self.descriptor = _descriptor(kind)
        self._count: int | None = None
        self._colors_are_floats: bool | None = None

    @property
    def count(self) -> int:
        if self._count is None:
            self._count = count_data_rows(self.path)
        return self._count

    def _float_convention(self) -> bool:
        """True when every color value in the file is <= 1.0."""
        if self._colors_are_floats is None:
            peak = 0.0
            rows = 0
            for values, _ in TableChunks(self.path, 6):
                block = values[:, 3:6]
                if block.size:
                    peak = max(peak, float(block.max()))
                rows += values.shape[0]
            self._colors_are_floats = peak <= 1.0
            self._count = rows
        return self._colors_are_floats

    def chunks(self, chunk_size: int = DEFAULT_CHUNK_POINTS):
        scale_colors = self.kind == "xyzrgb" and self._float_convention()
        table = TableChunks(self.path, _COLUMNS[self.kind],
                            chunk_size=chunk_size)
        for values, lines in table:
            positions = np.ascontiguousarray(values[:, :3])
            colors = normals = None
            if self.kind == "xyzn":
                normals = np.ascontiguousarray(values[:, 3:6])
            elif self.kind == "xyzrgb":
                raw = values[:, 3:6]
                if scale_colors:
                    colors = quantize_colors(raw * 255.0)
                else:
                    bad = (raw < 0) | (raw > 255)
                    if bad.any():
                        row = int(np.argwhere(bad.any(axis=1))[0, 0])
                        raise ParseError(
                            f"color value {raw[bad][0]:g} outside 0..255",
                            path=self.path, line=int(lines[row]))
                    colors = quantize_colors(raw)
            yield Chunk(positions, colors, normals)
        self._count = table.rows_read


class XyzWriter:
    def __init__(self, path, descriptor: FormatDescriptor):
        self.path = Path(path)
        self.descriptor = descriptor
        self._fh = open(self.path, "wb")
        self._bytes = 0

    def write(self, chunk: Chunk):
        kind = self.descriptor.kind
        parts = [chunk.positions]
        fmt = _POS_FMT
        if kind == "xyzn":
            parts.append(chunk.normals)
            fmt = f"{_POS_FMT} {_NRM_FMT}"
        elif kind == "xyzrgb":
            parts.append(chunk.colors.astype(np.float64))
            fmt = f"{_POS_FMT} {_RGB_FMT}"
        data = rows_to_text(np.hstack(parts), fmt)
        self._fh.write(data)
        self._bytes += len(data)

    def close(self) -> int:
        self._fh.close()
        return self._bytes


def probe(path, kind: str) -> FormatDescriptor:
    return _descriptor(kind)


def open_reader(path, kind: str) -> XyzReader:
    return XyzReader(path, kind)


def open_writer(path, descriptor: FormatDescriptor, count: int | None = None,
                **_opts) -> XyzWriter:
    return XyzWriter(path, descriptor)
