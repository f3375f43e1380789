"""PLY reader/writer (ascii and binary_little_endian).

Reading accepts float or double coordinates, uchar or ushort colors
(ushort narrows to 8 bits via >> 8), optional nx/ny/nz normals, and skips
any other vertex property.  Vertex must be the first element; list
properties inside the vertex element and big-endian files are rejected.

Writing always emits double positions, double normals (when present) and
uchar red/green/blue, so positions survive a round trip bit-exactly in
binary mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ParseError
from ._ascii import TableChunks, rows_to_text
from ._base import (ASCII, ASCII_DECIMALS, BINARY, DEFAULT_CHUNK_POINTS,
                    Chunk, FormatDescriptor, narrow_16bit)

_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}

_POS_FMT = " ".join([f"%.{ASCII_DECIMALS}f"] * 3)


@dataclass
class _Header:
    encoding: str
    count: int
    props: list[tuple[str, str]]       # (name, numpy type code)
    header_lines: int
    header_bytes: int

    def index(self, name: str) -> int | None:
        for i, (prop, _) in enumerate(self.props):
            if prop == name:
                return i
        return None


def _parse_header(path) -> _Header:
    lines: list[str] = []
    header_bytes = 0
    with open(path, "rb") as fh:
        while True:
            raw = fh.readline()
            if not raw:
                raise ParseError("missing end_header", path=path,
                                 line=len(lines) + 1)
            header_bytes += len(raw)
            line = raw.decode("ascii", errors="replace").strip()
            lines.append(line)
            if line == "end_header":
                break
            if len(lines) > 1000:
                raise ParseError("header too large", path=path, line=1000)

    if not lines or lines[0] != "ply":
        raise ParseError("not a PLY file (missing 'ply' magic)",
                         path=path, line=1)

    encoding = None
    elements: list[tuple[str, int]] = []
    props: list[tuple[str, str]] = []
    for line_no, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        if not tokens or tokens[0] in ("comment", "obj_info", "end_header"):
            continue
        if tokens[0] == "format":
            if len(tokens) < 2:
                raise ParseError("malformed format line", path=path,
                                 line=line_no)
            if tokens[1] == "ascii":
                encoding = ASCII
            elif tokens[1] == "binary_little_endian":
                encoding = BINARY
            elif tokens[1] == "binary_big_endian":
                raise ParseError("big-endian PLY is not supported",
                                 path=path, line=line_no)
            else:
                raise ParseError(f"unknown PLY format {tokens[1]!r}",
                                 path=path, line=line_no)
        elif tokens[0] == "element":
            if len(tokens) != 3:
                raise ParseError("malformed element line", path=path,
                                 line=line_no)
            try:
                elements.append((tokens[1], int(tokens[2])))
            except ValueError:
                raise ParseError(f"bad element count {tokens[2]!r}",
                                 path=path, line=line_no) from None
        elif tokens[0] == "property":
            if not elements:
                raise ParseError("property before any element", path=path,
                                 line=line_no)
            if elements[-1][0] != "vertex":
                continue
            if tokens[1] == "list":
                raise ParseError("list property inside vertex element",
                                 path=path, line=line_no)
            if len(tokens) != 3 or tokens[1] not in _TYPES:
                raise ParseError(f"unsupported property type {tokens[1]!r}",
                                 path=path, line=line_no)
            props.append((tokens[2], _TYPES[tokens[1]]))
        else:
            raise ParseError(f"unknown header keyword {tokens[0]!r}",
                             path=path, line=line_no)

    if encoding is None:
        raise ParseError("missing format line", path=path, line=2)
    vertex = [(name, n) for name, n in elements if name == "vertex"]
    if not vertex:
        raise ParseError("no vertex element", path=path, line=len(lines))
    for name, n in elements:
        if name == "vertex":
            break
        if n > 0:
            raise ParseError(f"element {name!r} precedes vertex", path=path,
                             line=len(lines))
    header = _Header(encoding=encoding, count=vertex[0][1], props=props,
                     header_lines=len(lines), header_bytes=header_bytes)
    for axis in ("x", "y", "z"):
        i = header.index(axis)
        if i is None:
            raise ParseError(f"vertex element lacks property {axis!r}",
                             path=path, line=len(lines))
        if header.props[i][1] not in ("f4", "f8"):
            raise ParseError(f"property {axis!r} must be float or double",
                             path=path, line=len(lines))
    color_types = {header.props[header.index(c)][1]
                   for c in ("red", "green", "blue")
                   if header.index(c) is not None}
    if color_types and color_types not in ({"u1"}, {"u2"}):
        raise ParseError("red/green/blue must all be uchar or all ushort",
                         path=path, line=len(lines))
    return header


class PlyReader:
    def __init__(self, path):
        self.path = Path(path)
        self._header = _parse_header(path)
        has_color = all(self._header.index(c) is not None
                        for c in ("red", "green", "blue"))
        has_normals = all(self._header.index(c) is not None
                          for c in ("nx", "ny", "nz"))
        self.descriptor = FormatDescriptor(
            kind="ply", encoding=self._header.encoding,
            has_color=has_color, has_normals=has_normals)
        self.count = self._header.count
        self.narrows_colors = has_color and \
            self._header.props[self._header.index("red")][1] == "u2"

    def _column_sets(self):
        h = self._header
        pos = [h.index(a) for a in ("x", "y", "z")]
        col = [h.index(c) for c in ("red", "green", "blue")] \
            if self.descriptor.has_color else None
        nrm = [h.index(c) for c in ("nx", "ny", "nz")] \
            if self.descriptor.has_normals else None
        return pos, col, nrm

    def chunks(self, chunk_size: int = DEFAULT_CHUNK_POINTS):
        if self._header.encoding == ASCII:
            yield from self._ascii_chunks(chunk_size)
        else:
            yield from self._binary_chunks(chunk_size)

    def _ascii_chunks(self, chunk_size):
        pos, col, nrm = self._column_sets()
        table = TableChunks(self.path, len(self._header.props),
                            skip_header_lines=self._header.header_lines,
                            max_rows=self.count, chunk_size=chunk_size)
        for values, _ in table:
            yield self._assemble(values, pos, col, nrm)
        if table.rows_read < self.count:
            raise ParseError(
                f"vertex element declares {self.count} rows but file ends "
                f"after {table.rows_read}",
                path=self.path, line=table.line_no + 1)

    def _binary_chunks(self, chunk_size):
        pos, col, nrm = self._column_sets()
        dtype = np.dtype([(f"p{i}", f"<{code}")
                          for i, (_, code) in enumerate(self._header.props)])
        remaining = self.count
        offset = self._header.header_bytes
        with open(self.path, "rb") as fh:
            fh.seek(offset)
            while remaining > 0:
                want = min(remaining, chunk_size)
                records = np.fromfile(fh, dtype=dtype, count=want)
                if records.shape[0] < want:
                    offset += records.shape[0] * dtype.itemsize
                    raise ParseError(
                        f"unexpected end of data: {self.count - remaining + records.shape[0]}"
                        f" of {self.count} vertices", path=self.path,
                        offset=offset)
                offset += want * dtype.itemsize
                remaining -= want
                columns = np.column_stack(
                    [records[f"p{i}"].astype(np.float64)
                     for i in range(len(self._header.props))])
                yield self._assemble(columns, pos, col, nrm)

    def _assemble(self, columns, pos, col, nrm) -> Chunk:
        positions = np.ascontiguousarray(columns[:, pos])
        colors = normals = None
        if col is not None:
            raw = columns[:, col]
            if self.narrows_colors:
                colors = narrow_16bit(raw.astype(np.uint16))
            else:
                colors = raw.astype(np.uint8)
        if nrm is not None:
            normals = np.ascontiguousarray(columns[:, nrm])
        return Chunk(positions, colors, normals)


def _write_header(descriptor: FormatDescriptor, count: int) -> bytes:
    fmt = "ascii" if descriptor.encoding == ASCII else "binary_little_endian"
    lines = ["ply", f"format {fmt} 1.0", f"element vertex {count}",
             "property double x", "property double y", "property double z"]
    if descriptor.has_normals:
        lines += ["property double nx", "property double ny",
                  "property double nz"]
    if descriptor.has_color:
        lines += ["property uchar red", "property uchar green",
                  "property uchar blue"]
    lines.append("end_header")
    return ("\n".join(lines) + "\n").encode("ascii")


class PlyWriter:
    def __init__(self, path, descriptor: FormatDescriptor, count: int):
        self.path = Path(path)
        self.descriptor = descriptor
        self._fh = open(self.path, "wb")
        header = _write_header(descriptor, count)
        self._fh.write(header)
        self._bytes = len(header)

    def write(self, chunk: Chunk):
        if self.descriptor.encoding == ASCII:
            parts = [chunk.positions]
            fmt = _POS_FMT
            if self.descriptor.has_normals:
                parts.append(chunk.normals)
                fmt += f" {_POS_FMT}"
            if self.descriptor.has_color:
                parts.append(chunk.colors.astype(np.float64))
                fmt += " %d %d %d"
            data = rows_to_text(np.hstack(parts), fmt)
        else:
            fields = [("x", "<f8"), ("y", "<f8"), ("z", "<f8")]
            if self.descriptor.has_normals:
                fields += [("nx", "<f8"), ("ny", "<f8"), ("nz", "<f8")]
            if self.descriptor.has_color:
                fields += [("red", "u1"), ("green", "u1"), ("blue", "u1")]
            records = np.empty(chunk.positions.shape[0], dtype=np.dtype(fields))
            for i, axis in enumerate(("x", "y", "z")):
                records[axis] = chunk.positions[:, i]
            if self.descriptor.has_normals:
                for i, axis in enumerate(("nx", "ny", "nz")):
                    records[axis] = chunk.normals[:, i]
            if self.descriptor.has_color:
                for i, channel in enumerate(("red", "green", "blue")):
                    records[channel] = chunk.colors[:, i]
            data = records.tobytes()
        self._fh.write(data)
        self._bytes += len(data)

    def close(self) -> int:
        self._fh.close()
        return self._bytes


def probe(path) -> FormatDescriptor:
    return PlyReader(path).descriptor


def open_reader(path) -> PlyReader:
    return PlyReader(path)


def open_writer(path, descriptor: FormatDescriptor, count: int | None = None,
                **_opts) -> PlyWriter:
    if count is None:
        raise ValueError("ply writer requires the point count up front")
    return PlyWriter(path, descriptor, count)
