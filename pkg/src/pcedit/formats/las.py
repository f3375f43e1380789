"""Native LAS reader/writer built on struct + numpy.

Reading handles LAS 1.0-1.4 point record formats 0-3 (anything beyond the
standard record length is skipped as opaque extra bytes); writing emits
LAS 1.2 with point format 0 (no color) or 2 (RGB).  Colors widen to 16 bit
on write (x257) and narrow on read (>>8), matching common LAS tooling.

File creation day/year are written as 0 so output bytes depend only on the
point data.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import HeaderMismatch, ParseError, RangeError, UnsupportedPointRecord
from ._base import (BINARY, DEFAULT_CHUNK_POINTS, DEFAULT_LAS_SCALE, Chunk,
                    FormatDescriptor, narrow_16bit, widen_8bit)

_MAGIC = b"LASF"
_HEADER_FMT = "<4sHHIHH8sBB32s32sHHHIIBHI5I3d3d6d"
_HEADER_SIZE = struct.calcsize(_HEADER_FMT)
assert _HEADER_SIZE == 227

_LEGACY_COUNT_OFFSET = 107
_MINMAX_OFFSET = 179
_EXTENDED_COUNT_OFFSET = 247

_BASE_FIELDS = [("X", "<i4"), ("Y", "<i4"), ("Z", "<i4"),
                ("intensity", "<u2"), ("flags", "u1"),
                ("classification", "u1"), ("scan_angle", "i1"),
                ("user_data", "u1"), ("point_source", "<u2")]
_GPS_FIELD = [("gps_time", "<f8")]
_RGB_FIELDS = [("red", "<u2"), ("green", "<u2"), ("blue", "<u2")]

_FORMAT_FIELDS = {
    0: _BASE_FIELDS,
    1: _BASE_FIELDS + _GPS_FIELD,
    2: _BASE_FIELDS + _RGB_FIELDS,
    3: _BASE_FIELDS + _GPS_FIELD + _RGB_FIELDS,
}

_COLOR_FORMATS = (2, 3)


@dataclass
class _Header:
    version: tuple[int, int]
    point_format: int
    compressed: bool
    record_length: int
    offset_to_points: int
    count: int
    scales: tuple[float, float, float]
    offsets: tuple[float, float, float]


def read_header(path) -> _Header:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER_SIZE)
        if len(raw) < _HEADER_SIZE:
            raise ParseError("file shorter than a LAS header", path=path,
                             offset=len(raw))
        fields = struct.unpack(_HEADER_FMT, raw)
        if fields[0] != _MAGIC:
            raise ParseError("missing LASF signature", path=path, offset=0)
        ver_major, ver_minor = fields[7], fields[8]
        header_size, offset_to_points = fields[13], fields[14]
        point_format_raw, record_length = fields[16], fields[17]
        legacy_count = fields[18]
        scales = fields[24:27]
        offsets = fields[27:30]
        if header_size < _HEADER_SIZE:
            raise ParseError(f"header size {header_size} below LAS minimum",
                             path=path, offset=94)
        count = legacy_count
        if (ver_major, ver_minor) >= (1, 4) and header_size >= 255:
            fh.seek(_EXTENDED_COUNT_OFFSET)
            extended = struct.unpack("<Q", fh.read(8))[0]
            if extended:
                count = extended
    compressed = bool(point_format_raw & 0x80)
    point_format = point_format_raw & 0x3F
    return _Header(version=(ver_major, ver_minor), point_format=point_format,
                   compressed=compressed, record_length=record_length,
                   offset_to_points=offset_to_points, count=count,
                   scales=scales, offsets=offsets)


def _record_dtype(point_format: int, record_length: int,
                  path) -> np.dtype:
    fields = _FORMAT_FIELDS.get(point_format)
    if fields is None:
        raise UnsupportedPointRecord(
            f"LAS point record format {point_format} is not supported "
            f"(supported: 0-3)")
    dtype = np.dtype(fields)
    if record_length < dtype.itemsize:
        raise ParseError(
            f"record length {record_length} too small for point format "
            f"{point_format}", path=path, offset=105)
    if record_length > dtype.itemsize:
        fields = fields + [("extra", f"V{record_length - dtype.itemsize}")]
        dtype = np.dtype(fields)
    return dtype


class LasReader:
    def __init__(self, path):
        self.path = Path(path)
        self.header = read_header(path)
        if self.header.compressed:
            raise HeaderMismatch(
                f"{path}: data is LAZ-compressed; use the .laz format")
        self._dtype = _record_dtype(self.header.point_format,
                                    self.header.record_length, path)
        self.descriptor = FormatDescriptor(
            kind="las", encoding=BINARY,
            has_color=self.header.point_format in _COLOR_FORMATS,
            has_normals=False)
        self.count = self.header.count

    def chunks(self, chunk_size: int = DEFAULT_CHUNK_POINTS):
        scales = np.asarray(self.header.scales, dtype=np.float64)
        offsets = np.asarray(self.header.offsets, dtype=np.float64)
        remaining = self.count
        offset = self.header.offset_to_points
        with open(self.path, "rb") as fh:
            fh.seek(offset)
            while remaining > 0:
                want = min(remaining, chunk_size)
                records = np.fromfile(fh, dtype=self._dtype, count=want)
                if records.shape[0] < want:
                    done = self.count - remaining + records.shape[0]
                    raise ParseError(
                        f"unexpected end of data: {done} of {self.count} "
                        f"points", path=self.path,
                        offset=offset + records.shape[0] * self._dtype.itemsize)
                offset += want * self._dtype.itemsize
                remaining -= want
                ints = np.column_stack([records["X"], records["Y"],
                                        records["Z"]]).astype(np.float64)
                positions = ints * scales + offsets
                colors = None
                if self.descriptor.has_color:
                    colors = np.column_stack(
                        [narrow_16bit(records[c]) for c in
                         ("red", "green", "blue")])
                yield Chunk(positions, colors, None)


def _pack_header(count: int, point_format: int, record_length: int,
                 scales, offsets, mins, maxs) -> bytes:
    return struct.pack(
        _HEADER_FMT,
        _MAGIC,
        0,                  # file source id
        0,                  # global encoding
        0, 0, 0, b"",       # project GUID
        1, 2,               # version 1.2
        b"pcedit".ljust(32, b"\0"),
        b"pcedit".ljust(32, b"\0"),
        0, 0,               # creation day/year: fixed for determinism
        _HEADER_SIZE,
        _HEADER_SIZE,       # points start right after the header
        0,                  # no VLRs
        point_format,
        record_length,
        count,
        count, 0, 0, 0, 0,  # points by return: all first-return
        scales[0], scales[1], scales[2],
        offsets[0], offsets[1], offsets[2],
        maxs[0], mins[0], maxs[1], mins[1], maxs[2], mins[2])


class LasWriter:
    """Streaming LAS 1.2 writer; count and bounds are patched on close."""

    def __init__(self, path, descriptor: FormatDescriptor, *,
                 scale: float = DEFAULT_LAS_SCALE,
                 offset: tuple[float, float, float] = (0.0, 0.0, 0.0)):
        self.path = Path(path)
        self.descriptor = descriptor
        self.point_format = 2 if descriptor.has_color else 0
        fields = _FORMAT_FIELDS[self.point_format]
        self._dtype = np.dtype(fields)
        self._scale = float(scale)
        if self._scale <= 0:
            raise RangeError(f"LAS scale must be positive, got {scale}")
        self._offset = np.asarray(offset, dtype=np.float64)
        self._count = 0
        self._int_min = np.full(3, np.iinfo(np.int64).max, dtype=np.int64)
        self._int_max = np.full(3, np.iinfo(np.int64).min, dtype=np.int64)
        self._fh = open(self.path, "wb")
        self._fh.write(_pack_header(0, self.point_format,
                                    self._dtype.itemsize,
                                    (self._scale,) * 3, self._offset,
                                    (0.0, 0.0, 0.0), (0.0, 0.0, 0.0)))
        self._bytes = _HEADER_SIZE

    def write(self, chunk: Chunk):
        n = chunk.positions.shape[0]
        if n == 0:
            return
        ints = np.rint((chunk.positions - self._offset) / self._scale)
        limit = np.iinfo(np.int32)
        if ints.min() < limit.min or ints.max() > limit.max:
            raise RangeError(
                f"coordinates span more than the int32 LAS grid at scale "
                f"{self._scale:g}; increase the scale or adjust the offset")
        ints = ints.astype(np.int64)
        self._int_min = np.minimum(self._int_min, ints.min(axis=0))
        self._int_max = np.maximum(self._int_max, ints.max(axis=0))
        records = np.zeros(n, dtype=self._dtype)
        records["X"] = ints[:, 0]
        records["Y"] = ints[:, 1]
        records["Z"] = ints[:, 2]
        if self.descriptor.has_color:
            if chunk.colors is None:
                raise ValueError("color chunk missing for format 2 writer")
            records["red"] = widen_8bit(chunk.colors[:, 0])
            records["green"] = widen_8bit(chunk.colors[:, 1])
            records["blue"] = widen_8bit(chunk.colors[:, 2])
        data = records.tobytes()
        self._fh.write(data)
        self._bytes += len(data)
        self._count += n

    def close(self) -> int:
        if self._count:
            mins = self._int_min * self._scale + self._offset
            maxs = self._int_max * self._scale + self._offset
        else:
            mins = maxs = np.zeros(3)
        self._fh.seek(_LEGACY_COUNT_OFFSET)
        self._fh.write(struct.pack("<I", self._count))
        self._fh.write(struct.pack("<I", self._count))  # returns[0]
        self._fh.seek(_MINMAX_OFFSET)
        self._fh.write(struct.pack("<6d", maxs[0], mins[0], maxs[1],
                                   mins[1], maxs[2], mins[2]))
        self._fh.close()
        return self._bytes


def probe(path) -> FormatDescriptor:
    header = read_header(path)
    if header.compressed:
        raise HeaderMismatch(
            f"{path}: data is LAZ-compressed; use the .laz format")
    _record_dtype(header.point_format, header.record_length, path)
    return FormatDescriptor(kind="las", encoding=BINARY,
                            has_color=header.point_format in _COLOR_FORMATS,
                            has_normals=False)


def open_reader(path) -> LasReader:
    return LasReader(path)


def open_writer(path, descriptor: FormatDescriptor, count: int | None = None,
                *, scale: float = DEFAULT_LAS_SCALE,
                offset=(0.0, 0.0, 0.0), **_opts) -> LasWriter:
    return LasWriter(path, descriptor, scale=scale, offset=offset)
