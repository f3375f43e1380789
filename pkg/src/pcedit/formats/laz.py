"""LAZ support, delegated to laspy + a LAZ backend when installed.

Compression is the one piece of the format layer that leans on an external
codec; everything else in this package reads and writes bytes directly.
Install the ``laz`` extra (``pip install pcedit[laz]``) to enable it.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..cloud import quantize_colors
from ..errors import CodecUnavailable, HeaderMismatch, UnsupportedPointRecord
from ._base import (BINARY, DEFAULT_CHUNK_POINTS, DEFAULT_LAS_SCALE, Chunk,
                    FormatDescriptor)
from .las import _COLOR_FORMATS, read_header

_MISSING = ("LAZ compression requires the optional laspy codec; install "
            "the 'laz' extra (pip install pcedit[laz])")


def _require_laspy():
    try:
        import laspy
    except ImportError:
        raise CodecUnavailable(_MISSING) from None
    try:
        backends = laspy.LazBackend.detect_available()
    except Exception:  # pragma: no cover - defensive
        backends = ()
    if not backends:
        raise CodecUnavailable(_MISSING)
    return laspy


def probe(path) -> FormatDescriptor:
    header = read_header(path)
    if not header.compressed:
        raise HeaderMismatch(
            f"{path}: .laz extension but the data is uncompressed LAS")
    if header.point_format not in (0, 1, 2, 3):
        raise UnsupportedPointRecord(
            f"LAS point record format {header.point_format} is not "
            f"supported (supported: 0-3)")
    return FormatDescriptor(kind="laz", encoding=BINARY,
                            has_color=header.point_format in _COLOR_FORMATS,
                            has_normals=False)


class LazReader:
    def __init__(self, path):
        self.path = Path(path)
        self.descriptor = probe(path)
        self._laspy = _require_laspy()
        with self._laspy.open(str(path)) as fh:
            self.count = fh.header.point_count

    def chunks(self, chunk_size: int = DEFAULT_CHUNK_POINTS):
        with self._laspy.open(str(self.path)) as fh:
            for points in fh.chunk_iterator(chunk_size):
                positions = np.column_stack([np.asarray(points.x),
                                             np.asarray(points.y),
                                             np.asarray(points.z)])
                colors = None
                if self.descriptor.has_color:
                    colors = np.column_stack(
                        [(np.asarray(points[c], dtype=np.uint16) >> 8)
                         for c in ("red", "green", "blue")]).astype(np.uint8)
                yield Chunk(positions.astype(np.float64), colors, None)


class LazWriter:
    def __init__(self, path, descriptor: FormatDescriptor, *,
                 scale: float = DEFAULT_LAS_SCALE,
                 offset=(0.0, 0.0, 0.0)):
        laspy = _require_laspy()
        self.path = Path(path)
        self.descriptor = descriptor
        fmt = 2 if descriptor.has_color else 0
        header = laspy.LasHeader(version="1.2", point_format=fmt)
        header.scales = np.asarray([scale] * 3, dtype=np.float64)
        header.offsets = np.asarray(offset, dtype=np.float64)
        self._laspy = laspy
        self._header = header
        self._writer = laspy.open(str(path), mode="w", header=header)

    def write(self, chunk: Chunk):
        n = chunk.positions.shape[0]
        if n == 0:
            return
        record = self._laspy.ScaleAwarePointRecord.zeros(
            n, header=self._header)
        record.x = chunk.positions[:, 0]
        record.y = chunk.positions[:, 1]
        record.z = chunk.positions[:, 2]
        if self.descriptor.has_color:
            colors = chunk.colors
            if colors is None:
                colors = quantize_colors(np.zeros((n, 3)))
            record.red = colors[:, 0].astype(np.uint16) * 257
            record.green = colors[:, 1].astype(np.uint16) * 257
            record.blue = colors[:, 2].astype(np.uint16) * 257
        self._writer.write_points(record)

    def close(self) -> int:
        self._writer.close()
        return self.path.stat().st_size


def open_reader(path) -> LazReader:
    return LazReader(path)


def open_writer(path, descriptor: FormatDescriptor, count: int | None = None,
                *, scale: float = DEFAULT_LAS_SCALE,
                offset=(0.0, 0.0, 0.0), **_opts) -> LazWriter:
    return LazWriter(path, descriptor, scale=scale, offset=offset)
