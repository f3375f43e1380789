"""Format detection, whole-cloud read/write, and streaming conversion.

Extension picks the format; magic bytes must agree (``LASF``, the ``ply``
line, the PCD header) or detection fails loudly rather than guessing.
Everything funnels through two small protocols:

* reader: ``.descriptor``, ``.count``, ``.chunks(chunk_size)``
* writer: ``.write(chunk)``, ``.close() -> bytes written``

so the conversion pipeline never holds more than one batch in memory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..cloud import PointCloud
from ..errors import HeaderMismatch, UnknownFormat, UnsupportedPointRecord
from . import las, laz, pcd, ply, pts, xyz
from ._base import (ASCII, ASCII_DECIMALS, BINARY, CAPS, DEFAULT_CHUNK_POINTS,
                    DEFAULT_LAS_SCALE, Chunk, FormatDescriptor,
                    position_precision)

__all__ = [
    "ASCII", "BINARY", "CAPS", "Chunk", "ConversionReport",
    "DEFAULT_CHUNK_POINTS", "DEFAULT_LAS_SCALE", "FormatDescriptor",
    "convert", "detect_format", "kind_of", "open_reader", "open_writer",
    "position_precision", "read_cloud", "resolve_descriptor", "write_cloud",
]

_EXTENSIONS = {
    ".las": "las", ".laz": "laz", ".xyz": "xyz", ".xyzn": "xyzn",
    ".xyzrgb": "xyzrgb", ".pts": "pts", ".ply": "ply", ".pcd": "pcd",
}

#: extension family -> magic family expected in the content
_MAGIC_FAMILY = {"las": "las", "laz": "las", "ply": "ply", "pcd": "pcd"}

_XYZ_FAMILY = ("xyz", "xyzn", "xyzrgb")


def kind_of(path) -> str:
    """Format kind implied by the file extension."""
    suffix = Path(path).suffix.lower()
    kind = _EXTENSIONS.get(suffix)
    if kind is None:
        raise UnknownFormat(
            f"unrecognized extension {suffix or '(none)'!r} for {path}; "
            f"known: {', '.join(sorted(_EXTENSIONS))}")
    return kind


def _sniff_family(head: bytes) -> str | None:
    """Identify self-describing content by magic; None for plain tables."""
    if head.startswith(b"LASF"):
        return "las"
    if head.startswith(b"ply") and (len(head) == 3 or head[3:4] in b"\r\n"):
        return "ply"
    text = head.decode("latin-1", errors="replace")
    for line in text.splitlines()[:20]:
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            if ".PCD" in stripped:
                return "pcd"
            continue
        if stripped.upper().startswith("VERSION"):
            return "pcd"
        break
    return None


def detect_format(path) -> FormatDescriptor:
    """Resolve a file's descriptor: extension first, magic must agree."""
    kind = kind_of(path)
    try:
        with open(path, "rb") as fh:
            head = fh.read(4096)
    except FileNotFoundError:
        raise
    sniffed = _sniff_family(head)
    expected = _MAGIC_FAMILY.get(kind)
    if expected is not None and sniffed != expected:
        raise HeaderMismatch(
            f"{path}: extension says {kind} but content looks like "
            f"{sniffed or 'a plain text table'}")
    if expected is None and sniffed is not None:
        raise HeaderMismatch(
            f"{path}: extension says {kind} but content looks like {sniffed}")
    if kind in _XYZ_FAMILY:
        return xyz.probe(path, kind)
    return {"las": las, "laz": laz, "ply": ply,
            "pcd": pcd, "pts": pts}[kind].probe(path)


def open_reader(path):
    """Detect the format and return a chunked reader for it."""
    descriptor = detect_format(path)
    if descriptor.kind in _XYZ_FAMILY:
        return xyz.open_reader(path, descriptor.kind)
    module = {"las": las, "laz": laz, "ply": ply, "pcd": pcd,
              "pts": pts}[descriptor.kind]
    return module.open_reader(path)


def open_writer(path, descriptor: FormatDescriptor, count: int | None = None,
                *, las_scale: float = DEFAULT_LAS_SCALE,
                las_offset=(0.0, 0.0, 0.0)):
    """Chunked writer for an explicit descriptor.

    ``count`` is required by formats whose header carries the point count
    (ply, pcd, pts).  LAS needs scale/offset fixed up front.
    """
    kind = descriptor.kind
    if kind in _XYZ_FAMILY:
        return xyz.open_writer(path, descriptor, count)
    if kind == "las":
        return las.open_writer(path, descriptor, count,
                               scale=las_scale, offset=las_offset)
    if kind == "laz":
        return laz.open_writer(path, descriptor, count,
                               scale=las_scale, offset=las_offset)
    module = {"ply": ply, "pcd": pcd, "pts": pts}[kind]
    return module.open_writer(path, descriptor, count)


def resolve_descriptor(kind: str, *, has_color: bool, has_normals: bool,
                       encoding: str | None = None
                       ) -> tuple[FormatDescriptor, list[str]]:
    """Fit source attributes into a target kind's capabilities.

    Returns the descriptor plus human-readable warnings for anything the
    target cannot carry (dropped color/normals) or must synthesize.
    """
    caps = CAPS.get(kind)
    if caps is None:
        raise UnknownFormat(f"unknown format kind {kind!r}")
    if encoding is None:
        encoding = caps.encodings[-1] if BINARY in caps.encodings else ASCII
    warnings: list[str] = []

    if caps.color == "no":
        if has_color:
            warnings.append("color dropped: "
                            f"{kind} cannot store color channels")
        color = False
    elif caps.color == "required":
        if not has_color:
            warnings.append(f"{kind} requires color: colorless points "
                            "written as (0, 0, 0)")
        color = True
    else:
        color = has_color

    if caps.normals == "no":
        if has_normals:
            warnings.append("normals dropped: "
                            f"{kind} cannot store normals")
        normals = False
    elif caps.normals == "required":
        if not has_normals:
            from ..errors import MissingAttribute
            raise MissingAttribute(
                f"{kind} requires normals but the source has none")
        normals = True
    else:
        normals = has_normals

    return FormatDescriptor(kind=kind, encoding=encoding, has_color=color,
                            has_normals=normals), warnings


def _check_expectation(found: FormatDescriptor, expected: FormatDescriptor,
                       path) -> None:
    if expected.kind != found.kind or expected.encoding != found.encoding:
        raise HeaderMismatch(
            f"{path}: expected {expected.kind}/{expected.encoding}, found "
            f"{found.kind}/{found.encoding}")
    if expected.has_color and not found.has_color:
        raise UnsupportedPointRecord(
            f"{path}: color expected but the file stores none")
    if expected.has_normals and not found.has_normals:
        from ..errors import MissingAttribute
        raise MissingAttribute(
            f"{path}: normals expected but the file stores none")


def read_cloud(source, descriptor: FormatDescriptor | None = None) -> PointCloud:
    """Load a whole file into memory as a PointCloud."""
    reader = open_reader(source)
    if descriptor is not None:
        _check_expectation(reader.descriptor, descriptor, source)
    desc = reader.descriptor
    positions, colors, normals = [], [], []
    for chunk in reader.chunks():
        positions.append(chunk.positions)
        if desc.has_color:
            colors.append(chunk.colors)
        if desc.has_normals:
            normals.append(chunk.normals)
    if not positions:
        return PointCloud.empty(has_color=desc.has_color,
                                has_normals=desc.has_normals)
    return PointCloud(
        positions=np.vstack(positions),
        colors=np.vstack(colors) if colors else None,
        normals=np.vstack(normals) if normals else None,
        has_color=desc.has_color,
    )


def _cloud_chunks(cloud: PointCloud, descriptor: FormatDescriptor,
                  chunk_size: int):
    for lo in range(0, max(cloud.count, 1), chunk_size):
        hi = min(cloud.count, lo + chunk_size)
        if lo >= hi and cloud.count:
            break
        yield Chunk(
            cloud.positions[lo:hi],
            cloud.colors[lo:hi] if descriptor.has_color else None,
            cloud.normals[lo:hi] if descriptor.has_normals else None)


def write_cloud(cloud: PointCloud, sink,
                descriptor: FormatDescriptor | None = None, *,
                encoding: str | None = None,
                las_scale: float = DEFAULT_LAS_SCALE,
                las_offset=None) -> int:
    """Write a cloud to ``sink``; returns the number of bytes written.

    Without an explicit descriptor the extension picks the kind, binary
    encoding is preferred, and attributes follow the cloud (color is only
    written when ``has_color`` is set).
    """
    if descriptor is None:
        kind = kind_of(sink)
        descriptor, _ = resolve_descriptor(
            kind, has_color=cloud.has_color,
            has_normals=cloud.normals is not None, encoding=encoding)
    if las_offset is None:
        las_offset = tuple(cloud.positions.min(axis=0)) if cloud.count \
            else (0.0, 0.0, 0.0)
    writer = open_writer(sink, descriptor, cloud.count,
                         las_scale=las_scale, las_offset=las_offset)
    try:
        for chunk in _cloud_chunks(cloud, descriptor, DEFAULT_CHUNK_POINTS):
            writer.write(chunk)
    except Exception:
        writer.close()
        raise
    return writer.close()


@dataclass
class ConversionReport:
    """What a conversion did: counts, bytes, and any lossy steps."""

    source: str
    dest: str
    source_kind: str
    dest_kind: str
    points_written: int
    bytes_written: int
    warnings: list[str] = field(default_factory=list)
    dry_run: bool = False

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True)


def _lossy_warnings(reader, in_desc: FormatDescriptor,
                    out_desc: FormatDescriptor,
                    las_scale: float) -> list[str]:
    notes: list[str] = []
    if in_desc.has_color and out_desc.has_color:
        if in_desc.kind in ("las", "laz") or getattr(reader, "narrows_colors",
                                                     False):
            notes.append("16-bit source colors narrowed to 8 bits (>> 8)")
    if out_desc.kind in ("las", "laz"):
        notes.append(f"positions quantized to the {las_scale:g} m LAS grid")
    elif out_desc.encoding == ASCII and in_desc.encoding != ASCII:
        notes.append(f"positions rounded to {ASCII_DECIMALS} decimal places")
    return notes


def convert(in_path, out_path, *, kind: str | None = None,
            encoding: str | None = None,
            chunk_size: int = DEFAULT_CHUNK_POINTS,
            las_scale: float = DEFAULT_LAS_SCALE,
            las_offset=None, dry_run: bool = False) -> ConversionReport:
    """Stream a point-cloud file into another format.

    Runs in fixed-size batches; the only whole-file passes are cheap scans
    (row counts for headerless ASCII, the coordinate minimum when a LAS
    offset must be derived, the xyzrgb color-convention scan).
    """
    reader = open_reader(in_path)
    in_desc = reader.descriptor
    out_kind = kind or kind_of(out_path)
    out_desc, warnings = resolve_descriptor(
        out_kind, has_color=in_desc.has_color,
        has_normals=in_desc.has_normals, encoding=encoding)
    warnings += _lossy_warnings(reader, in_desc, out_desc, las_scale)

    count = reader.count
    report = ConversionReport(
        source=str(in_path), dest=str(out_path),
        source_kind=in_desc.kind, dest_kind=out_desc.kind,
        points_written=count, bytes_written=0, warnings=warnings,
        dry_run=dry_run)
    if dry_run:
        return report

    if out_desc.kind in ("las", "laz") and las_offset is None:
        las_offset = _minimum_pass(reader, chunk_size)

    if las_offset is None:
        las_offset = (0.0, 0.0, 0.0)
    writer = open_writer(out_path, out_desc, count,
                         las_scale=las_scale, las_offset=las_offset)
    written = 0
    try:
        for chunk in reader.chunks(chunk_size):
            writer.write(_adapt_chunk(chunk, out_desc))
            written += chunk.positions.shape[0]
    except Exception:
        writer.close()
        raise
    report.bytes_written = writer.close()
    report.points_written = written
    return report


def _minimum_pass(reader, chunk_size: int):
    """Component-wise coordinate minimum, streamed."""
    lows = None
    for chunk in reader.chunks(chunk_size):
        if chunk.positions.shape[0] == 0:
            continue
        block = chunk.positions.min(axis=0)
        lows = block if lows is None else np.minimum(lows, block)
    return (0.0, 0.0, 0.0) if lows is None else tuple(lows)


def _adapt_chunk(chunk: Chunk, out_desc: FormatDescriptor) -> Chunk:
    n = chunk.positions.shape[0]
    colors = chunk.colors
    normals = chunk.normals
    if out_desc.has_color and colors is None:
        colors = np.zeros((n, 3), dtype=np.uint8)
    if not out_desc.has_color:
        colors = None
    if not out_desc.has_normals:
        normals = None
    return Chunk(chunk.positions, colors, normals)
