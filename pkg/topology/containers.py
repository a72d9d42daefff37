from __future__ import annotations

from pathlib import Path
import struct

import numpy as np

from spectrum.geometry import TorusGeometry

from .services import GridPartition, PartitionError


MAGIC = b"TPLPART"
VERSION = 1
HEADER = struct.Struct("<ddIII")


class ContainerFormatError(PartitionError):
    pass


def dump_partition(part: GridPartition) -> bytes:
    """Magic, version byte, (a, b, nx, ny, k) header, then int32 labels in row-major (x, y) order."""
    header = HEADER.pack(part.geometry.a, part.geometry.b, part.nx, part.ny, part.k)
    body = np.ascontiguousarray(part.labels, dtype="<i4").tobytes()
    return MAGIC + bytes([VERSION]) + header + body


def parse_partition(payload: bytes) -> GridPartition:
    prefix = len(MAGIC) + 1
    if len(payload) < prefix + HEADER.size or not payload.startswith(MAGIC):
        raise ContainerFormatError("not a partition container")
    version = payload[len(MAGIC)]
    if version != VERSION:
        raise ContainerFormatError(f"unsupported container version {version}")
    a, b, nx, ny, k = HEADER.unpack_from(payload, prefix)
    body = payload[prefix + HEADER.size :]
    if len(body) != 4 * nx * ny:
        raise ContainerFormatError(f"expected {4 * nx * ny} label bytes, found {len(body)}")
    labels = np.frombuffer(body, dtype="<i4").reshape(nx, ny)
    try:
        return GridPartition(geometry=TorusGeometry.of(a, b), labels=labels, k=k)
    except (PartitionError, ValueError) as exc:
        raise ContainerFormatError(f"container holds an invalid partition: {exc}") from exc


def save_partition(path: Path, part: GridPartition) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dump_partition(part))
    return path


def load_partition(path: Path) -> GridPartition:
    return parse_partition(Path(path).read_bytes())
