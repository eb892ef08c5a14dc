"""Stream container file format (magic ``NNSTRM1\\0``).

Layout, little-endian throughout::

    8 bytes  magic "NNSTRM1\\0"
    u32      header_len
    bytes    UTF-8 JSON header {"caps": str, "frame_count": int, "paced": bool}
    frames   each: u64 timestamp_ns, u32 chunk_count,
             then per chunk u64 len + raw bytes
"""

from __future__ import annotations

import json
import struct

from .caps import StreamCaps, TensorCaps, parse_caps
from .errors import CapsError, ContainerError
from .frames import Chunk, Frame

MAGIC = b"NNSTRM1\x00"


def file_write(path: str, caps: StreamCaps, frames, paced: bool = False) -> None:
    """Write frames under fixed caps; read_file inverts this bitwise."""
    if not caps.is_fixed:
        raise ContainerError(f"container needs fixed caps, got {caps.render()}")
    header = json.dumps(
        {"caps": caps.render(), "frame_count": len(frames), "paced": bool(paced)}
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for frame in frames:
            fh.write(struct.pack("<QI", frame.timestamp, len(frame.chunks)))
            for chunk in frame.chunks:
                data = chunk.tobytes()
                fh.write(struct.pack("<Q", len(data)))
                fh.write(data)


def file_read(path: str) -> tuple[StreamCaps, list[Frame]]:
    """Read a container; errors carry the byte offset of the corruption."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ContainerError(f"cannot read {path!r}: {exc}") from exc
    if blob[:8] != MAGIC:
        raise ContainerError("magic mismatch", offset=0)
    if len(blob) < 12:
        raise ContainerError("truncated header length", offset=8)
    (header_len,) = struct.unpack_from("<I", blob, 8)
    if len(blob) < 12 + header_len:
        raise ContainerError("truncated header", offset=12)
    try:
        header = json.loads(blob[12:12 + header_len].decode("utf-8"))
        caps = parse_caps(header["caps"])
        frame_count = int(header["frame_count"])
    except (ValueError, KeyError, CapsError) as exc:
        raise ContainerError(f"bad header: {exc}", offset=12) from exc
    if not caps.is_fixed:
        raise ContainerError("header caps are not fixed", offset=12)
    sizes = None
    if isinstance(caps, TensorCaps):
        info = caps.to_info()
        sizes = [t.byte_size for t in info.tensors]
    offset = 12 + header_len
    frames = []
    for index in range(frame_count):
        if len(blob) < offset + 12:
            raise ContainerError(f"truncated frame {index}", offset=offset)
        ts, chunk_count = struct.unpack_from("<QI", blob, offset)
        offset += 12
        if sizes is not None and chunk_count != len(sizes):
            raise ContainerError(
                f"frame {index} has {chunk_count} chunks, caps say {len(sizes)}",
                offset=offset - 4,
            )
        chunks = []
        for c in range(chunk_count):
            if len(blob) < offset + 8:
                raise ContainerError(
                    f"truncated chunk header in frame {index}", offset=offset
                )
            (length,) = struct.unpack_from("<Q", blob, offset)
            offset += 8
            if len(blob) < offset + length:
                raise ContainerError(
                    f"truncated chunk {c} in frame {index}", offset=offset
                )
            if sizes is not None and length != sizes[c]:
                raise ContainerError(
                    f"frame {index} chunk {c} has {length} bytes, "
                    f"caps say {sizes[c]}",
                    offset=offset - 8,
                )
            chunks.append(Chunk(blob[offset:offset + length]))
            offset += length
        frames.append(Frame(timestamp=ts, chunks=tuple(chunks), seq=index))
    if offset != len(blob):
        raise ContainerError(
            f"{len(blob) - offset} trailing bytes after frame {frame_count - 1}",
            offset=offset,
        )
    return caps, frames
