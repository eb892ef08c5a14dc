"""Stream frames: immutable multi-chunk buffers with shared ownership.

A ``Frame`` carries 1..16 ``Chunk`` payloads.  Chunks are never mutated
after creation, so handing a frame to several downstream branches (tee,
mux, demux) shares the underlying bytes instead of copying them.  The
``CopyCounter`` instruments every place the framework does materialize a
new payload, which lets tests pin the zero-copy contract.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace

import numpy as np

from .dtypes import MAX_TENSORS, TensorsInfo
from .errors import PipelineError


class CopyCounter:
    """Thread-safe count of payload byte materializations in one pipeline."""

    def __init__(self):
        self._lock = threading.Lock()
        self._count = 0

    def add(self, n: int = 1) -> None:
        with self._lock:
            self._count += n

    @property
    def value(self) -> int:
        with self._lock:
            return self._count

    def reset(self) -> None:
        with self._lock:
            self._count = 0


class Chunk:
    """One immutable payload. Copying the handle shares the bytes."""

    __slots__ = ("data",)

    def __init__(self, data):
        # memoryview payloads keep zero-copy slices of a parent buffer alive
        if not isinstance(data, (bytes, memoryview)):
            data = bytes(data)
        self.data = data

    def __len__(self) -> int:
        return len(self.data) if isinstance(self.data, bytes) else self.data.nbytes

    def tobytes(self) -> bytes:
        """Materialize as bytes (copies only for memoryview payloads)."""
        return self.data if isinstance(self.data, bytes) else self.data.tobytes()

    def as_array(self, dtype, count: int) -> np.ndarray:
        """Read-only numpy view over the payload, no copy."""
        arr = np.frombuffer(self.data, dtype=dtype, count=count)
        arr.flags.writeable = False
        return arr

    def __repr__(self) -> str:
        return f"Chunk({len(self)} bytes)"


@dataclass(frozen=True)
class Frame:
    """One timestamped stream datum.

    ``seq`` is stamped by the emitting pad; ``wall_ns`` is the wall-clock
    birth time used for latency accounting.
    """

    timestamp: int
    chunks: tuple[Chunk, ...]
    seq: int = 0
    wall_ns: int = 0

    def __post_init__(self):
        if self.timestamp < 0:
            raise PipelineError(f"negative timestamp {self.timestamp}")
        if not (1 <= len(self.chunks) <= MAX_TENSORS):
            raise PipelineError(f"frame needs 1..{MAX_TENSORS} chunks")

    def with_seq(self, seq: int) -> "Frame":
        return replace(self, seq=seq)

    def with_timestamp(self, ts: int) -> "Frame":
        return replace(self, timestamp=ts)

    def with_wall(self, wall_ns: int) -> "Frame":
        return replace(self, wall_ns=wall_ns)

    def with_chunks(self, chunks: tuple[Chunk, ...]) -> "Frame":
        return replace(self, chunks=chunks)

    def array(self, info: TensorsInfo, index: int = 0) -> np.ndarray:
        """Flat read-only view of tensor ``index`` typed per ``info``."""
        t = info[index]
        return self.chunks[index].as_array(t.etype.np_dtype, t.dim.count)


def make_frame(info: TensorsInfo, timestamp: int, payloads, *,
               wall_ns: int = 0) -> Frame:
    """Wrap payload buffers into a frame without copying.

    Each payload length must equal the byte size of the corresponding
    tensor in ``info``.
    """
    payloads = list(payloads)
    if len(payloads) != len(info):
        raise PipelineError(
            f"payload size mismatch: got {len(payloads)} payloads for "
            f"{len(info)} tensors"
        )
    chunks = []
    for i, (p, t) in enumerate(zip(payloads, info.tensors)):
        chunk = p if isinstance(p, Chunk) else Chunk(p)
        if len(chunk) != t.byte_size:
            raise PipelineError(
                f"payload size mismatch at tensor {i}: got {len(chunk)} bytes, "
                f"expected {t.byte_size}"
            )
        chunks.append(chunk)
    return Frame(timestamp=timestamp, chunks=tuple(chunks), wall_ns=wall_ns)


def zero_frame(info: TensorsInfo, timestamp: int = 0) -> Frame:
    """A frame of all-zero payloads matching ``info``."""
    return make_frame(info, timestamp, [bytes(t.byte_size) for t in info.tensors])
