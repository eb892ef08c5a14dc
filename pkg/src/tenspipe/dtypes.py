"""Static typing of tensor streams: element types, dimensions, frame rates.

A tensor stream datum is described by one or more ``TensorInfo`` entries
(element type + 4-component dimension) bundled into a ``TensorsInfo``
together with a stream frame rate.  Dimensions always have exactly four
components; trailing unused axes hold 1.  Component 0 is the
fastest-varying (contiguous) axis, so the flat index of ``(i0,i1,i2,i3)``
is ``i0 + d0*(i1 + d1*(i2 + d2*i3))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import CapsError

#: Hard limit on tensors per frame (memory chunks in one buffer).
MAX_TENSORS = 16

#: Maximum value of a single dimension component.
DIM_MAX = 65535

#: Maximum frame-rate numerator.
RATE_MAX = 2147483647

_U64_MAX = 2**64 - 1


class ElementType(IntEnum):
    """Scalar element type of a tensor. Values double as kernel type codes."""

    UINT8 = 0
    INT8 = 1
    UINT16 = 2
    INT16 = 3
    UINT32 = 4
    INT32 = 5
    UINT64 = 6
    INT64 = 7
    FLOAT32 = 8
    FLOAT64 = 9

    @property
    def width(self) -> int:
        return _WIDTHS[self]

    @property
    def np_dtype(self) -> np.dtype:
        return _NP_DTYPES[self]

    @property
    def is_integer(self) -> bool:
        return self.value <= ElementType.INT64

    def render(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, text: str) -> "ElementType":
        try:
            return _BY_NAME[text]
        except KeyError:
            raise CapsError(f"unknown tensor element type {text!r}") from None


_WIDTHS = {
    ElementType.UINT8: 1,
    ElementType.INT8: 1,
    ElementType.UINT16: 2,
    ElementType.INT16: 2,
    ElementType.UINT32: 4,
    ElementType.INT32: 4,
    ElementType.UINT64: 8,
    ElementType.INT64: 8,
    ElementType.FLOAT32: 4,
    ElementType.FLOAT64: 8,
}

_NP_DTYPES = {
    ElementType.UINT8: np.dtype(np.uint8),
    ElementType.INT8: np.dtype(np.int8),
    ElementType.UINT16: np.dtype("<u2"),
    ElementType.INT16: np.dtype("<i2"),
    ElementType.UINT32: np.dtype("<u4"),
    ElementType.INT32: np.dtype("<i4"),
    ElementType.UINT64: np.dtype("<u8"),
    ElementType.INT64: np.dtype("<i8"),
    ElementType.FLOAT32: np.dtype("<f4"),
    ElementType.FLOAT64: np.dtype("<f8"),
}

_BY_NAME = {t.name.lower(): t for t in ElementType}


def element_byte_width(etype: ElementType) -> int:
    """Fixed byte width of one scalar of the given element type."""
    return _WIDTHS[ElementType(etype)]


@dataclass(frozen=True)
class TensorDim:
    """A 4-component tensor dimension, optionally tagged with a written rank.

    ``explicit_rank`` records how many components the user wrote (some
    consumers care about rank); it never affects equality or byte sizes.
    """

    d: tuple[int, int, int, int]
    explicit_rank: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.d) != 4:
            raise CapsError(f"dimension needs exactly 4 components, got {len(self.d)}")
        for c in self.d:
            if not isinstance(c, int) or not (1 <= c <= DIM_MAX):
                raise CapsError(f"dimension component {c} outside [1, {DIM_MAX}]")
        r = self.explicit_rank
        if r is not None:
            if not (1 <= r <= 4):
                raise CapsError(f"explicit rank {r} outside [1, 4]")
            if any(c != 1 for c in self.d[r:]):
                raise CapsError(f"components past rank {r} must be 1: {self.d}")

    @classmethod
    def of(cls, *components: int, rank: int | None = None) -> "TensorDim":
        """Build from 1..4 components, padding trailing axes with 1."""
        if not (1 <= len(components) <= 4):
            raise CapsError(f"dimension needs 1..4 components, got {len(components)}")
        padded = tuple(components) + (1,) * (4 - len(components))
        return cls(padded, explicit_rank=rank)

    @classmethod
    def parse(cls, text: str) -> "TensorDim":
        parts = text.split(":")
        try:
            comps = [int(p) for p in parts]
        except ValueError:
            raise CapsError(f"bad dimension string {text!r}") from None
        return cls.of(*comps, rank=len(parts))

    def render(self) -> str:
        n = self.explicit_rank or 4
        return ":".join(str(c) for c in self.d[:n])

    @property
    def count(self) -> int:
        """Number of elements."""
        return self.d[0] * self.d[1] * self.d[2] * self.d[3]

    @property
    def used_rank(self) -> int:
        """Index of the last axis larger than 1, plus one (min 1)."""
        for i in (3, 2, 1):
            if self.d[i] > 1:
                return i + 1
        return 1

    def with_axis(self, axis: int, size: int) -> "TensorDim":
        d = list(self.d)
        d[axis] = size
        rank = self.explicit_rank
        if rank is not None and axis >= rank:
            rank = axis + 1 if size > 1 else rank
        return TensorDim(tuple(d), explicit_rank=rank)


@dataclass(frozen=True)
class Framerate:
    """A reduced fraction of frames per second; 0/1 means variable rate."""

    num: int
    den: int = 1

    def __post_init__(self):
        if self.den <= 0:
            raise CapsError(f"framerate denominator must be positive, got {self.den}")
        if not (0 <= self.num <= RATE_MAX):
            raise CapsError(f"framerate numerator {self.num} outside [0, {RATE_MAX}]")
        if self.num == 0:
            object.__setattr__(self, "den", 1)
        else:
            g = math.gcd(self.num, self.den)
            object.__setattr__(self, "num", self.num // g)
            object.__setattr__(self, "den", self.den // g)

    VARIABLE: "Framerate" = None  # set below

    @property
    def is_variable(self) -> bool:
        return self.num == 0

    def frame_ts(self, k: int) -> int:
        """Timestamp in ns of the k-th frame at this rate (0 for variable)."""
        if self.num == 0:
            return 0
        return (k * 1_000_000_000 * self.den) // self.num

    def period_ns(self) -> int:
        if self.num == 0:
            raise CapsError("variable rate has no period")
        return (1_000_000_000 * self.den) // self.num

    def as_float(self) -> float:
        return self.num / self.den

    def __lt__(self, other: "Framerate") -> bool:
        return self.num * other.den < other.num * self.den

    def render(self) -> str:
        return f"{self.num}/{self.den}"

    @classmethod
    def parse(cls, text: str) -> "Framerate":
        try:
            if "/" in text:
                n, d = text.split("/", 1)
                return cls(int(n), int(d))
            return cls(int(text), 1)
        except (ValueError, TypeError):
            raise CapsError(f"bad framerate string {text!r}") from None


Framerate.VARIABLE = Framerate(0, 1)


@dataclass(frozen=True)
class TensorInfo:
    """Element type and dimension of a single tensor in a stream."""

    etype: ElementType
    dim: TensorDim
    name: str | None = field(default=None, compare=False)

    @property
    def byte_size(self) -> int:
        size = self.etype.width * self.dim.count
        if size > _U64_MAX:
            raise CapsError("size overflow")
        return size

    def render_spec(self) -> str:
        return f"{self.etype.render()}:{self.dim.render()}"

    @classmethod
    def parse_spec(cls, text: str) -> "TensorInfo":
        """Parse a ``type:d0[:d1[:d2[:d3]]]`` property value."""
        head, sep, rest = text.partition(":")
        if not sep:
            raise CapsError(f"bad tensor spec {text!r} (want type:d0:...)")
        return cls(ElementType.parse(head), TensorDim.parse(rest))


@dataclass(frozen=True)
class TensorsInfo:
    """Ordered bundle of 1..16 tensors plus the stream frame rate."""

    tensors: tuple[TensorInfo, ...]
    rate: Framerate = Framerate.VARIABLE

    def __post_init__(self):
        if not (1 <= len(self.tensors) <= MAX_TENSORS):
            raise CapsError(
                f"tensor count {len(self.tensors)} outside [1, {MAX_TENSORS}]"
            )

    @classmethod
    def single(cls, etype: ElementType, dim: TensorDim,
               rate: Framerate = Framerate.VARIABLE) -> "TensorsInfo":
        return cls((TensorInfo(etype, dim),), rate)

    @classmethod
    def parse_spec(cls, text: str, rate: Framerate = Framerate.VARIABLE) -> "TensorsInfo":
        """Parse a dot-separated list of tensor specs."""
        return cls(tuple(TensorInfo.parse_spec(p) for p in text.split(".")), rate)

    def __len__(self) -> int:
        return len(self.tensors)

    def __getitem__(self, i: int) -> TensorInfo:
        return self.tensors[i]

    @property
    def frame_byte_size(self) -> int:
        total = 0
        for t in self.tensors:
            total += t.byte_size
            if total > _U64_MAX:
                raise CapsError("size overflow")
        return total


def frame_byte_size(info: TensorsInfo) -> int:
    """Total payload bytes of one frame described by ``info``."""
    return info.frame_byte_size
