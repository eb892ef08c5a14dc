"""Stream capabilities: representation, intersection, and link negotiation.

A capability describes the static type of a stream on a link.  Before a
pipeline starts, pad templates may leave fields unconstrained
(wildcards); negotiation intersects the two sides of every link and
fixates leftover wildcards to deterministic defaults.

Rank padding: dimensions are compared after padding trailing axes with 1
up to rank 4, so ``640:480`` and ``640:480:1:1`` are the same stream
type.  The written rank is carried along as advisory metadata only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .dtypes import (
    MAX_TENSORS,
    ElementType,
    Framerate,
    TensorDim,
    TensorInfo,
    TensorsInfo,
)
from .errors import CapsError, NegotiationError

_WILD = "*"


def canonical_dim(dim) -> TensorDim:
    """Pad to 4 components with trailing 1s; rank metadata is preserved
    but never affects equality."""
    if isinstance(dim, TensorDim):
        return dim
    return TensorDim.of(*dim)


@dataclass(frozen=True)
class TensorPattern:
    """One tensor slot of a tensor capability; None fields are wildcards."""

    etype: ElementType | None = None
    dim: tuple[int | None, int | None, int | None, int | None] = (None,) * 4
    rank: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.dim) != 4:
            raise CapsError("pattern dimension needs 4 components")
        for c in self.dim:
            if c is not None and not (1 <= c <= 65535):
                raise CapsError(f"dimension component {c} outside [1, 65535]")

    @property
    def is_fixed(self) -> bool:
        return self.etype is not None and all(c is not None for c in self.dim)

    @classmethod
    def fixed(cls, etype: ElementType, dim: TensorDim) -> "TensorPattern":
        return cls(etype, dim.d, rank=dim.explicit_rank)

    def to_info(self) -> TensorInfo:
        if not self.is_fixed:
            raise CapsError("pattern still has wildcards")
        return TensorInfo(self.etype, TensorDim(self.dim, explicit_rank=self.rank))

    def render_type(self) -> str:
        return self.etype.render() if self.etype is not None else _WILD

    def render_dim(self) -> str:
        n = self.rank or 4
        return ":".join(_WILD if c is None else str(c) for c in self.dim[:n])


def _parse_pattern_dim(text: str) -> tuple[tuple, int]:
    parts = text.split(":")
    if not (1 <= len(parts) <= 4):
        raise CapsError(f"bad dimension string {text!r}")
    comps = []
    for p in parts:
        if p == _WILD:
            comps.append(None)
        else:
            try:
                comps.append(int(p))
            except ValueError:
                raise CapsError(f"bad dimension component {p!r}") from None
    comps += [1] * (4 - len(comps))
    return tuple(comps), len(parts)


class StreamCaps:
    """Base class; concrete kinds are tensor, media (raster/text/binary), ANY."""

    @property
    def is_fixed(self) -> bool:
        raise NotImplementedError

    def render(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True)
class AnyCaps(StreamCaps):
    """Matches anything; identity under intersection."""

    @property
    def is_fixed(self) -> bool:
        return False

    def render(self) -> str:
        return "ANY"


ANY = AnyCaps()


@dataclass(frozen=True)
class TensorCaps(StreamCaps):
    """Capability of a tensor stream.

    ``multi`` distinguishes the bundled kind (``other/tensors``) from the
    plain single-tensor kind; None matches either.  ``count`` is the
    number of tensors (None = wildcard, implies fully wildcard patterns).
    """

    multi: bool | None = None
    count: int | None = None
    patterns: tuple[TensorPattern, ...] | None = None
    rate: Framerate | None = None

    def __post_init__(self):
        if self.count is not None:
            if not (1 <= self.count <= MAX_TENSORS):
                raise CapsError(f"num_tensors {self.count} outside [1, {MAX_TENSORS}]")
            if self.patterns is None:
                object.__setattr__(
                    self, "patterns", (TensorPattern(),) * self.count
                )
            if len(self.patterns) != self.count:
                raise CapsError("pattern count does not match num_tensors")
        elif self.patterns is not None:
            raise CapsError("patterns given without num_tensors")
        if self.multi is False and self.count not in (None, 1):
            raise CapsError("other/tensor carries exactly one tensor")

    @property
    def is_fixed(self) -> bool:
        return (
            self.multi is not None
            and self.count is not None
            and self.rate is not None
            and all(p.is_fixed for p in self.patterns)
        )

    @classmethod
    def from_info(cls, info: TensorsInfo, multi: bool | None = None) -> "TensorCaps":
        if multi is None:
            multi = len(info) > 1
        return cls(
            multi=multi,
            count=len(info),
            patterns=tuple(TensorPattern.fixed(t.etype, t.dim) for t in info.tensors),
            rate=info.rate,
        )

    def to_info(self) -> TensorsInfo:
        if not self.is_fixed:
            raise CapsError(f"caps still have wildcards: {self.render()}")
        return TensorsInfo(tuple(p.to_info() for p in self.patterns), self.rate)

    def with_rate(self, rate: Framerate) -> "TensorCaps":
        return TensorCaps(self.multi, self.count, self.patterns, rate)

    def render(self) -> str:
        rate = self.rate.render() if self.rate is not None else _WILD
        if self.multi is False:
            p = self.patterns[0] if self.patterns else TensorPattern()
            return (
                f"other/tensor,type={p.render_type()},dimension={p.render_dim()},"
                f"framerate={rate}"
            )
        name = "other/tensors" if self.multi else "other/tensor(s)"
        if self.count is None:
            return f"{name},num_tensors={_WILD},framerate={rate}"
        types = ".".join(p.render_type() for p in self.patterns)
        dims = ".".join(p.render_dim() for p in self.patterns)
        return (
            f"{name},num_tensors={self.count},types={types},dimensions={dims},"
            f"framerate={rate}"
        )


@dataclass(frozen=True)
class RasterCaps(StreamCaps):
    """Synthetic raster media: packed rows, ``channels`` interleaved."""

    width: int | None = None
    height: int | None = None
    channels: int | None = None
    rate: Framerate | None = None

    def __post_init__(self):
        if self.channels is not None and self.channels not in (1, 3):
            raise CapsError(f"raster channels must be 1 or 3, got {self.channels}")

    @property
    def is_fixed(self) -> bool:
        return None not in (self.width, self.height, self.channels, self.rate)

    @property
    def frame_size(self) -> int:
        return self.width * self.height * self.channels

    def render(self) -> str:
        f = lambda v: _WILD if v is None else str(v)
        rate = self.rate.render() if self.rate is not None else _WILD
        return (
            f"media/raster,width={f(self.width)},height={f(self.height)},"
            f"channels={f(self.channels)},framerate={rate}"
        )


@dataclass(frozen=True)
class TextCaps(StreamCaps):
    """UTF-8 text datums of varying length."""

    @property
    def is_fixed(self) -> bool:
        return True

    def render(self) -> str:
        return "media/text"


@dataclass(frozen=True)
class BinaryCaps(StreamCaps):
    """Opaque byte datums of varying length."""

    @property
    def is_fixed(self) -> bool:
        return True

    def render(self) -> str:
        return "media/binary"


def render_caps(caps: StreamCaps) -> str:
    return caps.render()


def parse_caps(text: str) -> StreamCaps:
    """Parse a capability string (round-trips bit-exactly with render)."""
    text = text.strip()
    if text == "ANY":
        return ANY
    parts = text.split(",")
    kind = parts[0].strip()
    fields = {}
    for part in parts[1:]:
        key, sep, value = part.partition("=")
        if not sep or not key:
            raise CapsError(f"bad caps field {part!r} in {text!r}")
        fields[key.strip()] = value.strip()

    def pop_rate():
        v = fields.pop("framerate", None)
        if v is None or v == _WILD:
            return None
        return Framerate.parse(v)

    if kind == "other/tensor":
        tname = fields.pop("type", _WILD)
        etype = None if tname == _WILD else ElementType.parse(tname)
        dval = fields.pop("dimension", None)
        if dval is None or dval == _WILD:
            dim, rank = (None,) * 4, None
        else:
            dim, rank = _parse_pattern_dim(dval)
        rate = pop_rate()
        _reject_leftover(fields, text)
        return TensorCaps(
            multi=False, count=1,
            patterns=(TensorPattern(etype, dim, rank=rank),), rate=rate,
        )
    if kind == "other/tensors":
        nval = fields.pop("num_tensors", _WILD)
        rate = pop_rate()
        if nval == _WILD:
            _reject_leftover(fields, text)
            return TensorCaps(multi=True, count=None, rate=rate)
        count = int(nval)
        tnames = fields.pop("types", None)
        dvals = fields.pop("dimensions", None)
        types = [None] * count if tnames in (None, _WILD) else [
            None if t == _WILD else ElementType.parse(t) for t in tnames.split(".")
        ]
        if dvals in (None, _WILD):
            dims = [((None,) * 4, None)] * count
        else:
            dims = [_parse_pattern_dim(d) for d in dvals.split(".")]
        if len(types) != count or len(dims) != count:
            raise CapsError(f"num_tensors does not match list lengths in {text!r}")
        _reject_leftover(fields, text)
        patterns = tuple(
            TensorPattern(t, d, rank=r) for t, (d, r) in zip(types, dims)
        )
        return TensorCaps(multi=True, count=count, patterns=patterns, rate=rate)
    if kind == "media/raster":
        def pop_int(key):
            v = fields.pop(key, _WILD)
            return None if v == _WILD else int(v)
        caps = RasterCaps(pop_int("width"), pop_int("height"),
                          pop_int("channels"), pop_rate())
        _reject_leftover(fields, text)
        return caps
    if kind == "media/text":
        _reject_leftover(fields, text)
        return TextCaps()
    if kind == "media/binary":
        _reject_leftover(fields, text)
        return BinaryCaps()
    raise CapsError(f"unknown caps kind {kind!r}")


def _reject_leftover(fields: dict, text: str) -> None:
    if fields:
        raise CapsError(f"unknown caps fields {sorted(fields)} in {text!r}")


def caps_equal(a: StreamCaps, b: StreamCaps) -> bool:
    """Equality of fixed caps; rank metadata never participates."""
    for c in (a, b):
        if not c.is_fixed:
            raise CapsError(f"caps_equal needs fixed caps, got {c.render()}")
    return a == b


def _intersect_rate(a: Framerate | None, b: Framerate | None):
    """None is a wildcard; 0/1 (variable) unifies with any fixed rate."""
    if a is None:
        return b, True
    if b is None:
        return a, True
    if a == b:
        return a, True
    if a.is_variable:
        return b, True
    if b.is_variable:
        return a, True
    return None, False


def _intersect_pattern(a: TensorPattern, b: TensorPattern):
    if a.etype is None:
        etype = b.etype
    elif b.etype is None or a.etype == b.etype:
        etype = a.etype
    else:
        return None
    dim = []
    for x, y in zip(a.dim, b.dim):
        if x is None:
            dim.append(y)
        elif y is None or x == y:
            dim.append(x)
        else:
            return None
    return TensorPattern(etype, tuple(dim), rank=a.rank or b.rank)


def caps_intersect(a: StreamCaps, b: StreamCaps) -> StreamCaps | None:
    """Per-field intersection; None means the caps are incompatible."""
    if isinstance(a, AnyCaps):
        return b
    if isinstance(b, AnyCaps):
        return a
    if isinstance(a, TensorCaps) and isinstance(b, TensorCaps):
        if a.multi is None:
            multi = b.multi
        elif b.multi is None or a.multi == b.multi:
            multi = a.multi
        else:
            return None
        rate, ok = _intersect_rate(a.rate, b.rate)
        if not ok:
            return None
        if a.count is None:
            count, patterns = b.count, b.patterns
        elif b.count is None:
            count, patterns = a.count, a.patterns
        elif a.count != b.count:
            return None
        else:
            count = a.count
            patterns = []
            for pa, pb in zip(a.patterns, b.patterns):
                p = _intersect_pattern(pa, pb)
                if p is None:
                    return None
                patterns.append(p)
            patterns = tuple(patterns)
        if multi is False and count not in (None, 1):
            return None
        return TensorCaps(multi, count, patterns, rate)
    if isinstance(a, RasterCaps) and isinstance(b, RasterCaps):
        out = {}
        for key in ("width", "height", "channels"):
            x, y = getattr(a, key), getattr(b, key)
            if x is None:
                out[key] = y
            elif y is None or x == y:
                out[key] = x
            else:
                return None
        rate, ok = _intersect_rate(a.rate, b.rate)
        if not ok:
            return None
        return RasterCaps(out["width"], out["height"], out["channels"], rate)
    if isinstance(a, TextCaps) and isinstance(b, TextCaps):
        return a
    if isinstance(a, BinaryCaps) and isinstance(b, BinaryCaps):
        return a
    return None


def fixate(caps: StreamCaps) -> StreamCaps:
    """Pin every remaining wildcard to the deterministic default:
    smallest tensor count, float32, unit dimensions, variable rate."""
    if isinstance(caps, AnyCaps):
        raise NegotiationError("cannot fixate ANY caps")
    if isinstance(caps, TensorCaps):
        count = caps.count if caps.count is not None else 1
        multi = caps.multi if caps.multi is not None else count > 1
        patterns = caps.patterns or (TensorPattern(),) * count
        fixed = tuple(
            TensorPattern(
                p.etype if p.etype is not None else ElementType.FLOAT32,
                tuple(1 if c is None else c for c in p.dim),
                rank=p.rank,
            )
            for p in patterns
        )
        rate = caps.rate if caps.rate is not None else Framerate.VARIABLE
        return TensorCaps(multi, count, fixed, rate)
    if isinstance(caps, RasterCaps):
        return RasterCaps(
            caps.width or 1,
            caps.height or 1,
            caps.channels or 1,
            caps.rate if caps.rate is not None else Framerate.VARIABLE,
        )
    return caps


def negotiate_link(src_caps: StreamCaps, sink_caps: StreamCaps,
                   filter_caps: StreamCaps | None = None) -> StreamCaps:
    """Intersect both ends of a link (plus an optional caps filter) and
    fixate the result to a single fixed capability."""
    inter = caps_intersect(src_caps, sink_caps)
    if inter is not None and filter_caps is not None:
        inter = caps_intersect(inter, filter_caps)
    if inter is None:
        detail = f" through {filter_caps.render()}" if filter_caps is not None else ""
        raise NegotiationError(
            f"cannot link: {src_caps.render()} is incompatible with "
            f"{sink_caps.render()}{detail}"
        )
    fixed = fixate(inter)
    if not fixed.is_fixed:
        raise NegotiationError(f"caps did not fixate: {fixed.render()}")
    return fixed
