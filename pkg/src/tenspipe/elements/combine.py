"""Stream combination: mux/demux, merge/split, temporal aggregation.

Multi-input elements synchronize per policy.  One sink pad paces the
output: the slowest-rate pad (slowest), the fastest (fastest), or a
designated pad (base).  For each pacing frame with timestamp t, every
other pad contributes its latest frame with timestamp <= t.  Emission
waits until that choice is final, i.e. the pad holds a frame beyond t or
reached end of stream, which makes frame pairing independent of thread
timing.

Pads fed by a feedback loop (an upstream repo source whose paired repo
sink sits downstream of this element) cannot be finalized that way: the
next loop frame only exists after this element emits.  Those pads use a
strict consume-once rendezvous instead, which is exactly the lockstep a
recurrence needs.
"""

from __future__ import annotations

import threading
from collections import deque

import numpy as np

from ..caps import TensorCaps
from ..dtypes import MAX_TENSORS, Framerate, TensorDim, TensorsInfo
from ..element import Element, Pad, Prop, register_element
from ..errors import PipelineError
from ..events import EOS, Eos, FlushStart, FlushStop
from ..frames import Chunk, Frame
from .transform import np_view

_MAILBOX_CAP = 16


class _PadState:
    __slots__ = ("pending", "candidate", "fresh", "eos", "last_fresh")

    def __init__(self):
        self.pending: deque[Frame] = deque()    # normal pads: not yet sieved
        self.candidate: Frame | None = None     # latest frame with ts <= t
        self.fresh: deque[Frame] = deque()      # feedback pads: unconsumed
        self.last_fresh: Frame | None = None
        self.eos = False


class SyncCombiner(Element):
    """Base of multi-input elements with pacing-pad synchronization."""

    PROPS = {
        "policy": Prop("str", default="slowest",
                       choices=("slowest", "fastest", "base")),
        "base": Prop("int", default=0),
    }

    def _make_pads(self) -> None:
        self.add_src_pad("src")

    def request_sink_pad(self) -> Pad:
        return self.add_sink_pad(f"sink_{len(self.sink_pads)}",
                                 templates=(TensorCaps(),))

    def __init__(self, name, props=None, ctx=None):
        super().__init__(name, props, ctx)
        self._cond = threading.Condition()
        self._states: list[_PadState] = []
        self._pacing_index = 0
        self._done = False
        #: sink pad indices fed by a feedback loop; set during validation
        self.feedback_pads: set[int] = set()

    # -- negotiation ---------------------------------------------------------

    def _pick_pacing_pad(self) -> int:
        policy = self.props["policy"]
        if policy == "base":
            base = self.props["base"]
            if not (0 <= base < len(self.sink_pads)):
                raise PipelineError(
                    f"{self.name}: base pad {base} out of range "
                    f"(have {len(self.sink_pads)} sink pads)"
                )
            return base
        rates = [p.negotiated.to_info().rate for p in self.sink_pads]
        fixed = [(r, i) for i, r in enumerate(rates) if not r.is_variable]
        if not fixed:
            raise PipelineError(f"{self.name}: ambiguous pacing pad "
                                "(all inputs have variable rate)")
        if policy == "slowest":
            best = min(fixed, key=lambda ri: ri[0].as_float())
        else:
            best = max(fixed, key=lambda ri: ri[0].as_float())
        return best[1]

    def configure(self) -> None:
        if not self.sink_pads:
            raise PipelineError(f"{self.name}: no inputs linked")
        for pad in self.sink_pads:
            if not isinstance(pad.negotiated, TensorCaps):
                raise PipelineError(
                    f"{self.name}: input {pad.full_name} is not a tensor stream"
                )
        self._pacing_index = self._pick_pacing_pad()
        self._states = [_PadState() for _ in self.sink_pads]
        self._done = False
        pace_rate = self.sink_pads[self._pacing_index].negotiated.to_info().rate
        self.src_pads[0].negotiated = self._output_caps(pace_rate)

    def _output_caps(self, rate: Framerate) -> TensorCaps:
        raise NotImplementedError

    # -- streaming -----------------------------------------------------------

    def receive(self, pad: Pad, frame: Frame) -> None:
        idx = self.sink_pads.index(pad)
        with self._cond:
            if self._done or self.ctx.stop.is_set():
                return
            st = self._states[idx]
            if idx == self._pacing_index or idx in self.feedback_pads:
                box = st.pending if idx == self._pacing_index else st.fresh
                ok = self.ctx.wait_while(
                    lambda: len(box) >= _MAILBOX_CAP and not self._done, self._cond
                )
                if not ok or self._done:
                    return
                box.append(frame)
            else:
                ok = self.ctx.wait_while(
                    lambda: len(st.pending) >= _MAILBOX_CAP and not self._done,
                    self._cond,
                )
                if not ok or self._done:
                    return
                st.pending.append(frame)
            try:
                self._drain()
            except PipelineError as exc:
                self.ctx.post_error(self.name, str(exc))
            self._cond.notify_all()

    def receive_event(self, pad: Pad, event) -> None:
        if isinstance(event, Eos):
            pad.eos = True
            idx = self.sink_pads.index(pad)
            with self._cond:
                self._states[idx].eos = True
                try:
                    self._drain()
                except PipelineError as exc:
                    self.ctx.post_error(self.name, str(exc))
                self._cond.notify_all()
        elif isinstance(event, (FlushStart, FlushStop)):
            self.src_pads[0].push_event(event)

    def _drain(self) -> None:
        """Emit every pacing frame whose companions are final. Holds _cond."""
        pacing = self._states[self._pacing_index]
        while not self._done:
            if not pacing.pending:
                if pacing.eos:
                    self._done = True
                    self.src_pads[0].push_event(EOS)
                return
            t = pacing.pending[0].timestamp
            if not self._companions_final(t):
                return
            pacing_frame = pacing.pending.popleft()
            chosen = self._choose(t)
            self._cond.notify_all()
            if chosen is not None:
                frames: list[Frame | None] = [None] * len(self.sink_pads)
                frames[self._pacing_index] = pacing_frame
                for idx, f in chosen:
                    frames[idx] = f
                out_ts = max(f.timestamp for f in frames if f is not None)
                self._emit(frames, out_ts)

    def _companions_final(self, t: int) -> bool:
        for idx, st in enumerate(self._states):
            if idx == self._pacing_index:
                continue
            if idx in self.feedback_pads:
                if not st.fresh and not st.eos:
                    return False
            else:
                while st.pending and st.pending[0].timestamp <= t:
                    st.candidate = st.pending.popleft()
                if not st.pending and not st.eos:
                    return False
        return True

    def _choose(self, t: int) -> list[tuple[int, Frame]] | None:
        """Companion frames for pacing time t, or None when not emittable."""
        chosen = []
        for idx, st in enumerate(self._states):
            if idx == self._pacing_index:
                continue
            if idx in self.feedback_pads:
                if st.fresh:
                    st.last_fresh = st.fresh.popleft()
                elif st.last_fresh is None:
                    return None
                chosen.append((idx, st.last_fresh))
            else:
                if st.candidate is None:
                    return None
                chosen.append((idx, st.candidate))
        return chosen

    def _emit(self, frames: list[Frame], out_ts: int) -> None:
        raise NotImplementedError

    def reset(self) -> None:
        super().reset()
        self._states = [_PadState() for _ in self.sink_pads]
        self._done = False


@register_element
class TensorMux(SyncCombiner):
    """Bundles tensor streams into one multi-tensor stream, referencing the
    input chunks (never copying them)."""

    KIND = "tensor_mux"

    def _output_caps(self, rate: Framerate) -> TensorCaps:
        patterns = []
        for pad in self.sink_pads:
            patterns.extend(pad.negotiated.patterns)
        if len(patterns) > MAX_TENSORS:
            raise PipelineError(
                f"{self.name}: {len(patterns)} tensors exceed the "
                f"{MAX_TENSORS}-chunk limit"
            )
        return TensorCaps(multi=True, count=len(patterns),
                          patterns=tuple(patterns), rate=rate)

    def _emit(self, frames: list[Frame], out_ts: int) -> None:
        chunks = []
        for f in frames:
            chunks.extend(f.chunks)
        self.src_pads[0].push(Frame(timestamp=out_ts, chunks=tuple(chunks),
                                    wall_ns=max(f.wall_ns for f in frames)))


@register_element
class TensorDemux(Element):
    """Un-bundles a multi-tensor stream onto per-pad tensor streams."""

    KIND = "tensor_demux"
    PROPS = {"pick": Prop("str", default="")}

    def _make_pads(self) -> None:
        self.add_sink_pad("sink", templates=(TensorCaps(multi=True),))

    def request_src_pad(self) -> Pad:
        return self.add_src_pad(f"src_{len(self.src_pads)}")

    def __init__(self, name, props=None, ctx=None):
        super().__init__(name, props, ctx)
        self._groups: list[list[int]] | None = None
        if self.props["pick"]:
            try:
                self._groups = [
                    [int(i) for i in group.split(",")]
                    for group in self.props["pick"].split(";")
                ]
            except ValueError:
                raise PipelineError(
                    f"{name}: bad pick {self.props['pick']!r} "
                    "(want e.g. 0;1,2)"
                ) from None

    def configure(self) -> None:
        info = self.sink_info()
        groups = self._groups or [[i] for i in range(len(info))]
        if len(self.src_pads) != len(groups):
            raise PipelineError(
                f"{self.name}: {len(groups)} output groups but "
                f"{len(self.src_pads)} linked src pads"
            )
        caps = self.sink_pads[0].negotiated
        for pad, group in zip(self.src_pads, groups):
            for i in group:
                if not (0 <= i < len(info)):
                    raise PipelineError(
                        f"{self.name}: tensor index {i} out of range "
                        f"(stream has {len(info)})"
                    )
            pad.negotiated = TensorCaps(
                multi=len(group) > 1,
                count=len(group),
                patterns=tuple(caps.patterns[i] for i in group),
                rate=info.rate,
            )
        self._resolved_groups = groups

    def handle_frame(self, pad: Pad, frame: Frame) -> None:
        for sp, group in zip(self.src_pads, self._resolved_groups):
            sp.push(frame.with_chunks(tuple(frame.chunks[i] for i in group)))


@register_element
class TensorMerge(SyncCombiner):
    """Combines tensor streams into one bigger tensor: concatenation along
    an axis, or stacking onto the first spare axis."""

    KIND = "tensor_merge"
    PROPS = dict(SyncCombiner.PROPS,
                 mode=Prop("str", default="concat", choices=("concat", "stack")),
                 axis=Prop("int", default=0))

    def _output_caps(self, rate: Framerate) -> TensorCaps:
        infos = [p.negotiated.to_info() for p in self.sink_pads]
        for info in infos:
            if len(info) != 1:
                raise PipelineError(f"{self.name}: inputs must be single tensors")
        etypes = {info[0].etype for info in infos}
        if len(etypes) != 1:
            raise PipelineError(f"{self.name}: inputs disagree on element type")
        dims = [info[0].dim for info in infos]
        if self.props["mode"] == "concat":
            axis = self.props["axis"]
            if not (0 <= axis <= 3):
                raise PipelineError(f"{self.name}: axis {axis} out of range")
            for d in dims[1:]:
                if any(d.d[k] != dims[0].d[k] for k in range(4) if k != axis):
                    raise PipelineError(
                        f"{self.name}: dimensions differ off the concat axis"
                    )
            total = sum(d.d[axis] for d in dims)
            out_dim = dims[0].with_axis(axis, total)
            self._stack_axis = None
        else:
            if any(d.d != dims[0].d for d in dims[1:]):
                raise PipelineError(f"{self.name}: stack needs equal dimensions")
            axis = next((k for k in range(4) if dims[0].d[k] == 1), None)
            if axis is None:
                raise PipelineError(f"{self.name}: no spare axis to stack onto")
            out_dim = TensorDim(
                tuple(len(dims) if k == axis else dims[0].d[k] for k in range(4)),
                explicit_rank=axis + 1 if axis >= (dims[0].explicit_rank or 0) else None,
            )
            self._stack_axis = axis
        self._in_dims = dims
        return TensorCaps.from_info(
            TensorsInfo.single(infos[0][0].etype, out_dim, rate), multi=False
        )

    def _emit(self, frames: list[Frame], out_ts: int) -> None:
        infos = [p.negotiated.to_info() for p in self.sink_pads]
        axis = self._stack_axis if self._stack_axis is not None else self.props["axis"]
        views = [
            np_view(f.array(info, 0), info[0].dim)
            for f, info in zip(frames, infos)
        ]
        out = np.concatenate(views, axis=3 - axis)
        self.ctx.copies.add(1)
        self.src_pads[0].push(
            Frame(timestamp=out_ts, chunks=(Chunk(out.tobytes()),),
                  wall_ns=max(f.wall_ns for f in frames))
        )


@register_element
class TensorSplit(Element):
    """Splits one tensor stream into segments along an axis.

    Slicing the outermost used axis is zero-copy (contiguous ranges);
    any other axis re-lays the payload out per segment.
    """

    KIND = "tensor_split"
    PROPS = {
        "axis": Prop("int", default=0),
        "segments": Prop("str", required=True),
    }

    def _make_pads(self) -> None:
        self.add_sink_pad("sink", templates=(TensorCaps(count=1),))

    def request_src_pad(self) -> Pad:
        return self.add_src_pad(f"src_{len(self.src_pads)}")

    def __init__(self, name, props=None, ctx=None):
        super().__init__(name, props, ctx)
        try:
            self._segments = [int(s) for s in self.props["segments"].split(",")]
        except ValueError:
            raise PipelineError(
                f"{name}: bad segments {self.props['segments']!r}"
            ) from None
        if any(s < 1 for s in self._segments):
            raise PipelineError(f"{name}: segment sizes must be positive")
        axis = self.props["axis"]
        if not (0 <= axis <= 3):
            raise PipelineError(f"{name}: axis {axis} out of range")

    def configure(self) -> None:
        info = self.sink_info()
        dim = info[0].dim
        axis = self.props["axis"]
        if sum(self._segments) != dim.d[axis]:
            raise PipelineError(
                f"{self.name}: segments {self._segments} sum to "
                f"{sum(self._segments)}, axis {axis} has {dim.d[axis]}"
            )
        if len(self.src_pads) != len(self._segments):
            raise PipelineError(
                f"{self.name}: {len(self._segments)} segments but "
                f"{len(self.src_pads)} linked src pads"
            )
        self._contiguous = axis >= dim.used_rank - 1
        for pad, seg in zip(self.src_pads, self._segments):
            pad.negotiated = TensorCaps.from_info(
                TensorsInfo.single(info[0].etype, dim.with_axis(axis, seg),
                                   info.rate),
                multi=False,
            )

    def handle_frame(self, pad: Pad, frame: Frame) -> None:
        info = self.sink_info()
        dim = info[0].dim
        axis = self.props["axis"]
        if self._contiguous:
            stride = info[0].etype.width
            for k in range(axis):
                stride *= dim.d[k]
            view = memoryview(frame.chunks[0].data)
            offset = 0
            for sp, seg in zip(self.src_pads, self._segments):
                sp.push(frame.with_chunks((Chunk(view[offset:offset + seg * stride]),)))
                offset += seg * stride
        else:
            arr = np_view(frame.array(info, 0), dim)
            offset = 0
            np_axis = 3 - axis
            for sp, seg in zip(self.src_pads, self._segments):
                index = [slice(None)] * 4
                index[np_axis] = slice(offset, offset + seg)
                out = np.ascontiguousarray(arr[tuple(index)])
                self.ctx.copies.add(1)
                sp.push(frame.with_chunks((Chunk(out.tobytes()),)))
                offset += seg


@register_element
class TensorAggregator(Element):
    """Concatenates a sliding window of frames along an axis.

    Buffers ``frames_in`` frames, emits their concatenation, then drops
    the oldest ``frames_flush``; the output rate is the input rate
    divided by ``frames_flush``.
    """

    KIND = "tensor_aggregator"
    PROPS = {
        "frames_in": Prop("int", default=1),
        "frames_flush": Prop("int", default=0),   # 0: same as frames_in
        "axis": Prop("int", default=3),
    }

    def _make_pads(self) -> None:
        self.add_sink_pad("sink", templates=(TensorCaps(count=1),))
        self.add_src_pad("src")

    def __init__(self, name, props=None, ctx=None):
        super().__init__(name, props, ctx)
        self._n = self.props["frames_in"]
        self._s = self.props["frames_flush"] or self._n
        if self._n < 1:
            raise PipelineError(f"{name}: frames_in must be >= 1")
        if not (1 <= self._s <= self._n):
            raise PipelineError(
                f"{name}: frames_flush must be in [1, frames_in], got {self._s}"
            )
        if not (0 <= self.props["axis"] <= 3):
            raise PipelineError(f"{name}: axis out of range")
        self._window: deque[Frame] = deque()

    def configure(self) -> None:
        info = self.sink_info()
        dim = info[0].dim
        axis = self.props["axis"]
        out_dim = dim.with_axis(axis, dim.d[axis] * self._n)
        rate = info.rate
        if not rate.is_variable:
            rate = Framerate(rate.num, rate.den * self._s)
        self.src_pads[0].negotiated = TensorCaps.from_info(
            TensorsInfo.single(info[0].etype, out_dim, rate), multi=False
        )

    def handle_frame(self, pad: Pad, frame: Frame) -> None:
        info = self.sink_info()
        self._window.append(frame)
        if len(self._window) < self._n:
            return
        axis = self.props["axis"]
        views = [np_view(f.array(info, 0), info[0].dim) for f in self._window]
        out = np.concatenate(views, axis=3 - axis)
        self.ctx.copies.add(1)
        newest = self._window[-1]
        self.src_pads[0].push(
            Frame(timestamp=newest.timestamp, chunks=(Chunk(out.tobytes()),),
                  wall_ns=newest.wall_ns)
        )
        for _ in range(self._s):
            self._window.popleft()

    def reset(self) -> None:
        super().reset()
        self._window.clear()
