"""Value-driven flow control: tensor_if, tensor_rate, and the repo pair.

The repo pair realizes recurrence without a data-link cycle: a repo sink
deposits frames into a named capacity-1 mailbox and the paired repo
source re-emits them, bootstrapping the loop with one zero-filled frame.
"""

from __future__ import annotations

import math
import threading

import numpy as np

from ..caps import StreamCaps, TensorCaps
from ..dtypes import Framerate, TensorsInfo
from ..element import Element, Pad, Prop, SourceElement, register_element
from ..errors import PipelineError
from ..events import Eos, Qos
from ..frames import Frame, zero_frame

_REDUCTIONS = ("max", "min", "mean")
_OPS = ("eq", "ne", "gt", "ge", "lt", "le", "in_range", "out_range")


@register_element
class TensorIf(Element):
    """Passes, drops, or routes frames based on one tensor value.

    ``source`` picks the value: ``T:max|min|mean`` reduces tensor T,
    ``T:N`` reads flat element N.  Actions are ``pass``, ``drop``, or
    ``route:K`` (src pad K).
    """

    KIND = "tensor_if"
    PROPS = {
        "source": Prop("str", default="0:max"),
        "op": Prop("str", required=True, choices=_OPS),
        "operand": Prop("str", required=True),
        "then": Prop("str", default="pass"),
        "else": Prop("str", default="drop"),
    }

    def _make_pads(self) -> None:
        self.add_sink_pad("sink", templates=(TensorCaps(),))

    def request_src_pad(self) -> Pad:
        return self.add_src_pad(f"src_{len(self.src_pads)}")

    def __init__(self, name, props=None, ctx=None):
        super().__init__(name, props, ctx)
        src = self.props["source"]
        tensor, sep, what = src.partition(":")
        try:
            self._tensor_index = int(tensor)
        except ValueError:
            raise PipelineError(f"{name}: bad source {src!r}") from None
        if not sep:
            raise PipelineError(f"{name}: bad source {src!r}")
        if what in _REDUCTIONS:
            self._reduction, self._element_index = what, None
        else:
            try:
                self._reduction, self._element_index = None, int(what)
            except ValueError:
                raise PipelineError(f"{name}: bad source {src!r}") from None

        op = self.props["op"]
        operand = self.props["operand"]
        if op in ("in_range", "out_range"):
            lo, sep, hi = operand.partition(":")
            if not sep:
                raise PipelineError(f"{name}: {op} needs operand lo:hi")
            self._lo, self._hi = float(lo), float(hi)
            if self._lo > self._hi:
                raise PipelineError(f"{name}: range needs lo <= hi")
        else:
            self._lo = self._hi = float(operand)

        self._actions = {}
        for key in ("then", "else"):
            action = self.props[key]
            if action in ("pass", "drop"):
                self._actions[key] = (action, None)
            elif action.startswith("route:"):
                self._actions[key] = ("route", int(action.split(":", 1)[1]))
            else:
                raise PipelineError(f"{name}: bad action {action!r}")

    def configure(self) -> None:
        info = self.sink_info()
        if not (0 <= self._tensor_index < len(info)):
            raise PipelineError(
                f"{self.name}: tensor index {self._tensor_index} out of range"
            )
        if self._element_index is not None:
            size = info[self._tensor_index].dim.count
            if not (0 <= self._element_index < size):
                raise PipelineError(
                    f"{self.name}: element index {self._element_index} outside "
                    f"tensor of {size} elements"
                )
        needed = 1
        for action, target in self._actions.values():
            if action == "route":
                needed = max(needed, target + 1)
        if len(self.src_pads) < needed:
            raise PipelineError(
                f"{self.name}: route target needs {needed} src pads, "
                f"{len(self.src_pads)} linked"
            )
        for pad in self.src_pads:
            pad.negotiated = self.sink_pads[0].negotiated

    def _value(self, frame: Frame) -> float:
        info = self.sink_info()
        arr = frame.array(info, self._tensor_index)
        if self._reduction == "max":
            return float(arr.max())
        if self._reduction == "min":
            return float(arr.min())
        if self._reduction == "mean":
            return float(arr.astype(np.float64).mean())
        return float(arr[self._element_index])

    def _test(self, v: float) -> bool:
        op = self.props["op"]
        if op == "eq":
            return v == self._lo
        if op == "ne":
            return v != self._lo
        if op == "gt":
            return v > self._lo
        if op == "ge":
            return v >= self._lo
        if op == "lt":
            return v < self._lo
        if op == "le":
            return v <= self._lo
        if op == "in_range":
            return self._lo <= v <= self._hi
        return not (self._lo <= v <= self._hi)

    def handle_frame(self, pad: Pad, frame: Frame) -> None:
        action, target = self._actions["then" if self._test(self._value(frame)) else "else"]
        if action == "pass":
            self.src_pads[0].push(frame)
        elif action == "route":
            self.src_pads[target].push(frame)


@register_element
class TensorRate(Element):
    """Re-times a stream to a target rate by dropping (and, in duplicate
    mode, repeating) frames; sheds extra frames on downstream lateness."""

    KIND = "tensor_rate"
    PROPS = {
        "framerate": Prop("fraction", required=True),
        "mode": Prop("str", default="drop_only", choices=("drop_only", "duplicate")),
    }

    def _make_pads(self) -> None:
        self.add_sink_pad("sink", templates=(TensorCaps(),))
        self.add_src_pad("src")

    def __init__(self, name, props=None, ctx=None):
        super().__init__(name, props, ctx)
        target: Framerate = self.props["framerate"]
        if target.is_variable:
            raise PipelineError(f"{name}: target rate must have numerator > 0")
        self._first_ts: int | None = None
        self._emitted = 0
        self._prev: Frame | None = None
        self._drop_budget = 0

    def configure(self) -> None:
        caps = self.sink_pads[0].negotiated
        self.src_pads[0].negotiated = caps.with_rate(self.props["framerate"])

    def _due(self, m: int) -> int:
        target: Framerate = self.props["framerate"]
        return self._first_ts + (m * 1_000_000_000 * target.den) // target.num

    @property
    def _period(self) -> int:
        return self.props["framerate"].period_ns()

    def _emit(self, frame: Frame) -> None:
        if self._drop_budget > 0:
            self._drop_budget -= 1
        else:
            self.src_pads[0].push(frame)
        self._emitted += 1

    def handle_frame(self, pad: Pad, frame: Frame) -> None:
        if self._first_ts is None:
            self._first_ts = frame.timestamp
        if self.props["mode"] == "duplicate" and self._prev is not None:
            while frame.timestamp >= self._due(self._emitted) + self._period:
                self._emit(self._prev.with_timestamp(self._due(self._emitted)))
        if frame.timestamp >= self._due(self._emitted):
            self._emit(frame)
        self._prev = frame

    def handle_event(self, pad: Pad, event) -> None:
        if isinstance(event, Eos) and self.props["mode"] == "duplicate" \
                and self._prev is not None:
            # nominal stream end: one input period past the last frame
            in_rate = self.sink_pads[0].negotiated.to_info().rate
            if not in_rate.is_variable:
                end = self._prev.timestamp + in_rate.period_ns()
                while self._due(self._emitted) < end:
                    self._emit(self._prev.with_timestamp(self._due(self._emitted)))
        super().handle_event(pad, event)

    def handle_upstream_event(self, pad: Pad, event) -> None:
        if isinstance(event, Qos):
            if event.lateness_ns > 0:
                self._drop_budget += math.ceil(event.lateness_ns / self._period)
            return  # absorbed: the rate element is the reaction point
        super().handle_upstream_event(pad, event)

    def reset(self) -> None:
        super().reset()
        self._first_ts = None
        self._emitted = 0
        self._prev = None
        self._drop_budget = 0


class RepoSlot:
    """Named capacity-1 mailbox shared by one repo sink/src pair."""

    def __init__(self, name: str, bootstrap_info: TensorsInfo):
        self.name = name
        self.bootstrap_info = bootstrap_info
        self._cond = threading.Condition()
        self._frame: Frame | None = None
        self._eos = False

    def put(self, frame: Frame, ctx) -> None:
        with self._cond:
            if not ctx.wait_while(lambda: self._frame is not None and not self._eos,
                                  self._cond):
                return
            self._frame = frame
            self._cond.notify_all()

    def put_eos(self) -> None:
        with self._cond:
            self._eos = True
            self._cond.notify_all()

    def take(self, ctx) -> Frame | None:
        """Next deposited frame; None on end of stream or pipeline abort."""
        with self._cond:
            if not ctx.wait_while(lambda: self._frame is None and not self._eos,
                                  self._cond):
                return None
            if self._frame is None:
                return None  # eos
            frame, self._frame = self._frame, None
            self._cond.notify_all()
            return frame

    def reset(self) -> None:
        with self._cond:
            self._frame = None
            self._eos = False


@register_element
class RepoSink(Element):
    """Deposits frames into a named repo slot (blocking when full)."""

    KIND = "tensor_reposink"
    PROPS = {"slot": Prop("str", required=True)}

    def _make_pads(self) -> None:
        self.add_sink_pad("sink", templates=(TensorCaps(),))

    def _slot(self) -> RepoSlot:
        try:
            return self.ctx.repo_slots[self.props["slot"]]
        except (AttributeError, KeyError):
            raise PipelineError(
                f"{self.name}: repo slot {self.props['slot']!r} is not bound"
            ) from None

    def configure(self) -> None:
        caps = self.sink_pads[0].negotiated
        if self.props["slot"] in self.ctx.repo_slots and \
                isinstance(caps, TensorCaps):
            declared = self._slot().bootstrap_info
            got = caps.to_info()
            same = len(got) == len(declared) and all(
                a.etype == b.etype and a.dim == b.dim
                for a, b in zip(got.tensors, declared.tensors)
            )
            if not same:
                raise PipelineError(
                    f"{self.name}: deposited stream {caps.render()} does not "
                    f"match the repo source layout of slot "
                    f"{self.props['slot']!r}"
                )

    def handle_frame(self, pad: Pad, frame: Frame) -> None:
        self._slot().put(frame, self.ctx)

    def handle_event(self, pad: Pad, event) -> None:
        if isinstance(event, Eos):
            self._slot().put_eos()
            self.ctx.on_sink_eos(self.name)


@register_element
class RepoSource(SourceElement):
    """Re-emits frames deposited in a named repo slot, starting with one
    zero-filled bootstrap frame."""

    KIND = "tensor_reposrc"
    PROPS = {
        "slot": Prop("str", required=True),
        "info": Prop("tensspec", required=True),
        "rate": Prop("fraction", default=Framerate.VARIABLE),
    }

    def output_caps(self) -> StreamCaps:
        info: TensorsInfo = self.props["info"]
        return TensorCaps.from_info(TensorsInfo(info.tensors, self.props["rate"]))

    def frames(self):
        info: TensorsInfo = self.props["info"]
        yield zero_frame(info, timestamp=0)
        slot = self.ctx.repo_slots[self.props["slot"]]
        while True:
            frame = slot.take(self.ctx)
            if frame is None:
                return
            yield frame
