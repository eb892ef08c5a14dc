"""Element and pad execution model.

Elements are pipeline nodes connected through directional pads.  The
scheduler is push-driven: a source thread pushes a frame and the push
traverses linked elements synchronously on the same thread until it hits
a queue boundary (which owns its own consumer thread).  Each element is
confined to one streaming thread at a time via a per-element lock;
elements with their own internal synchronization (queue, mux) opt out.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Any, Callable

from .caps import ANY, StreamCaps
from .dtypes import Framerate, TensorsInfo
from .errors import PipelineError, TenspipeError
from .events import EOS, Eos, FlushStart, FlushStop, Qos
from .frames import CopyCounter, Frame


class PipelineContext:
    """Shared runtime state handed to every element of one pipeline."""

    def __init__(self):
        self.copies = CopyCounter()
        self.stop = threading.Event()       # hard abort for all blocking waits
        self.running = threading.Event()    # pause gate for source/queue threads
        self.paced = False
        self.start_wall_ns = 0
        self._error_lock = threading.Lock()
        self.error: tuple[str, str] | None = None
        self.on_sink_eos: Callable[[str], None] = lambda name: None
        self.repo_slots: dict[str, Any] = {}

    def post_error(self, element_name: str, message: str) -> None:
        """Record the first runtime error and abort the pipeline."""
        with self._error_lock:
            if self.error is None:
                self.error = (element_name, message)
        self.stop.set()
        self.running.set()  # wake paused threads so they can exit

    def wait_while(self, predicate, cond: threading.Condition) -> bool:
        """Wait on ``cond`` while ``predicate()`` holds; False on abort.

        The condition's lock must already be held.
        """
        while predicate():
            if self.stop.is_set():
                return False
            cond.wait(0.05)
        return not self.stop.is_set()


@dataclass
class Prop:
    """Schema entry for one element property."""

    type: str                  # int | float | bool | str | fraction | tensspec
    default: Any = None
    required: bool = False
    choices: tuple | None = None


def _convert_prop(kind: str, name: str, spec: Prop, value):
    if isinstance(value, str):
        try:
            if spec.type == "int":
                value = int(value)
            elif spec.type == "float":
                value = float(value)
            elif spec.type == "bool":
                low = value.lower()
                if low not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(value)
                value = low in ("true", "1", "yes")
            elif spec.type == "fraction":
                value = Framerate.parse(value)
            elif spec.type == "tensspec":
                value = TensorsInfo.parse_spec(value)
        except (ValueError, TenspipeError) as exc:
            raise PipelineError(
                f"{kind}: bad value {value!r} for property {name!r}: {exc}"
            ) from None
    if spec.choices is not None and value not in spec.choices:
        raise PipelineError(
            f"{kind}: property {name!r} must be one of {spec.choices}, got {value!r}"
        )
    return value


class Pad:
    """Directional connection point of an element."""

    def __init__(self, element: "Element", direction: str, name: str,
                 templates: tuple[StreamCaps, ...] = (ANY,)):
        self.element = element
        self.direction = direction          # "sink" | "src"
        self.name = name
        self.templates = templates
        self.negotiated: StreamCaps | None = None
        self.peer: Pad | None = None
        self.filter_caps: StreamCaps | None = None   # caps literal on the link
        self.eos = False
        self.frames_seen = 0
        self._seq = 0
        self._last_ts = -1

    @property
    def full_name(self) -> str:
        return f"{self.element.name}.{self.name}"

    def reset(self) -> None:
        self.eos = False
        self.frames_seen = 0
        self._seq = 0
        self._last_ts = -1

    # -- downstream data path (src pads only) ------------------------------

    def push(self, frame: Frame) -> None:
        if frame.timestamp < self._last_ts:
            raise PipelineError(
                f"{self.full_name}: timestamp went backwards "
                f"({frame.timestamp} < {self._last_ts})"
            )
        self._last_ts = frame.timestamp
        frame = frame.with_seq(self._seq)
        self._seq += 1
        self.frames_seen += 1
        peer = self.peer
        if peer is None:
            raise PipelineError(f"{self.full_name}: push on unlinked pad")
        peer.frames_seen += 1
        peer.element.receive(peer, frame)

    def push_event(self, event) -> None:
        """Send a downstream event (Eos/Flush) to the linked sink pad."""
        if isinstance(event, Eos):
            if self.eos:
                return
            self.eos = True
        peer = self.peer
        if peer is not None:
            peer.element.receive_event(peer, event)

    # -- upstream event path (sink pads only) -------------------------------

    def push_event_upstream(self, event) -> None:
        peer = self.peer
        if peer is not None:
            peer.element.handle_upstream_event(peer, event)


class Element:
    """Base class of all pipeline nodes.

    Subclasses declare ``KIND`` and a ``PROPS`` schema, build their static
    pads in ``_make_pads``, and implement ``handle_frame``.
    """

    KIND = ""
    PROPS: dict[str, Prop] = {}

    def __init__(self, name: str, props: dict | None = None,
                 ctx: PipelineContext | None = None):
        self.name = name
        self.ctx = ctx or PipelineContext()
        self.sink_pads: list[Pad] = []
        self.src_pads: list[Pad] = []
        self._stream_lock = threading.RLock()
        self._eos_sent = False
        self.props: dict[str, Any] = {}
        props = dict(props or {})
        props.pop("name", None)
        for key, spec in self.PROPS.items():
            if key in props:
                self.props[key] = _convert_prop(self.KIND, key, spec, props.pop(key))
            elif spec.required:
                raise PipelineError(f"{self.KIND}: missing required property {key!r}")
            else:
                self.props[key] = spec.default
        if props:
            known = sorted(self.PROPS)
            raise PipelineError(
                f"{self.KIND}: unknown properties {sorted(props)} (known: {known})"
            )
        self._make_pads()

    # -- construction -------------------------------------------------------

    def _make_pads(self) -> None:
        pass

    def add_sink_pad(self, name: str, templates=(ANY,)) -> Pad:
        pad = Pad(self, "sink", name, templates)
        self.sink_pads.append(pad)
        return pad

    def add_src_pad(self, name: str, templates=(ANY,)) -> Pad:
        pad = Pad(self, "src", name, templates)
        self.src_pads.append(pad)
        return pad

    def request_sink_pad(self) -> Pad:
        raise PipelineError(f"{self.KIND} has no request sink pads")

    def request_src_pad(self) -> Pad:
        raise PipelineError(f"{self.KIND} has no request src pads")

    # -- properties ----------------------------------------------------------

    def set_property(self, key: str, value) -> None:
        if key not in self.PROPS:
            raise PipelineError(f"{self.KIND}: unknown property {key!r}")
        value = _convert_prop(self.KIND, key, self.PROPS[key], value)
        with self._stream_lock:
            self.props[key] = value

    def get_property(self, key: str):
        with self._stream_lock:
            return self.props[key]

    # -- negotiation ---------------------------------------------------------

    def configure(self) -> None:
        """Derive src pad caps from negotiated sink pad caps.

        Default: single-src elements pass their (single) sink caps
        through unchanged.  Called in topological order, so every sink
        pad is already negotiated.
        """
        if self.src_pads and self.sink_pads:
            for pad in self.src_pads:
                pad.negotiated = self.sink_pads[0].negotiated

    def sink_info(self, index: int = 0) -> TensorsInfo:
        """Negotiated tensor layout of a sink pad (tensor streams only)."""
        return self.sink_pads[index].negotiated.to_info()

    # -- streaming -----------------------------------------------------------

    def receive(self, pad: Pad, frame: Frame) -> None:
        if self.ctx.stop.is_set():
            return
        with self._stream_lock:
            try:
                self.handle_frame(pad, frame)
            except TenspipeError as exc:
                self.ctx.post_error(self.name, str(exc))

    def receive_event(self, pad: Pad, event) -> None:
        with self._stream_lock:
            if isinstance(event, Eos):
                pad.eos = True
            self.handle_event(pad, event)

    def handle_frame(self, pad: Pad, frame: Frame) -> None:
        raise NotImplementedError

    def handle_event(self, pad: Pad, event) -> None:
        """Default: Eos forwards once all sink pads saw it; flushes forward."""
        if isinstance(event, Eos):
            if all(p.eos for p in self.sink_pads) and not self._eos_sent:
                self._eos_sent = True
                for sp in self.src_pads:
                    sp.push_event(EOS)
        elif isinstance(event, (FlushStart, FlushStop)):
            for sp in self.src_pads:
                sp.push_event(event)

    def handle_upstream_event(self, pad: Pad, event) -> None:
        """Default: forward upstream events toward the sources."""
        for sp in self.sink_pads:
            sp.push_event_upstream(event)

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> None:
        pass

    def stop(self) -> None:
        pass

    def reset(self) -> None:
        """Clear per-run streaming state before (re)starting."""
        self._eos_sent = False
        for pad in self.sink_pads + self.src_pads:
            pad.reset()

    def __repr__(self) -> str:
        return f"<{self.KIND} {self.name!r}>"


class SourceElement(Element):
    """Base of elements that own a driving thread and originate frames."""

    def _make_pads(self) -> None:
        self.add_src_pad("src")

    def output_caps(self) -> StreamCaps:
        raise NotImplementedError

    def configure(self) -> None:
        self.src_pads[0].negotiated = self.src_pads[0].negotiated or self.output_caps()

    def frames(self):
        """Yield frames in stream order; the runtime drives this."""
        raise NotImplementedError

    def stream_loop(self) -> None:
        """Thread body: pace (optionally), respect pause/stop, then Eos."""
        ctx = self.ctx
        try:
            for frame in self.frames():
                while not ctx.running.wait(0.05):
                    if ctx.stop.is_set():
                        return
                if ctx.stop.is_set():
                    return
                if ctx.paced:
                    due = ctx.start_wall_ns + frame.timestamp
                    delay = (due - time.monotonic_ns()) / 1e9
                    if delay > 0:
                        time.sleep(delay)
                if not frame.wall_ns:
                    frame = frame.with_wall(time.monotonic_ns())
                self.src_pads[0].push(frame)
        except TenspipeError as exc:
            ctx.post_error(self.name, str(exc))
            return
        if not ctx.stop.is_set():
            self.src_pads[0].push_event(EOS)


ELEMENT_KINDS: dict[str, type[Element]] = {}


def register_element(cls: type[Element]) -> type[Element]:
    """Class decorator adding an element kind to the global registry."""
    if not cls.KIND:
        raise ValueError(f"{cls.__name__} lacks a KIND")
    if cls.KIND in ELEMENT_KINDS:
        raise ValueError(f"element kind {cls.KIND!r} already registered")
    ELEMENT_KINDS[cls.KIND] = cls
    return cls


def make_element(kind: str, name: str, props: dict | None,
                 ctx: PipelineContext) -> Element:
    try:
        cls = ELEMENT_KINDS[kind]
    except KeyError:
        raise PipelineError(
            f"unknown element kind {kind!r} (known: {sorted(ELEMENT_KINDS)})"
        ) from None
    return cls(name, props, ctx)
