"""Pipeline lifecycle and the multi-threaded scheduler.

Thread count is sources + queues: each source element owns a driving
thread and each queue owns one consumer thread; everything between queue
boundaries runs synchronously on the pushing thread.  Unpaced runs use
synthetic timestamps only, so results are identical across runs and
thread interleavings.
"""

from __future__ import annotations

import enum
import threading
import time
from dataclasses import dataclass, field

from .element import Element, PipelineContext, SourceElement
from .elements.basic import Queue, SinkElement
from .errors import PipelineError
from .events import FLUSH_START, FLUSH_STOP
from .graph import BuiltGraph, export_dot
from .parse import GraphSpec, parse_pipeline


class State(enum.Enum):
    NULL = "null"
    READY = "ready"
    PLAYING = "playing"
    EOS = "eos"
    ERROR = "error"


@dataclass
class RunReport:
    """Outcome of one pipeline run."""

    state: State
    frames_per_sink: dict[str, int]
    elapsed_s: float
    payload_copies: int
    queue_occupancy: dict[str, int]
    error: str | None = None
    progress: dict[str, int] = field(default_factory=dict)
    sinks: dict[str, "SinkElement"] = field(default_factory=dict, repr=False)

    @property
    def ok(self) -> bool:
        return self.state is State.EOS


class Pipeline:
    """A built pipeline; owns its elements, threads, and shared context."""

    def __init__(self, description: str | GraphSpec, paced: bool = False):
        self.ctx = PipelineContext()
        self.ctx.paced = paced
        spec = (parse_pipeline(description)
                if isinstance(description, str) else description)
        self.graph = BuiltGraph(spec, self.ctx)
        self.state = State.NULL
        self._threads: list[threading.Thread] = []
        self._started: set[str] = set()
        self._eos_lock = threading.Lock()
        self._eos_sinks: set[str] = set()
        self._all_eos = threading.Event()
        self._play_started = 0.0
        self.ctx.on_sink_eos = self._sink_eos

    # -- accessors -----------------------------------------------------------

    @property
    def elements(self) -> dict[str, Element]:
        return self.graph.elements

    def element(self, name: str) -> Element:
        return self.graph.elements[name]

    def _sink_names(self) -> set[str]:
        return {n for n, el in self.elements.items() if not el.src_pads}

    def _sink_eos(self, name: str) -> None:
        with self._eos_lock:
            self._eos_sinks.add(name)
            if self._eos_sinks >= self._sink_names():
                self._all_eos.set()

    # -- topology edits (allowed while not PLAYING) ---------------------------

    def add_element(self, kind: str, name: str, props: dict | None = None) -> Element:
        if self.state is State.PLAYING:
            raise PipelineError("topology edits require a non-playing pipeline")
        if name in self.elements:
            raise PipelineError(f"duplicate element name {name!r}")
        from .element import make_element
        from .parse import NodeSpec
        el = make_element(kind, name, props, self.ctx)
        self.elements[name] = el
        self.graph.spec.nodes[name] = NodeSpec(kind, name,
                                               {k: str(v) for k, v in (props or {}).items()})
        return el

    def link(self, src: str, dst: str, src_pad: str | None = None,
             dst_pad: str | None = None) -> None:
        if self.state is State.PLAYING:
            raise PipelineError("topology edits require a non-playing pipeline")
        from .parse import LinkSpec
        sp = self.graph._resolve_pad(self.elements[src], "src", src_pad)
        dp = self.graph._resolve_pad(self.elements[dst], "sink", dst_pad)
        for pad in (sp, dp):
            if pad.peer is not None:
                raise PipelineError(f"pad {pad.full_name} is linked twice")
        sp.peer = dp
        dp.peer = sp
        self.graph.links.append((sp, dp))
        self.graph.spec.links.append(LinkSpec(src, sp.name, dst, dp.name))

    # -- state machine ---------------------------------------------------------

    def set_state(self, target: State) -> State:
        order = [State.NULL, State.READY, State.PLAYING]
        if target is State.PLAYING and self.state is State.NULL:
            self.set_state(State.READY)
        if (self.state, target) == (State.NULL, State.READY):
            self.ctx.stop.clear()
            self.ctx.running.clear()
            self.ctx.copies.reset()
            self._eos_sinks.clear()
            self._all_eos.clear()
            for slot in self.ctx.repo_slots.values():
                slot.reset()
            for el in self.elements.values():
                el.reset()
            self.graph.validate()
            self.graph.negotiate()
            self.state = State.READY
        elif (self.state, target) == (State.READY, State.PLAYING):
            self.graph.validate()
            self.graph.negotiate(only_unset=True)
            self.ctx.start_wall_ns = time.monotonic_ns()
            self._play_started = time.perf_counter()
            for name, el in self.elements.items():
                if name in self._started:
                    continue
                el.start()
                if isinstance(el, SourceElement):
                    t = threading.Thread(target=el.stream_loop,
                                         name=f"src:{name}", daemon=True)
                    t.start()
                    self._threads.append(t)
                self._started.add(name)
            self.ctx.running.set()
            self.state = State.PLAYING
        elif (self.state, target) == (State.PLAYING, State.READY):
            self.ctx.running.clear()
            time.sleep(0.05)  # let synchronous pushes drain to queue boundaries
            self.state = State.READY
        elif target is State.NULL:
            self._shutdown()
            self.state = State.NULL
        elif self.state is target:
            pass
        else:
            raise PipelineError(
                f"illegal state transition {self.state.value} -> {target.value}"
            )
        return self.state

    def _shutdown(self) -> None:
        self.ctx.stop.set()
        self.ctx.running.set()
        for el in self.elements.values():
            if isinstance(el, SourceElement) and el.src_pads:
                try:
                    el.src_pads[0].push_event(FLUSH_START)
                    el.src_pads[0].push_event(FLUSH_STOP)
                except PipelineError:
                    pass
        for t in self._threads:
            t.join(2.0)
        for el in self.elements.values():
            if isinstance(el, Queue):
                el.join(2.0)
            el.stop()
        self._threads.clear()
        self._started.clear()
        for el in self.elements.values():
            for pad in el.sink_pads + el.src_pads:
                pad.negotiated = None

    # -- running -----------------------------------------------------------------

    def run_until_eos(self, timeout: float | None = 30.0) -> RunReport:
        """Play until every sink reports end of stream (or failure/timeout)."""
        self.set_state(State.PLAYING)
        deadline = None if timeout is None else time.perf_counter() + timeout
        while not self._all_eos.is_set() and not self.ctx.stop.is_set():
            if deadline is not None and time.perf_counter() > deadline:
                starved = self._progress_snapshot()
                least = sorted(starved.items(), key=lambda kv: kv[1])[:3]
                self.ctx.post_error(
                    "pipeline",
                    f"timeout after {timeout}s; least-progressed pads: "
                    + ", ".join(f"{n}={c}" for n, c in least),
                )
                break
            self._all_eos.wait(0.02)
        elapsed = time.perf_counter() - self._play_started
        error = self.ctx.error
        if self._all_eos.is_set() and error is None:
            self.state = State.EOS
        else:
            self.state = State.ERROR
            self.ctx.stop.set()
            self.ctx.running.set()
        for t in self._threads:
            t.join(2.0)
        for el in self.elements.values():
            if isinstance(el, Queue):
                el.join(2.0)
        report = RunReport(
            state=self.state,
            frames_per_sink={
                n: el.count for n, el in self.elements.items()
                if isinstance(el, SinkElement)
            },
            elapsed_s=elapsed,
            payload_copies=self.ctx.copies.value,
            queue_occupancy={
                n: el.max_occupancy for n, el in self.elements.items()
                if isinstance(el, Queue)
            },
            error=None if error is None else f"{error[0]}: {error[1]}",
            progress=self._progress_snapshot(),
            sinks={n: el for n, el in self.elements.items()
                   if isinstance(el, SinkElement)},
        )
        return report

    def _progress_snapshot(self) -> dict[str, int]:
        return {
            pad.full_name: pad.frames_seen
            for el in self.elements.values()
            for pad in el.sink_pads + el.src_pads
        }

    def export_dot(self) -> str:
        return export_dot(self.graph)


def run_pipeline(description: str, timeout: float | None = 30.0,
                 paced: bool = False) -> RunReport:
    """Parse, validate, run to end of stream, and tear down."""
    pipe = Pipeline(description, paced=paced)
    try:
        return pipe.run_until_eos(timeout=timeout)
    finally:
        pipe.set_state(State.NULL)
