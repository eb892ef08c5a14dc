"""Generic elements: synthetic sources, sinks, queue, tee, valve, selectors."""

from __future__ import annotations

import threading
import time
from collections import deque

import numpy as np

from ..caps import RasterCaps, StreamCaps, TensorCaps
from ..dtypes import Framerate, TensorsInfo
from ..element import Element, Pad, Prop, SourceElement, register_element
from ..errors import PipelineError
from ..events import EOS, Eos, FlushStart, FlushStop
from ..frames import Chunk, Frame, make_frame


# ---------------------------------------------------------------------------
# sources

@register_element
class TensorTestSource(SourceElement):
    """Synthetic tensor frames: zero, running-byte-counter, or seeded-random
    fills."""

    KIND = "testsrc_tensor"
    PROPS = {
        "info": Prop("tensspec", required=True),
        "fill": Prop("str", default="zeros", choices=("zeros", "counter", "random")),
        "seed": Prop("int", default=0),
        "rate": Prop("fraction", default=Framerate.VARIABLE),
        "num_frames": Prop("int", default=10),
    }

    def output_caps(self) -> StreamCaps:
        info: TensorsInfo = self.props["info"]
        return TensorCaps.from_info(TensorsInfo(info.tensors, self.props["rate"]))

    def frames(self):
        info = TensorsInfo(self.props["info"].tensors, self.props["rate"])
        rate: Framerate = self.props["rate"]
        fill = self.props["fill"]
        rng = np.random.default_rng(self.props["seed"])
        counter = 0
        for k in range(self.props["num_frames"]):
            payloads = []
            for t in info.tensors:
                n = t.byte_size
                if fill == "zeros":
                    payloads.append(bytes(n))
                elif fill == "counter":
                    payloads.append(
                        (np.arange(counter, counter + n) % 256).astype(np.uint8).tobytes()
                    )
                    counter += n
                else:
                    payloads.append(rng.integers(0, 256, n, dtype=np.uint8).tobytes())
            yield make_frame(info, rate.frame_ts(k), payloads)


@register_element
class RasterTestSource(SourceElement):
    """Synthetic raster frames: packed rows, interleaved channels."""

    KIND = "testsrc_raster"
    PROPS = {
        "pattern": Prop("str", default="solid",
                        choices=("solid", "gradient", "checker")),
        "value": Prop("int", default=0),
        "width": Prop("int", required=True),
        "height": Prop("int", required=True),
        "channels": Prop("int", default=3, choices=(1, 3)),
        "rate": Prop("fraction", default=Framerate(30, 1)),
        "num_frames": Prop("int", default=10),
    }

    def output_caps(self) -> StreamCaps:
        return RasterCaps(self.props["width"], self.props["height"],
                          self.props["channels"], self.props["rate"])

    def _render(self, k: int) -> bytes:
        w, h, c = self.props["width"], self.props["height"], self.props["channels"]
        pattern = self.props["pattern"]
        if pattern == "solid":
            return bytes([self.props["value"] & 0xFF]) * (w * h * c)
        y, x = np.mgrid[0:h, 0:w]
        if pattern == "gradient":
            plane = (x + y + k) & 0xFF
        else:  # checker: 8px squares, phase advances per frame
            plane = np.where(((x // 8 + y // 8 + k) & 1) == 0, 0, 255)
        return np.repeat(plane.astype(np.uint8)[:, :, None], c, axis=2).tobytes()

    def frames(self):
        rate: Framerate = self.props["rate"]
        for k in range(self.props["num_frames"]):
            yield Frame(timestamp=rate.frame_ts(k), chunks=(Chunk(self._render(k)),))


@register_element
class FileSource(SourceElement):
    """Replays a stream container file, caps and timestamps included."""

    KIND = "filesrc"
    PROPS = {"location": Prop("str", required=True)}

    def __init__(self, name, props=None, ctx=None):
        super().__init__(name, props, ctx)
        self._caps = None
        self._frames = None

    def _load(self):
        if self._frames is None:
            from ..container import file_read
            self._caps, self._frames = file_read(self.props["location"])
        return self._caps, self._frames

    def output_caps(self) -> StreamCaps:
        caps, _ = self._load()
        return caps

    def frames(self):
        _, frames = self._load()
        yield from frames


# ---------------------------------------------------------------------------
# sinks

class SinkElement(Element):
    """Base of terminal elements: counts frames, tracks arrival latency,
    reports Eos to the pipeline."""

    def _make_pads(self) -> None:
        self.add_sink_pad("sink")

    def __init__(self, name, props=None, ctx=None):
        super().__init__(name, props, ctx)
        self.count = 0
        self.latencies_ns: list[int] = []

    def handle_frame(self, pad: Pad, frame: Frame) -> None:
        self.count += 1
        if frame.wall_ns:
            self.latencies_ns.append(time.monotonic_ns() - frame.wall_ns)
        self.consume(frame)

    def consume(self, frame: Frame) -> None:
        pass

    def handle_event(self, pad: Pad, event) -> None:
        if isinstance(event, Eos):
            self.finish()
            self.ctx.on_sink_eos(self.name)

    def finish(self) -> None:
        pass

    def reset(self) -> None:
        super().reset()
        self.count = 0
        self.latencies_ns = []


@register_element
class NullSink(SinkElement):
    """Discards frames, counting them."""

    KIND = "nullsink"


@register_element
class AppSink(SinkElement):
    """Hands frames to the host program, in push order."""

    KIND = "appsink"

    def __init__(self, name, props=None, ctx=None):
        super().__init__(name, props, ctx)
        self._cond = threading.Condition()
        self._buffer: deque[Frame] = deque()
        self.callback = None
        self.saw_eos = False

    def consume(self, frame: Frame) -> None:
        cb = self.callback
        if cb is not None:
            cb(frame)
        with self._cond:
            self._buffer.append(frame)
            self._cond.notify_all()

    def finish(self) -> None:
        with self._cond:
            self.saw_eos = True
            self._cond.notify_all()

    def poll(self, timeout: float = 5.0) -> Frame | None:
        """Next frame in order; None once the stream ended."""
        deadline = time.monotonic() + timeout
        with self._cond:
            while not self._buffer:
                if self.saw_eos:
                    return None
                left = deadline - time.monotonic()
                if left <= 0:
                    raise PipelineError(f"{self.name}: poll timed out")
                self._cond.wait(min(left, 0.05))
            return self._buffer.popleft()

    def collected(self) -> list[Frame]:
        with self._cond:
            return list(self._buffer)

    def reset(self) -> None:
        super().reset()
        self._buffer.clear()
        self.saw_eos = False


@register_element
class FileSink(SinkElement):
    """Writes the stream into a container file at end of stream."""

    KIND = "filesink"
    PROPS = {"location": Prop("str", required=True)}

    def __init__(self, name, props=None, ctx=None):
        super().__init__(name, props, ctx)
        self._frames: list[Frame] = []

    def consume(self, frame: Frame) -> None:
        self._frames.append(frame)

    def finish(self) -> None:
        from ..container import file_write
        caps = self.sink_pads[0].negotiated
        try:
            file_write(self.props["location"], caps, self._frames,
                       paced=self.ctx.paced)
        except OSError as exc:
            raise PipelineError(f"{self.name}: write failed: {exc}") from exc

    def reset(self) -> None:
        super().reset()
        self._frames = []


@register_element
class StatsSink(SinkElement):
    """Measures arrival rate per wall-clock interval plus per-frame latency."""

    KIND = "statssink"
    PROPS = {"interval": Prop("float", default=1.0)}

    def __init__(self, name, props=None, ctx=None):
        super().__init__(name, props, ctx)
        self.fps_samples: list[float] = []
        self._window_start = None
        self._window_count = 0

    def consume(self, frame: Frame) -> None:
        now = time.monotonic()
        if self._window_start is None:
            self._window_start = now
        self._window_count += 1
        span = now - self._window_start
        if span >= self.props["interval"]:
            self.fps_samples.append(self._window_count / span)
            self._window_start = now
            self._window_count = 0

    def finish(self) -> None:
        if self._window_start is not None and self._window_count:
            span = time.monotonic() - self._window_start
            if span > 0:
                self.fps_samples.append(self._window_count / span)

    def reset(self) -> None:
        super().reset()
        self.fps_samples = []
        self._window_start = None
        self._window_count = 0


# ---------------------------------------------------------------------------
# flow plumbing

@register_element
class Queue(Element):
    """Bounded FIFO decoupling the producer thread from a consumer thread.

    Policies when full: block the producer, drop the oldest queued frame
    (leaky_old), or drop the incoming frame (leaky_new).
    """

    KIND = "queue"
    PROPS = {
        "capacity": Prop("int", default=16),
        "policy": Prop("str", default="block",
                       choices=("block", "leaky_old", "leaky_new")),
    }

    def _make_pads(self) -> None:
        self.add_sink_pad("sink")
        self.add_src_pad("src")

    def __init__(self, name, props=None, ctx=None):
        super().__init__(name, props, ctx)
        if self.props["capacity"] < 1:
            raise PipelineError(f"{self.name}: capacity must be >= 1")
        self._cond = threading.Condition()
        self._buffer: deque = deque()
        self._eos_queued = False
        self._flushing = False
        self.max_occupancy = 0
        self._thread: threading.Thread | None = None

    # producer side: bypass the element streaming lock, synchronize here
    def receive(self, pad: Pad, frame: Frame) -> None:
        with self._cond:
            if self._eos_queued:
                return  # late push after end of stream: ignored
            if self._flushing:
                return
            if self.props["policy"] == "block":
                ok = self.ctx.wait_while(
                    lambda: len(self._buffer) >= self.props["capacity"]
                    and not self._flushing,
                    self._cond,
                )
                if not ok or self._flushing:
                    return
            elif len(self._buffer) >= self.props["capacity"]:
                if self.props["policy"] == "leaky_old":
                    self._buffer.popleft()
                else:  # leaky_new
                    return
            self._buffer.append(frame)
            self.max_occupancy = max(self.max_occupancy, len(self._buffer))
            self._cond.notify_all()

    def receive_event(self, pad: Pad, event) -> None:
        if isinstance(event, Eos):
            pad.eos = True
            with self._cond:
                self._eos_queued = True
                self._buffer.append(EOS)
                self._cond.notify_all()
        elif isinstance(event, FlushStart):
            with self._cond:
                self._flushing = True
                self._buffer.clear()
                self._cond.notify_all()
            self.src_pads[0].push_event(event)
        elif isinstance(event, FlushStop):
            with self._cond:
                self._flushing = False
            self.src_pads[0].push_event(event)

    # Qos jumps the queue: forward upstream immediately
    def handle_upstream_event(self, pad: Pad, event) -> None:
        self.sink_pads[0].push_event_upstream(event)

    def consumer_loop(self) -> None:
        """Thread body: pop in FIFO order and push downstream."""
        ctx = self.ctx
        while True:
            with self._cond:
                ok = self.ctx.wait_while(lambda: not self._buffer, self._cond)
                if not ok:
                    return
                item = self._buffer.popleft()
                self._cond.notify_all()
            while not ctx.running.wait(0.05):
                if ctx.stop.is_set():
                    return
            if isinstance(item, Eos):
                self.src_pads[0].push_event(EOS)
                return
            if ctx.stop.is_set():
                return
            self.src_pads[0].push(item)

    def start(self) -> None:
        self._thread = threading.Thread(
            target=self.consumer_loop, name=f"queue:{self.name}", daemon=True
        )
        self._thread.start()

    def join(self, timeout: float) -> None:
        if self._thread is not None:
            self._thread.join(timeout)

    def reset(self) -> None:
        super().reset()
        self._buffer.clear()
        self._eos_queued = False
        self._flushing = False
        self.max_occupancy = 0
        self._thread = None


@register_element
class Tee(Element):
    """Fans one stream out to every requested src pad, sharing chunks."""

    KIND = "tee"

    def _make_pads(self) -> None:
        self.add_sink_pad("sink")

    def request_src_pad(self) -> Pad:
        return self.add_src_pad(f"src_{len(self.src_pads)}")

    def configure(self) -> None:
        for pad in self.src_pads:
            pad.negotiated = self.sink_pads[0].negotiated

    def handle_frame(self, pad: Pad, frame: Frame) -> None:
        for sp in self.src_pads:
            sp.push(frame)


@register_element
class Valve(Element):
    """Passes or drops whole frames based on the live ``drop`` property."""

    KIND = "valve"
    PROPS = {"drop": Prop("bool", default=False)}

    def _make_pads(self) -> None:
        self.add_sink_pad("sink")
        self.add_src_pad("src")

    def handle_frame(self, pad: Pad, frame: Frame) -> None:
        if not self.props["drop"]:
            self.src_pads[0].push(frame)


@register_element
class InputSelector(Element):
    """Forwards frames from the active sink pad only."""

    KIND = "input_selector"
    PROPS = {"active": Prop("int", default=0)}

    def _make_pads(self) -> None:
        self.add_src_pad("src")

    def request_sink_pad(self) -> Pad:
        return self.add_sink_pad(f"sink_{len(self.sink_pads)}")

    def configure(self) -> None:
        active = self.props["active"]
        if not (0 <= active < len(self.sink_pads)):
            raise PipelineError(f"{self.name}: active pad {active} out of range")
        self.src_pads[0].negotiated = self.sink_pads[active].negotiated

    def handle_frame(self, pad: Pad, frame: Frame) -> None:
        if pad is self.sink_pads[self.props["active"]]:
            self.src_pads[0].push(frame)


@register_element
class OutputSelector(Element):
    """Routes every frame to the active src pad only."""

    KIND = "output_selector"
    PROPS = {"active": Prop("int", default=0)}

    def _make_pads(self) -> None:
        self.add_sink_pad("sink")

    def request_src_pad(self) -> Pad:
        return self.add_src_pad(f"src_{len(self.src_pads)}")

    def configure(self) -> None:
        if not (0 <= self.props["active"] < len(self.src_pads)):
            raise PipelineError(
                f"{self.name}: active pad {self.props['active']} out of range"
            )
        for pad in self.src_pads:
            pad.negotiated = self.sink_pads[0].negotiated

    def handle_frame(self, pad: Pad, frame: Frame) -> None:
        self.src_pads[self.props["active"]].push(frame)


@register_element
class Identity(Element):
    """Passes frames through unchanged."""

    KIND = "identity"

    def _make_pads(self) -> None:
        self.add_sink_pad("sink")
        self.add_src_pad("src")

    def handle_frame(self, pad: Pad, frame: Frame) -> None:
        self.src_pads[0].push(frame)
