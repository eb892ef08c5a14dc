"""Shared test helpers: standalone element harness and model builders."""

from __future__ import annotations

import numpy as np
import pytest

from tenspipe.caps import StreamCaps
from tenspipe.element import Element, Pad, PipelineContext
from tenspipe.events import EOS
from tenspipe.frames import Frame


class Capture(Element):
    """Unregistered stub that records everything pushed into it."""

    KIND = "capture"

    def _make_pads(self) -> None:
        self.add_sink_pad("sink")

    def __init__(self, name="cap", ctx=None):
        super().__init__(name, None, ctx)
        self.frames: list[Frame] = []
        self.events: list = []

    def handle_frame(self, pad: Pad, frame: Frame) -> None:
        self.frames.append(frame)

    def handle_event(self, pad, event) -> None:
        self.events.append(event)


def wire(element: Element, sink_caps: list[StreamCaps]) -> list[Capture]:
    """Negotiate a standalone element: set sink caps, attach captures to
    src pads (requesting none), run configure. Returns the captures."""
    assert len(sink_caps) == len(element.sink_pads), "sink pad count mismatch"
    for pad, caps in zip(element.sink_pads, sink_caps):
        pad.negotiated = caps
        up = Capture(f"up_{pad.name}", ctx=element.ctx)  # placeholder peer
        fake_src = up.add_src_pad("src")
        fake_src.negotiated = caps
        pad.peer = fake_src
        fake_src.peer = pad
    element.configure()
    captures = []
    for pad in element.src_pads:
        cap = Capture(f"cap_{pad.name}", ctx=element.ctx)
        pad.peer = cap.sink_pads[0]
        cap.sink_pads[0].peer = pad
        captures.append(cap)
    return captures


def wire_requesting(element: Element, sink_caps: list[StreamCaps],
                    n_src: int) -> list[Capture]:
    """Like wire(), for elements with request pads on either side."""
    while len(element.sink_pads) < len(sink_caps):
        element.request_sink_pad()
    for _ in range(n_src):
        element.request_src_pad()
    return wire(element, sink_caps)


def push(element: Element, frames, pad_index: int = 0, eos: bool = True) -> None:
    pad = element.sink_pads[pad_index]
    for frame in frames:
        element.receive(pad, frame)
    if eos:
        element.receive_event(pad, EOS)


@pytest.fixture
def ctx():
    c = PipelineContext()
    c.running.set()
    return c


def values(frame: Frame, info, index: int = 0) -> np.ndarray:
    return frame.array(info, index)
