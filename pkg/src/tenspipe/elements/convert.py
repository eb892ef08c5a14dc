"""Media-to-tensor conversion and tensor-to-text decoding.

Raster frames convert without copying: packed rows with interleaved
channels are byte-identical to a channels-first tensor (C:W:H:1) whose
axis 0 is innermost.  Text pads or truncates to a fixed byte length;
binary adopts caller-declared caps and must match sizes exactly.
"""

from __future__ import annotations

import numpy as np

from ..caps import BinaryCaps, RasterCaps, TensorCaps, TextCaps
from ..dtypes import ElementType, Framerate, TensorDim, TensorInfo, TensorsInfo
from ..element import Element, Pad, Prop, register_element
from ..errors import PipelineError
from ..frames import Chunk, Frame


@register_element
class TensorConverter(Element):
    """Converts raster, text, or binary media streams to tensor streams."""

    KIND = "tensor_converter"
    PROPS = {
        "input_size": Prop("int", default=0),     # text: padded byte length
        "output": Prop("tensspec", default=None),  # binary: declared layout
    }

    def _make_pads(self) -> None:
        self.add_sink_pad("sink", templates=(RasterCaps(), TextCaps(), BinaryCaps()))
        self.add_src_pad("src")

    def configure(self) -> None:
        caps = self.sink_pads[0].negotiated
        if isinstance(caps, RasterCaps):
            dim = TensorDim.of(caps.channels, caps.width, caps.height, 1)
            info = TensorsInfo.single(ElementType.UINT8, dim, caps.rate)
        elif isinstance(caps, TextCaps):
            size = self.props["input_size"]
            if size <= 0:
                raise PipelineError(
                    f"{self.name}: text input needs input_size > 0"
                )
            info = TensorsInfo.single(ElementType.UINT8, TensorDim.of(size))
        else:  # binary
            declared = self.props["output"]
            if declared is None:
                raise PipelineError(
                    f"{self.name}: binary input needs declared output caps"
                )
            info = declared
        self.src_pads[0].negotiated = TensorCaps.from_info(info, multi=len(info) > 1)

    def handle_frame(self, pad: Pad, frame: Frame) -> None:
        caps = self.sink_pads[0].negotiated
        out_info = self.src_pads[0].negotiated.to_info()
        if isinstance(caps, RasterCaps):
            chunks = frame.chunks  # identical memory layout, no copy
        elif isinstance(caps, TextCaps):
            size = self.props["input_size"]
            data = frame.chunks[0].tobytes()
            if len(data) == size:
                chunks = frame.chunks
            else:
                chunks = (Chunk(data[:size].ljust(size, b"\x00")),)
                self.ctx.copies.add(1)
        else:
            want = out_info.frame_byte_size
            got = len(frame.chunks[0])
            if got != want:
                raise PipelineError(
                    f"{self.name}: binary frame of {got} bytes does not match "
                    f"declared caps ({want} bytes)"
                )
            chunks = frame.chunks
        self.src_pads[0].push(frame.with_chunks(chunks))


@register_element
class TensorDecoder(Element):
    """Decodes tensor streams to text with a selectable decoding mode."""

    KIND = "tensor_decoder"
    PROPS = {
        "mode": Prop("str", required=True, choices=("label", "raw_text")),
        "labels": Prop("str", default=None),
    }

    def _make_pads(self) -> None:
        self.add_sink_pad("sink", templates=(TensorCaps(),))
        self.add_src_pad("src")

    def __init__(self, name, props=None, ctx=None):
        super().__init__(name, props, ctx)
        self._labels: list[str] | None = None

    def configure(self) -> None:
        if self.props["mode"] == "label":
            path = self.props["labels"]
            if not path:
                raise PipelineError(f"{self.name}: label mode needs a labels file")
            try:
                with open(path, encoding="utf-8") as fh:
                    self._labels = [line.rstrip("\n") for line in fh if line.strip()]
            except OSError as exc:
                raise PipelineError(f"{self.name}: cannot read labels: {exc}") from exc
            if not self._labels:
                raise PipelineError(f"{self.name}: labels file {path!r} is empty")
        self.src_pads[0].negotiated = TextCaps()

    def handle_frame(self, pad: Pad, frame: Frame) -> None:
        info = self.sink_info()
        values = frame.array(info, 0)
        if self.props["mode"] == "label":
            idx = int(np.argmax(values))  # ties resolve to the lowest index
            if idx >= len(self._labels):
                raise PipelineError(
                    f"{self.name}: argmax index {idx} outside the "
                    f"{len(self._labels)}-entry label list"
                )
            text = self._labels[idx]
        else:
            if info[0].etype.is_integer:
                text = ",".join(str(int(v)) for v in values)
            else:
                text = ",".join(repr(float(v)) for v in values)
        self.ctx.copies.add(1)
        self.src_pads[0].push(frame.with_chunks((Chunk(text.encode("utf-8")),)))
