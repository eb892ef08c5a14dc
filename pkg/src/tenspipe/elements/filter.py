"""The tensor_filter element: runs a registered inference backend per frame."""

from __future__ import annotations

import numpy as np

from ..backends import check_output_sizes, get_backend
from ..caps import TensorCaps, TensorPattern
from ..dtypes import TensorsInfo
from ..element import Element, Pad, Prop, register_element
from ..errors import BackendError, PipelineError
from ..frames import Chunk, Frame


@register_element
class TensorFilter(Element):
    """Invokes ``framework``'s backend on every frame.

    The negotiated input must equal the backend's declared input layout
    (after rank padding); pass-through backends adopt the upstream layout.
    """

    KIND = "tensor_filter"
    PROPS = {
        "framework": Prop("str", required=True),
        "model": Prop("str", default=None),
        "busy_ms": Prop("float", default=0.0),
    }

    def _make_pads(self) -> None:
        self.add_sink_pad("sink", templates=(TensorCaps(),))
        self.add_src_pad("src")

    def __init__(self, name, props=None, ctx=None):
        super().__init__(name, props, ctx)
        try:
            self.backend = get_backend(self.props["framework"])
            self.state = self.backend.open(dict(self.props))
        except BackendError as exc:
            raise PipelineError(f"{name}: {exc}") from exc
        declared = self.backend.input_info(self.state)
        if declared is not None:
            self.sink_pads[0].templates = (
                TensorCaps(
                    multi=None,
                    count=len(declared),
                    patterns=tuple(
                        TensorPattern.fixed(t.etype, t.dim) for t in declared.tensors
                    ),
                    rate=None,
                ),
            )

    def configure(self) -> None:
        info = self.sink_info()
        declared = self.backend.input_info(self.state)
        if declared is not None:
            same = len(info) == len(declared) and all(
                a.etype == b.etype and a.dim == b.dim
                for a, b in zip(info.tensors, declared.tensors)
            )
            if not same:
                raise PipelineError(
                    f"{self.name}: input caps do not match backend "
                    f"{self.backend.name!r} (negotiated "
                    f"{self.sink_pads[0].negotiated.render()})"
                )
        out_info = self.backend.output_info(self.state) or info
        out_info = TensorsInfo(out_info.tensors, info.rate)
        self.src_pads[0].negotiated = TensorCaps.from_info(
            out_info, multi=len(out_info) > 1
        )

    def handle_frame(self, pad: Pad, frame: Frame) -> None:
        info = self.sink_info()
        out_info = self.src_pads[0].negotiated.to_info()
        arrays = [frame.array(info, i) for i in range(len(info))]
        try:
            outs = self.backend.invoke(self.state, arrays, info)
            check_output_sizes(outs, out_info)
        except BackendError as exc:
            raise PipelineError(
                f"{self.name}: backend {self.backend.name!r} failed: {exc}"
            ) from exc
        chunks = []
        for out in outs:
            reused = None
            for j, src in enumerate(arrays):
                if out is src:
                    reused = frame.chunks[j]
                    break
            if reused is not None:
                chunks.append(reused)
            else:
                data = out.tobytes() if isinstance(out, np.ndarray) else bytes(out)
                chunks.append(Chunk(data))
                self.ctx.copies.add(1)
        self.src_pads[0].push(frame.with_chunks(tuple(chunks)))

    def stop(self) -> None:
        self.backend.close(self.state)
