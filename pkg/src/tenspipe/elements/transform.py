"""Elementwise tensor operators: arithmetic chains, typecasts, transpose,
per-frame normalization.

Arithmetic runs in float64 and casts back to the input type (or to the
type named by a trailing ``cast:`` step) using the typecast rule: clamp
to the representable range, then round toward zero for integer targets.
Chunk memory order puts axis 0 innermost, so a dimension ``(d0,d1,d2,d3)``
maps onto a C-ordered numpy array of shape ``(d3,d2,d1,d0)``.
"""

from __future__ import annotations

import math

import numpy as np

from .. import kernels
from ..caps import TensorCaps, TensorPattern
from ..dtypes import ElementType, TensorDim, TensorInfo, TensorsInfo
from ..element import Element, Pad, Prop, register_element
from ..errors import PipelineError
from ..frames import Chunk, Frame

_OP_CODES = {"add": kernels.OP_ADD, "sub": kernels.OP_SUB,
             "mul": kernels.OP_MUL, "div": kernels.OP_DIV}


def clamp_bounds(etype: ElementType) -> tuple[float, float, bool]:
    """(lo, hi, is_integer) clamp range of a cast target, with both bounds
    exactly representable in float64."""
    if etype == ElementType.FLOAT64:
        return (-math.inf, math.inf, False)
    if etype == ElementType.FLOAT32:
        fi = np.finfo(np.float32)
        return (float(fi.min), float(fi.max), False)
    ii = np.iinfo(etype.np_dtype)
    hi = float(ii.max)
    if hi > ii.max:  # float64 rounded 2**63-1 / 2**64-1 upward
        hi = float(np.nextafter(hi, 0.0))
    return (float(ii.min), hi, True)


def cast_values(x: np.ndarray, target: ElementType) -> np.ndarray:
    """Typecast rule on a float64 buffer (mutates it): clamp, then truncate
    toward zero for integer targets."""
    lo, hi, to_int = clamp_bounds(target)
    kernels.clamp_trunc(x, lo, hi, to_int)
    return x.astype(target.np_dtype)


def np_view(arr: np.ndarray, dim: TensorDim) -> np.ndarray:
    """Reshape a flat array to the C-ordered view (axis 0 innermost)."""
    d = dim.d
    return arr.reshape(d[3], d[2], d[1], d[0])


@register_element
class TensorTransform(Element):
    """Applies one operator (or operator chain) to every tensor of a frame."""

    KIND = "tensor_transform"
    PROPS = {
        "mode": Prop("str", required=True,
                     choices=("arith", "typecast", "transpose", "normalize")),
        "option": Prop("str", required=True),
    }

    def _make_pads(self) -> None:
        self.add_sink_pad("sink", templates=(TensorCaps(),))
        self.add_src_pad("src")

    def __init__(self, name, props=None, ctx=None):
        super().__init__(name, props, ctx)
        mode, option = self.props["mode"], self.props["option"]
        self._ops: list[tuple[int, float]] = []
        self._cast_to: ElementType | None = None
        self._perm: tuple[int, ...] | None = None
        self._norm: str | None = None
        if mode == "arith":
            steps = option.split(",")
            for pos, step in enumerate(steps):
                op, sep, val = step.partition(":")
                if not sep:
                    raise PipelineError(f"{name}: bad arith step {step!r}")
                if op == "cast":
                    if pos != len(steps) - 1:
                        raise PipelineError(f"{name}: cast must be the last step")
                    self._cast_to = ElementType.parse(val)
                    continue
                if op not in _OP_CODES:
                    raise PipelineError(f"{name}: unknown arith op {op!r}")
                scalar = float(val)
                if op == "div" and scalar == 0.0:
                    raise PipelineError(f"{name}: division by zero scalar")
                self._ops.append((_OP_CODES[op], scalar))
        elif mode == "typecast":
            self._cast_to = ElementType.parse(option)
        elif mode == "transpose":
            perm = tuple(int(p) for p in option.split(":"))
            if sorted(perm) != [0, 1, 2, 3]:
                raise PipelineError(
                    f"{name}: transpose option must permute 0:1:2:3, got {option!r}"
                )
            self._perm = perm
        else:
            if option not in ("minmax", "standardize"):
                raise PipelineError(f"{name}: unknown normalize mode {option!r}")
            self._norm = option

    def _out_info(self, info: TensorsInfo) -> TensorsInfo:
        mode = self.props["mode"]
        tensors = []
        for t in info.tensors:
            etype, dim = t.etype, t.dim
            if mode in ("arith", "typecast"):
                etype = self._cast_to if self._cast_to is not None else etype
            elif mode == "normalize":
                etype = ElementType.FLOAT32
            else:  # transpose
                if len(info) != 1:
                    raise PipelineError(
                        f"{self.name}: transpose needs a single-tensor stream"
                    )
                dim = TensorDim(tuple(t.dim.d[p] for p in self._perm))
            tensors.append(TensorInfo(etype, dim))
        return TensorsInfo(tuple(tensors), info.rate)

    def configure(self) -> None:
        info = self.sink_info()
        out = self._out_info(info)
        self.src_pads[0].negotiated = TensorCaps.from_info(
            out, multi=self.sink_pads[0].negotiated.multi
        )

    def handle_frame(self, pad: Pad, frame: Frame) -> None:
        info = self.sink_info()
        out_info = self.src_pads[0].negotiated.to_info()
        mode = self.props["mode"]
        chunks = []
        for i, t in enumerate(info.tensors):
            arr = frame.array(info, i)
            if mode == "transpose":
                view = np_view(arr, t.dim)
                np_axes = tuple(3 - self._perm[3 - j] for j in range(4))
                out = np.ascontiguousarray(view.transpose(np_axes))
                chunks.append(Chunk(out.tobytes()))
            elif mode == "normalize":
                x = arr.astype(np.float64)
                fn = kernels.minmax if self._norm == "minmax" else kernels.standardize
                chunks.append(Chunk(fn(x).tobytes()))
            else:
                x = arr.astype(np.float64)
                if self._ops:
                    codes = np.array([c for c, _ in self._ops], dtype=np.int32)
                    vals = np.array([v for _, v in self._ops], dtype=np.float64)
                    kernels.arith_chain(x, codes, vals)
                chunks.append(Chunk(cast_values(x, out_info[i].etype).tobytes()))
            self.ctx.copies.add(1)
        self.src_pads[0].push(frame.with_chunks(tuple(chunks)))
