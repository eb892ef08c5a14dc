"""Inference backends behind the tensor_filter element.

A backend declares the tensor layout it consumes and produces and runs
one frame at a time.  Backends register under a framework name; the
``single_*`` functions invoke a backend directly, with no pipeline, and
produce bitwise the same outputs as a one-filter pipeline would.

Built-ins: ``toy_dense`` (dense-layer model file), ``custom_fn``
(host-registered functions), ``delay`` (busy compute stub), and
``identity``.
"""

from __future__ import annotations

import struct
import threading
from dataclasses import dataclass

import numpy as np

from . import kernels
from .dtypes import ElementType, TensorDim, TensorInfo, TensorsInfo
from .errors import BackendError
from .frames import Chunk

DENSE_MAGIC = b"TDNSE1\x00\x00"

_ACT_NAMES = {"none": 0, "relu": 1, "sigmoid": 2}


class FilterBackend:
    """Interface of a tensor_filter sub-plugin."""

    name = ""
    #: whether the backend wants dimension rank metadata forwarded
    rank_sensitive = False

    def open(self, props: dict) -> object:
        """Load per-instance state from element properties (model path...)."""
        return None

    def close(self, state) -> None:
        pass

    def input_info(self, state) -> TensorsInfo | None:
        """Declared input layout, or None to adopt the upstream layout."""
        return None

    def output_info(self, state) -> TensorsInfo | None:
        """Declared output layout, or None when it equals the input."""
        return None

    def invoke(self, state, arrays: list[np.ndarray],
               info: TensorsInfo) -> list:
        """Run one frame. ``arrays`` are flat read-only per-tensor views;
        returns one buffer (ndarray or bytes) per output tensor."""
        raise NotImplementedError


_REGISTRY: dict[str, FilterBackend] = {}
_registry_lock = threading.Lock()


def register_backend(backend: FilterBackend) -> None:
    """Add a backend under its framework name; duplicate names are errors."""
    if not backend.name:
        raise BackendError("backend needs a name")
    with _registry_lock:
        if backend.name in _REGISTRY:
            raise BackendError(f"backend {backend.name!r} already registered")
        _REGISTRY[backend.name] = backend


def get_backend(name: str) -> FilterBackend:
    with _registry_lock:
        try:
            return _REGISTRY[name]
        except KeyError:
            raise BackendError(
                f"unknown framework {name!r} (registered: {sorted(_REGISTRY)})"
            ) from None


def registered_backends() -> list[str]:
    with _registry_lock:
        return sorted(_REGISTRY)


# ---------------------------------------------------------------------------
# dense-layer model file

@dataclass
class DenseLayer:
    w: np.ndarray          # float32, (out, in), row-major
    b: np.ndarray          # float32, (out,)
    activation: int        # 0 none, 1 relu, 2 sigmoid


def save_dense_model(path: str, layers: list[tuple]) -> None:
    """Write a dense model file.

    Each layer is (W, b, activation) with W an (out, in) array-like and
    activation one of none/relu/sigmoid (name or code).
    """
    blobs = [DENSE_MAGIC, struct.pack("<I", len(layers))]
    for w, b, act in layers:
        w = np.ascontiguousarray(w, dtype=np.float32)
        b = np.ascontiguousarray(b, dtype=np.float32)
        if isinstance(act, str):
            act = _ACT_NAMES[act]
        out_dim, in_dim = w.shape
        if b.shape != (out_dim,):
            raise BackendError(f"bias shape {b.shape} does not match W {w.shape}")
        blobs.append(struct.pack("<IIB3x", in_dim, out_dim, act))
        blobs.append(w.tobytes())
        blobs.append(b.tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(blobs))


def load_dense_model(path: str) -> list[DenseLayer]:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise BackendError(f"cannot read model {path!r}: {exc}") from exc
    if blob[:8] != DENSE_MAGIC:
        raise BackendError(f"model {path!r}: magic mismatch")
    try:
        (count,) = struct.unpack_from("<I", blob, 8)
        offset = 12
        layers = []
        for _ in range(count):
            in_dim, out_dim, act = struct.unpack_from("<IIB3x", blob, offset)
            offset += 12
            w = np.frombuffer(blob, "<f4", in_dim * out_dim, offset)
            offset += in_dim * out_dim * 4
            b = np.frombuffer(blob, "<f4", out_dim, offset)
            offset += out_dim * 4
            layers.append(DenseLayer(w.reshape(out_dim, in_dim), b, act))
    except (struct.error, ValueError) as exc:
        raise BackendError(f"model {path!r}: truncated or corrupt: {exc}") from exc
    if not layers:
        raise BackendError(f"model {path!r}: no layers")
    for a, b_ in zip(layers, layers[1:]):
        if a.w.shape[0] != b_.w.shape[1]:
            raise BackendError(
                f"model {path!r}: layer widths do not chain "
                f"({a.w.shape[0]} -> {b_.w.shape[1]})"
            )
    return layers


class ToyDenseBackend(FilterBackend):
    """Runs a chain of float32 dense layers over the flattened axis 0."""

    name = "toy_dense"

    def open(self, props: dict):
        model = props.get("model")
        if not model:
            raise BackendError("toy_dense needs a model file")
        return load_dense_model(model)

    def input_info(self, state) -> TensorsInfo:
        return TensorsInfo.single(ElementType.FLOAT32,
                                  TensorDim.of(state[0].w.shape[1]))

    def output_info(self, state) -> TensorsInfo:
        return TensorsInfo.single(ElementType.FLOAT32,
                                  TensorDim.of(state[-1].w.shape[0]))

    def invoke(self, state, arrays, info):
        x = np.ascontiguousarray(arrays[0], dtype=np.float32)
        for layer in state:
            x = kernels.dense_forward(layer.w, layer.b, x, layer.activation)
        return [x]


class CustomFnBackend(FilterBackend):
    """Dispatches to host functions registered with register_custom_fn."""

    name = "custom_fn"

    def __init__(self):
        self._fns: dict[str, tuple] = {}

    def add(self, fn_name: str, fn, input_info=None, output_info=None):
        if fn_name in self._fns:
            raise BackendError(f"custom fn {fn_name!r} already registered")
        self._fns[fn_name] = (fn, input_info, output_info)

    def open(self, props: dict):
        fn_name = props.get("model")
        if fn_name not in self._fns:
            raise BackendError(
                f"unknown custom fn {fn_name!r} (registered: {sorted(self._fns)})"
            )
        return self._fns[fn_name]

    def input_info(self, state):
        return state[1]

    def output_info(self, state):
        return state[2]

    def invoke(self, state, arrays, info):
        return state[0](arrays, info)


class DelayBackend(FilterBackend):
    """Pass-through that burns ``busy_ms`` of compute per frame."""

    name = "delay"

    def open(self, props: dict):
        return float(props.get("busy_ms") or 0.0)

    def invoke(self, state, arrays, info):
        if state > 0:
            kernels.busy_wait_ns(int(state * 1e6))
        return list(arrays)


class IdentityBackend(FilterBackend):
    """Pass-through; output payloads are the input payloads."""

    name = "identity"

    def invoke(self, state, arrays, info):
        return list(arrays)


_custom_fns = CustomFnBackend()


def register_custom_fn(fn_name: str, fn, input_info: TensorsInfo | None = None,
                       output_info: TensorsInfo | None = None) -> None:
    """Expose a host function as ``tensor_filter framework=custom_fn
    model=<fn_name>``.  ``fn(arrays, info)`` returns output buffers; omitted
    layouts adopt the upstream stream layout (pass-through shapes)."""
    _custom_fns.add(fn_name, fn, input_info, output_info)


register_backend(ToyDenseBackend())
register_backend(_custom_fns)
register_backend(DelayBackend())
register_backend(IdentityBackend())


# ---------------------------------------------------------------------------
# single-shot API

def check_output_sizes(outs, out_info: TensorsInfo) -> None:
    """Backend outputs must match the declared layout in count and bytes."""
    if len(outs) != len(out_info):
        raise BackendError(
            f"backend produced {len(outs)} outputs, expected {len(out_info)}"
        )
    for i, out in enumerate(outs):
        got = out.nbytes if isinstance(out, np.ndarray) else len(out)
        want = out_info[i].byte_size
        if got != want:
            raise BackendError(f"output {i} has {got} bytes, expected {want}")


class SingleHandle:
    """Open backend instance for pipeline-free invocation."""

    def __init__(self, framework: str, model: str | None = None, **props):
        self.backend = get_backend(framework)
        props = dict(props)
        if model is not None:
            props["model"] = model
        self.state = self.backend.open(props)
        self.closed = False

    def input_info(self) -> TensorsInfo | None:
        return self.backend.input_info(self.state)

    def output_info(self) -> TensorsInfo | None:
        return self.backend.output_info(self.state)

    def invoke(self, inputs) -> list[bytes]:
        if self.closed:
            raise BackendError("invoke on a closed handle")
        in_info = self.backend.input_info(self.state)
        if in_info is None:
            in_info = _infer_info(inputs)
        arrays = []
        for buf, t in zip(inputs, in_info.tensors):
            if isinstance(buf, np.ndarray):
                arr = np.ascontiguousarray(buf).reshape(-1)
            else:
                arr = Chunk(buf).as_array(t.etype.np_dtype, t.dim.count)
            if arr.nbytes != t.byte_size:
                raise BackendError(
                    f"input has {arr.nbytes} bytes, expected {t.byte_size}"
                )
            arrays.append(arr)
        if len(arrays) != len(in_info):
            raise BackendError(
                f"got {len(arrays)} inputs, expected {len(in_info)}"
            )
        out_info = self.backend.output_info(self.state) or in_info
        outs = self.backend.invoke(self.state, arrays, in_info)
        check_output_sizes(outs, out_info)
        return [o.tobytes() if isinstance(o, np.ndarray) else bytes(o)
                for o in outs]

    def close(self) -> None:
        if not self.closed:
            self.backend.close(self.state)
            self.closed = True


def _infer_info(inputs) -> TensorsInfo:
    tensors = []
    for buf in inputs:
        if isinstance(buf, np.ndarray):
            etype = next(t for t in ElementType if t.np_dtype == buf.dtype)
            tensors.append(TensorInfo(etype, TensorDim.of(buf.size)))
        else:
            tensors.append(TensorInfo(ElementType.UINT8, TensorDim.of(len(buf))))
    return TensorsInfo(tuple(tensors))


def single_open(framework: str, model: str | None = None, **props) -> SingleHandle:
    return SingleHandle(framework, model, **props)


def single_invoke(handle: SingleHandle, inputs) -> list[bytes]:
    return handle.invoke(inputs)


def single_close(handle: SingleHandle) -> None:
    handle.close()
