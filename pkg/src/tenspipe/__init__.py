"""tenspipe: multi-threaded pipe-and-filter framework for tensor streams.

Multidimensional tensors are first-class stream data: typed frames flow
through elements (converters, transforms, inference filters, sync-policy
combiners, flow controls) linked by negotiated capabilities, described
either programmatically or in a launch-style pipeline language.
"""

from . import elements  # noqa: F401  (registers built-in element kinds)
from .backends import (
    FilterBackend,
    register_backend,
    register_custom_fn,
    save_dense_model,
    single_close,
    single_invoke,
    single_open,
)
from .caps import (
    ANY,
    BinaryCaps,
    RasterCaps,
    StreamCaps,
    TensorCaps,
    TextCaps,
    canonical_dim,
    caps_equal,
    caps_intersect,
    negotiate_link,
    parse_caps,
    render_caps,
)
from .container import file_read, file_write
from .dtypes import (
    ElementType,
    Framerate,
    TensorDim,
    TensorInfo,
    TensorsInfo,
    element_byte_width,
    frame_byte_size,
)
from .errors import (
    BackendError,
    CapsError,
    ContainerError,
    GraphError,
    LaunchParseError,
    NegotiationError,
    PipelineError,
    TenspipeError,
)
from .frames import Chunk, CopyCounter, Frame, make_frame, zero_frame
from .parse import GraphSpec, parse_pipeline, serialize_pipeline
from .runtime import Pipeline, RunReport, State, run_pipeline
from .stats import RunStats, bench_relative_throughput

__version__ = "0.1.0"

__all__ = [
    "ANY", "BackendError", "BinaryCaps", "CapsError", "Chunk", "ContainerError",
    "CopyCounter", "ElementType", "FilterBackend", "Frame", "Framerate",
    "GraphError", "GraphSpec", "LaunchParseError", "NegotiationError",
    "Pipeline", "PipelineError", "RasterCaps", "RunReport", "RunStats", "State",
    "StreamCaps", "TensorCaps", "TensorDim", "TensorInfo", "TensorsInfo",
    "TenspipeError", "TextCaps", "bench_relative_throughput", "canonical_dim",
    "caps_equal", "caps_intersect", "element_byte_width", "file_read",
    "file_write", "frame_byte_size", "make_frame", "negotiate_link",
    "parse_caps", "parse_pipeline", "register_backend", "register_custom_fn",
    "render_caps", "run_pipeline", "save_dense_model", "serialize_pipeline",
    "single_close", "single_invoke", "single_open", "zero_frame",
]
