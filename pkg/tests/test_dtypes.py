"""Tensor stream typing: element widths, dimensions, rates, sizes."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tenspipe import (
    CapsError,
    ElementType,
    Framerate,
    TensorDim,
    TensorInfo,
    TensorsInfo,
    element_byte_width,
    frame_byte_size,
)

WIDTHS = {
    "uint8": 1, "int8": 1, "uint16": 2, "int16": 2, "uint32": 4,
    "int32": 4, "uint64": 8, "int64": 8, "float32": 4, "float64": 8,
}


def test_exactly_ten_element_types():
    assert len(ElementType) == 10
    assert {t.render() for t in ElementType} == set(WIDTHS)


@pytest.mark.parametrize("name,width", sorted(WIDTHS.items()))
def test_element_byte_width(name, width):
    assert element_byte_width(ElementType.parse(name)) == width


def test_frame_byte_size_raster_shape():
    info = TensorsInfo.parse_spec("uint8:3:640:480:1")
    assert frame_byte_size(info) == 921600


def test_frame_byte_size_single_float():
    assert frame_byte_size(TensorsInfo.parse_spec("float32:1:1:1:1")) == 4


def test_frame_byte_size_two_tensor_bundle():
    # two 3x4 uint8 tensors bundled in one frame
    info = TensorsInfo.parse_spec("uint8:3:4:1:1.uint8:3:4:1:1")
    assert frame_byte_size(info) == 24


def test_frame_byte_size_overflow():
    info = TensorsInfo.single(ElementType.FLOAT64,
                              TensorDim.of(65535, 65535, 65535, 65535))
    with pytest.raises(CapsError, match="size overflow"):
        frame_byte_size(info)


@pytest.mark.parametrize("bad", [0, 65536, -1])
def test_dim_component_bounds(bad):
    with pytest.raises(CapsError):
        TensorDim.of(bad)


def test_dim_padding_and_rank():
    d = TensorDim.parse("640:480")
    assert d.d == (640, 480, 1, 1)
    assert d.explicit_rank == 2
    assert d.render() == "640:480"
    assert TensorDim.parse("3:4:1:1").render() == "3:4:1:1"


def test_dim_rank_requires_trailing_ones():
    with pytest.raises(CapsError):
        TensorDim((2, 3, 4, 1), explicit_rank=2)


def test_rank_never_affects_equality():
    assert TensorDim.parse("640:480") == TensorDim.parse("640:480:1:1")


@given(st.lists(st.integers(1, 65535), min_size=1, max_size=4))
def test_dim_of_pads_to_four(comps):
    d = TensorDim.of(*comps)
    assert len(d.d) == 4
    assert d.d[:len(comps)] == tuple(comps)
    assert all(c == 1 for c in d.d[len(comps):])


def test_framerate_reduction():
    assert Framerate(30, 3) == Framerate(10, 1)
    assert Framerate(0, 7) == Framerate(0, 1)
    assert Framerate(30, 3).render() == "10/1"


def test_framerate_bounds():
    with pytest.raises(CapsError):
        Framerate(-1, 1)
    with pytest.raises(CapsError):
        Framerate(1, 0)
    with pytest.raises(CapsError):
        Framerate(2147483648, 1)


def test_framerate_timestamps():
    r = Framerate(30, 1)
    assert r.frame_ts(0) == 0
    assert r.frame_ts(3) == 100_000_000
    assert r.frame_ts(90) == 3_000_000_000
    assert Framerate(10, 1).frame_ts(1) == 100_000_000


def test_framerate_ordering():
    assert Framerate(10, 1) < Framerate(30, 1)
    assert not Framerate(30, 1) < Framerate(30, 1)


def test_tensors_info_count_limits():
    one = TensorInfo(ElementType.UINT8, TensorDim.of(1))
    with pytest.raises(CapsError):
        TensorsInfo(())
    with pytest.raises(CapsError):
        TensorsInfo((one,) * 17)
    assert len(TensorsInfo((one,) * 16)) == 16


def test_spec_parse_render_roundtrip():
    info = TensorsInfo.parse_spec("float32:8:1:1:1.uint8:2:2:1:1")
    assert [t.render_spec() for t in info.tensors] == \
        ["float32:8:1:1:1", "uint8:2:2:1:1"]
