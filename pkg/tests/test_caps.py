"""Capability equality, intersection, fixation, and the rank-padding rule."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tenspipe import (
    ANY,
    CapsError,
    ElementType,
    Framerate,
    NegotiationError,
    RasterCaps,
    TensorCaps,
    TensorDim,
    TensorsInfo,
    TextCaps,
    canonical_dim,
    caps_equal,
    caps_intersect,
    negotiate_link,
    parse_caps,
)
from tenspipe.caps import TensorPattern, fixate


def tensor_caps(type_name, dim, rate="0/1", rank=None):
    d = TensorDim.parse(dim)
    if rank is not None:
        d = TensorDim(d.d, explicit_rank=rank)
    return TensorCaps.from_info(
        TensorsInfo.single(ElementType.parse(type_name), d, Framerate.parse(rate))
    )


# -- canonical_dim -----------------------------------------------------------

def test_canonical_dim_pads_with_ones():
    assert canonical_dim((640, 480)).d == (640, 480, 1, 1)
    assert canonical_dim((3, 4, 1, 1)).d == (3, 4, 1, 1)
    assert canonical_dim((7,)).d == (7, 1, 1, 1)


def test_canonical_dim_idempotent():
    d = canonical_dim((5, 6))
    assert canonical_dim(d) == d


# -- caps_equal ---------------------------------------------------------------

def test_equal_across_rank_padding():
    assert caps_equal(tensor_caps("uint8", "640:480"),
                      tensor_caps("uint8", "640:480:1:1"))


def test_unequal_dims():
    assert not caps_equal(tensor_caps("uint8", "3:4"), tensor_caps("uint8", "4:3"))


def test_rank_metadata_ignored():
    assert caps_equal(tensor_caps("uint8", "3:4:1:1", rank=2),
                      tensor_caps("uint8", "3:4:1:1", rank=4))


def test_equal_requires_fixed():
    with pytest.raises(CapsError):
        caps_equal(TensorCaps(), tensor_caps("uint8", "1"))


def test_equal_distinguishes_kinds():
    assert not caps_equal(tensor_caps("uint8", "4"), TextCaps())


# -- caps_intersect -----------------------------------------------------------

def test_intersect_wildcard_fill():
    a = TensorCaps(multi=False, count=1,
                   patterns=(TensorPattern(None, (3, 4, 1, 1)),), rate=None)
    b = TensorCaps(multi=False, count=1,
                   patterns=(TensorPattern(ElementType.UINT8, (None,) * 4),),
                   rate=None)
    out = caps_intersect(a, b)
    assert out.patterns[0].etype == ElementType.UINT8
    assert out.patterns[0].dim == (3, 4, 1, 1)


def test_intersect_kind_mismatch_is_empty():
    assert caps_intersect(tensor_caps("uint8", "1"), RasterCaps(4, 4, 3)) is None


def test_intersect_variable_rate_is_permissive():
    a = tensor_caps("uint8", "1", rate="30/1")
    b = tensor_caps("uint8", "1", rate="0/1")
    assert caps_intersect(a, b).rate == Framerate(30, 1)
    c = tensor_caps("uint8", "1", rate="10/1")
    assert caps_intersect(a, c) is None


def test_intersect_any_identity():
    a = tensor_caps("int32", "2:2")
    assert caps_intersect(ANY, a) is a
    assert caps_intersect(a, ANY) is a


@st.composite
def fixed_tensor_caps(draw):
    n = draw(st.integers(1, 3))
    patterns = tuple(
        TensorPattern(
            draw(st.sampled_from(list(ElementType))),
            tuple(draw(st.lists(st.integers(1, 8), min_size=4, max_size=4))),
        )
        for _ in range(n)
    )
    rate = Framerate(draw(st.integers(0, 60)), 1)
    return TensorCaps(multi=n > 1, count=n, patterns=patterns, rate=rate)


@given(fixed_tensor_caps(), fixed_tensor_caps())
def test_intersect_commutative(a, b):
    assert caps_intersect(a, b) == caps_intersect(b, a)


@given(fixed_tensor_caps())
def test_intersect_idempotent(a):
    assert caps_intersect(a, a) == a


@given(fixed_tensor_caps(), fixed_tensor_caps(), fixed_tensor_caps())
def test_equal_is_equivalence(a, b, c):
    assert caps_equal(a, a)
    assert caps_equal(a, b) == caps_equal(b, a)
    if caps_equal(a, b) and caps_equal(b, c):
        assert caps_equal(a, c)


# -- negotiate_link -----------------------------------------------------------

def test_negotiate_fixed_vs_any():
    src = tensor_caps("uint8", "2:2")
    assert negotiate_link(src, ANY) == src


def test_negotiate_rank_padding_link():
    out = negotiate_link(tensor_caps("uint8", "2:2"),
                         tensor_caps("uint8", "2:2:1:1"))
    assert out.patterns[0].dim == (2, 2, 1, 1)


def test_negotiate_type_conflict():
    with pytest.raises(NegotiationError, match="other/tensor"):
        negotiate_link(tensor_caps("uint8", "3:4"), tensor_caps("int8", "3:4"))


def test_fixation_defaults():
    fixed = fixate(TensorCaps())
    assert fixed.count == 1
    assert fixed.multi is False
    assert fixed.patterns[0].etype == ElementType.FLOAT32
    assert fixed.patterns[0].dim == (1, 1, 1, 1)
    assert fixed.rate == Framerate.VARIABLE


def test_fixation_keeps_fixed_fields():
    fixed = fixate(tensor_caps("uint8", "3:4", rate="30/1"))
    assert fixed == tensor_caps("uint8", "3:4", rate="30/1")


def test_fixate_any_fails():
    with pytest.raises(NegotiationError):
        fixate(ANY)


# -- parse / render -----------------------------------------------------------

PINNED = [
    "other/tensor,type=uint8,dimension=3:640:480:1,framerate=30/1",
    "other/tensors,num_tensors=2,types=uint8.float32,dimensions=3:4:1:1.1:1:1:1,framerate=0/1",
    "other/tensor,type=*,dimension=3:4:*:*,framerate=*",
    "other/tensor,type=float64,dimension=640:480,framerate=0/1",
    "media/raster,width=640,height=480,channels=3,framerate=30/1",
    "media/text",
    "media/binary",
    "ANY",
]


@pytest.mark.parametrize("text", PINNED)
def test_render_parse_bit_exact(text):
    assert parse_caps(text).render() == text


def test_parse_rejects_unknown_kind_and_fields():
    with pytest.raises(CapsError):
        parse_caps("other/matrix,type=uint8")
    with pytest.raises(CapsError):
        parse_caps("other/tensor,type=uint8,color=red")
    with pytest.raises(CapsError):
        parse_caps("other/tensor,type=uint9")


def test_parse_preserves_written_rank():
    caps = parse_caps("other/tensor,type=uint8,dimension=640:480,framerate=0/1")
    assert caps.patterns[0].dim == (640, 480, 1, 1)
    assert caps.patterns[0].rank == 2


# -- brute-force rank-padding comparator (independent oracle) ------------------

def brute_force_dims_equal(a: tuple, b: tuple) -> bool:
    la, lb = list(a), list(b)
    while len(la) < 4:
        la.append(1)
    while len(lb) < 4:
        lb.append(1)
    return la == lb


def test_random_dim_pairs_match_oracle():
    rng = np.random.default_rng(8)
    for _ in range(1000):
        ra, rb = rng.integers(1, 5, 2)
        a = tuple(int(x) for x in rng.integers(1, 4, ra))
        b = tuple(int(x) for x in rng.integers(1, 4, rb))
        ours = caps_equal(tensor_caps("uint8", ":".join(map(str, a))),
                          tensor_caps("uint8", ":".join(map(str, b))))
        assert ours == brute_force_dims_equal(a, b), (a, b)
