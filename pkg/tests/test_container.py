"""Stream container format: bitwise round-trip and corruption reporting."""

import struct

import numpy as np
import pytest

from tenspipe import (
    ContainerError,
    Framerate,
    Pipeline,
    State,
    TensorsInfo,
    file_read,
    file_write,
    make_frame,
    run_pipeline,
)
from tenspipe.caps import TensorCaps, TextCaps
from tenspipe.container import MAGIC
from tenspipe.frames import Chunk, Frame

INFO = TensorsInfo.parse_spec("uint8:4:1:1:1.float32:2:1:1:1")


def sample_frames(n=3):
    rng = np.random.default_rng(31)
    return [
        make_frame(INFO, 1000 * k,
                   [rng.integers(0, 256, 4, dtype=np.uint8).tobytes(),
                    rng.normal(size=2).astype("<f4").tobytes()])
        for k in range(n)
    ]


def test_roundtrip_bitwise(tmp_path):
    path = str(tmp_path / "s.strm")
    frames = sample_frames()
    caps = TensorCaps.from_info(INFO)
    file_write(path, caps, frames)
    caps2, frames2 = file_read(path)
    assert caps2.render() == caps.render()
    assert [f.timestamp for f in frames2] == [f.timestamp for f in frames]
    for a, b in zip(frames, frames2):
        assert [c.tobytes() for c in a.chunks] == [c.tobytes() for c in b.chunks]
    # writing the read-back frames reproduces the file byte for byte
    path2 = str(tmp_path / "s2.strm")
    file_write(path2, caps2, frames2)
    assert open(path, "rb").read() == open(path2, "rb").read()


def test_layout_is_little_endian_and_pinned(tmp_path):
    info = TensorsInfo.parse_spec("uint8:2:1:1:1")
    path = str(tmp_path / "tiny.strm")
    file_write(path, TensorCaps.from_info(info),
               [make_frame(info, 7, [b"\xaa\xbb"])])
    blob = open(path, "rb").read()
    assert blob[:8] == b"NNSTRM1\x00"
    (header_len,) = struct.unpack_from("<I", blob, 8)
    body = 12 + header_len
    ts, chunk_count = struct.unpack_from("<QI", blob, body)
    assert (ts, chunk_count) == (7, 1)
    (length,) = struct.unpack_from("<Q", blob, body + 12)
    assert length == 2
    assert blob[body + 20:body + 22] == b"\xaa\xbb"
    assert body + 22 == len(blob)


def test_magic_mismatch_offset_zero(tmp_path):
    path = tmp_path / "bad.strm"
    path.write_bytes(b"NOTANNST" + bytes(20))
    with pytest.raises(ContainerError, match="offset 0"):
        file_read(str(path))


def test_truncated_frame_reports_offset(tmp_path):
    path = str(tmp_path / "t.strm")
    file_write(path, TensorCaps.from_info(INFO), sample_frames(2))
    blob = open(path, "rb").read()
    trunc = tmp_path / "trunc.strm"
    trunc.write_bytes(blob[:-3])
    with pytest.raises(ContainerError) as err:
        file_read(str(trunc))
    assert err.value.offset is not None
    assert "frame 1" in str(err.value)


def test_header_caps_vs_frame_size_mismatch(tmp_path):
    info1 = TensorsInfo.parse_spec("uint8:2:1:1:1")
    path = str(tmp_path / "m.strm")
    file_write(path, TensorCaps.from_info(info1),
               [make_frame(info1, 0, [b"ab"])])
    blob = bytearray(open(path, "rb").read())
    # grow the recorded chunk length without growing the data
    (header_len,) = struct.unpack_from("<I", blob, 8)
    struct.pack_into("<Q", blob, 12 + header_len + 12, 5)
    bad = tmp_path / "bad.strm"
    bad.write_bytes(bytes(blob))
    with pytest.raises(ContainerError, match="frame 0"):
        file_read(str(bad))


def test_trailing_garbage_rejected(tmp_path):
    path = str(tmp_path / "g.strm")
    file_write(path, TensorCaps.from_info(INFO), sample_frames(1))
    with open(path, "ab") as fh:
        fh.write(b"junk")
    with pytest.raises(ContainerError, match="trailing"):
        file_read(path)


def test_wildcard_caps_rejected_on_write(tmp_path):
    with pytest.raises(ContainerError, match="fixed"):
        file_write(str(tmp_path / "w.strm"), TensorCaps(), [])


def test_text_container_carries_variable_length_frames(tmp_path):
    path = str(tmp_path / "txt.strm")
    frames = [Frame(timestamp=k, chunks=(Chunk(t),))
              for k, t in enumerate([b"hi", b"longer text"])]
    file_write(path, TextCaps(), frames)
    caps, back = file_read(path)
    assert isinstance(caps, TextCaps)
    assert [f.chunks[0].tobytes() for f in back] == [b"hi", b"longer text"]


def test_filesink_filesrc_pipeline_roundtrip(tmp_path):
    path = str(tmp_path / "loop.strm")
    r1 = run_pipeline(
        "testsrc_tensor info=uint8:3:1:1:1 fill=counter rate=10/1 "
        f"num_frames=5 ! filesink location={path}")
    assert r1.ok
    pipe = Pipeline(f"filesrc location={path} ! appsink name=a")
    r2 = pipe.run_until_eos()
    assert r2.ok
    frames = pipe.element("a").collected()
    assert [f.chunks[0].tobytes() for f in frames] == [
        bytes(range(k * 3, k * 3 + 3)) for k in range(5)]
    assert [f.timestamp for f in frames] == [
        Framerate(10, 1).frame_ts(k) for k in range(5)]
    pipe.set_state(State.NULL)


def test_filesrc_missing_file_is_startup_error():
    pipe = Pipeline("filesrc location=/no/such/file.strm ! nullsink")
    with pytest.raises(Exception, match="cannot read"):
        pipe.set_state(State.READY)
