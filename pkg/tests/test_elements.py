"""Generic elements: sources, sinks, queue policies, tee, valve, selectors."""

import threading
import time

import pytest

from tenspipe import ElementType, Framerate, TensorDim, TensorsInfo, make_frame
from tenspipe.caps import TensorCaps
from tenspipe.elements.basic import (
    InputSelector,
    NullSink,
    OutputSelector,
    Queue,
    RasterTestSource,
    Tee,
    TensorTestSource,
    Valve,
)
from tenspipe.events import EOS, Eos
from tenspipe.runtime import run_pipeline

from conftest import push, wire, wire_requesting

INFO1 = TensorsInfo.parse_spec("uint8:2:1:1:1")
CAPS1 = TensorCaps.from_info(INFO1)


def frames_of(info, payload_lists, start_ts=0):
    return [make_frame(info, start_ts + i, payloads)
            for i, payloads in enumerate(payload_lists)]


# -- sources --------------------------------------------------------------

def test_counter_fill_runs_across_frames(ctx):
    src = TensorTestSource("s", {"info": "uint8:2:1:1:1", "fill": "counter",
                                 "num_frames": 3}, ctx)
    got = [f.chunks[0].tobytes() for f in src.frames()]
    assert got == [b"\x00\x01", b"\x02\x03", b"\x04\x05"]


def test_counter_fill_wraps_mod_256(ctx):
    src = TensorTestSource("s", {"info": "uint8:300:1:1:1", "fill": "counter",
                                 "num_frames": 1}, ctx)
    data = next(iter(src.frames())).chunks[0].tobytes()
    assert data[255] == 255 and data[256] == 0


def test_source_timestamps_follow_rate(ctx):
    src = TensorTestSource("s", {"info": "uint8:1:1:1:1", "rate": "10/1",
                                 "num_frames": 3}, ctx)
    assert [f.timestamp for f in src.frames()] == [0, 100_000_000, 200_000_000]


def test_raster_source_frame_size(ctx):
    src = RasterTestSource("r", {"width": 4, "height": 4, "channels": 3,
                                 "num_frames": 2}, ctx)
    frames = list(src.frames())
    assert len(frames) == 2
    assert all(len(f.chunks[0]) == 48 for f in frames)


def test_zero_frames_is_immediate_eos():
    report = run_pipeline(
        "testsrc_tensor info=uint8:1:1:1:1 num_frames=0 ! nullsink name=n")
    assert report.ok
    assert report.frames_per_sink["n"] == 0


def test_random_fill_is_seed_deterministic(ctx):
    mk = lambda: TensorTestSource(
        "s", {"info": "uint8:16:1:1:1", "fill": "random", "seed": 7,
              "num_frames": 4}, ctx)
    a = [f.chunks[0].tobytes() for f in mk().frames()]
    b = [f.chunks[0].tobytes() for f in mk().frames()]
    assert a == b


# -- sinks -----------------------------------------------------------------

def test_nullsink_counts_to_eos():
    report = run_pipeline(
        "testsrc_tensor info=uint8:1:1:1:1 num_frames=10 ! nullsink name=n")
    assert report.frames_per_sink["n"] == 10


def test_appsink_poll_order_matches_push_order():
    from tenspipe import Pipeline, State
    pipe = Pipeline("testsrc_tensor info=uint8:1:1:1:1 fill=counter "
                    "num_frames=5 ! appsink name=a")
    report = pipe.run_until_eos()
    assert report.ok
    sink = pipe.element("a")
    got = []
    while (f := sink.poll()) is not None:
        got.append(f.chunks[0].tobytes()[0])
    assert got == [0, 1, 2, 3, 4]
    pipe.set_state(State.NULL)


def test_statssink_paced_rate(ctx):
    report = run_pipeline(
        "testsrc_tensor info=uint8:1:1:1:1 rate=10/1 num_frames=20 "
        "! statssink name=s",
        paced=True, timeout=10)
    assert report.ok
    fps = report.frames_per_sink["s"] / report.elapsed_s
    assert 8.0 <= fps <= 12.0


# -- queue ------------------------------------------------------------------

def test_queue_fifo_order():
    report = run_pipeline(
        "testsrc_tensor info=uint8:1:1:1:1 fill=counter num_frames=50 "
        "! queue name=q ! appsink name=a")
    assert report.ok


def test_queue_block_policy_bounds_occupancy(ctx):
    q = Queue("q", {"capacity": 2, "policy": "block"}, ctx)
    (cap,) = wire(q, [CAPS1])
    frames = frames_of(INFO1, [[b"ab"]] * 3)
    done = []

    def producer():
        for f in frames:
            q.receive(q.sink_pads[0], f)
        done.append(True)

    t = threading.Thread(target=producer, daemon=True)
    t.start()
    time.sleep(0.2)
    assert not done            # third push is waiting
    assert q.max_occupancy == 2
    q.start()                  # consumer drains
    t.join(2)
    assert done
    q.receive_event(q.sink_pads[0], EOS)
    q.join(2)
    assert len(cap.frames) == 3
    assert [f.seq for f in cap.frames] == [0, 1, 2]


def test_queue_leaky_old_drops_oldest(ctx):
    q = Queue("q", {"capacity": 2, "policy": "leaky_old"}, ctx)
    (cap,) = wire(q, [CAPS1])
    f1, f2, f3 = frames_of(INFO1, [[b"f1"], [b"f2"], [b"f3"]])
    for f in (f1, f2, f3):
        q.receive(q.sink_pads[0], f)
    q.receive_event(q.sink_pads[0], EOS)
    q.start()
    q.join(2)
    assert [f.chunks[0].tobytes() for f in cap.frames] == [b"f2", b"f3"]


def test_queue_leaky_new_drops_incoming(ctx):
    q = Queue("q", {"capacity": 2, "policy": "leaky_new"}, ctx)
    (cap,) = wire(q, [CAPS1])
    for f in frames_of(INFO1, [[b"f1"], [b"f2"], [b"f3"]]):
        q.receive(q.sink_pads[0], f)
    q.receive_event(q.sink_pads[0], EOS)
    q.start()
    q.join(2)
    assert [f.chunks[0].tobytes() for f in cap.frames] == [b"f1", b"f2"]


def test_queue_push_after_eos_ignored(ctx):
    q = Queue("q", None, ctx)
    (cap,) = wire(q, [CAPS1])
    q.receive_event(q.sink_pads[0], EOS)
    q.receive(q.sink_pads[0], frames_of(INFO1, [[b"xx"]])[0])
    q.start()
    q.join(2)
    assert cap.frames == []
    assert any(isinstance(e, Eos) for e in cap.events)


# -- tee / valve / selectors ---------------------------------------------------

def test_tee_shares_chunks_across_branches(ctx):
    tee = Tee("t", None, ctx)
    cap0, cap1 = wire_requesting(tee, [CAPS1], n_src=2)
    frame = frames_of(INFO1, [[b"ab"]])[0]
    push(tee, [frame])
    assert cap0.frames[0].chunks[0] is frame.chunks[0]
    assert cap1.frames[0].chunks[0] is frame.chunks[0]
    assert ctx.copies.value == 0


def test_tee_per_pad_seq(ctx):
    tee = Tee("t", None, ctx)
    cap0, cap1 = wire_requesting(tee, [CAPS1], n_src=2)
    push(tee, frames_of(INFO1, [[b"ab"], [b"cd"]]))
    assert [f.seq for f in cap0.frames] == [0, 1]
    assert [f.seq for f in cap1.frames] == [0, 1]


def test_valve_drop_true_blocks_everything(ctx):
    valve = Valve("v", {"drop": True}, ctx)
    (cap,) = wire(valve, [CAPS1])
    push(valve, frames_of(INFO1, [[b"ab"], [b"cd"]]))
    assert cap.frames == []
    assert any(isinstance(e, Eos) for e in cap.events)


def test_valve_toggle_passes_whole_frames(ctx):
    valve = Valve("v", None, ctx)
    (cap,) = wire(valve, [CAPS1])
    frames = frames_of(INFO1, [[b"f0"], [b"f1"], [b"f2"], [b"f3"]])
    push(valve, frames[:2], eos=False)
    valve.set_property("drop", True)
    push(valve, frames[2:3], eos=False)
    valve.set_property("drop", False)
    push(valve, frames[3:])
    assert [f.chunks[0].tobytes() for f in cap.frames] == [b"f0", b"f1", b"f3"]


def test_input_selector_picks_active_pad(ctx):
    sel = InputSelector("s", {"active": 1}, ctx)
    sel.request_sink_pad()
    sel.request_sink_pad()
    (cap,) = wire(sel, [CAPS1, CAPS1])
    f0, f1 = frames_of(INFO1, [[b"p0"], [b"p1"]])
    sel.receive(sel.sink_pads[0], f0)
    sel.receive(sel.sink_pads[1], f1)
    assert [f.chunks[0].tobytes() for f in cap.frames] == [b"p1"]


def test_output_selector_routes_to_active(ctx):
    sel = OutputSelector("s", {"active": 0}, ctx)
    cap0, cap1 = wire_requesting(sel, [CAPS1], n_src=2)
    push(sel, frames_of(INFO1, [[b"f0"]]), eos=False)
    sel.set_property("active", 1)
    push(sel, frames_of(INFO1, [[b"f1"]], start_ts=1))
    assert [f.chunks[0].tobytes() for f in cap0.frames] == [b"f0"]
    assert [f.chunks[0].tobytes() for f in cap1.frames] == [b"f1"]


def test_eos_reaches_every_branch_once():
    from tenspipe import Pipeline, State
    pipe = Pipeline("testsrc_tensor info=uint8:1:1:1:1 num_frames=3 ! tee name=t "
                    " t. ! queue ! nullsink name=a  t. ! queue ! nullsink name=b")
    report = pipe.run_until_eos()
    assert report.ok
    assert report.frames_per_sink == {"a": 3, "b": 3}
    pipe.set_state(State.NULL)


def test_unknown_property_rejected(ctx):
    with pytest.raises(Exception, match="unknown"):
        Valve("v", {"bogus": "1"}, ctx)
