"""tensor_if routing, tensor_rate re-timing and QoS, repo recurrence."""

import numpy as np
import pytest

from tenspipe import (
    ElementType,
    Framerate,
    GraphError,
    Pipeline,
    State,
    TensorDim,
    TensorsInfo,
    make_frame,
    register_custom_fn,
)
from tenspipe.caps import TensorCaps
from tenspipe.elements.flow import TensorIf, TensorRate
from tenspipe.errors import PipelineError
from tenspipe.events import Qos

from conftest import push, wire

INFO3 = TensorsInfo.parse_spec("float32:3:1:1:1")


def f32_frame(values, ts=0):
    return make_frame(INFO3, ts, [np.array(values, "<f4").tobytes()])


def make_if(ctx, props, n_src=1):
    el = TensorIf("i", props, ctx)
    for _ in range(n_src):
        el.request_src_pad()
    caps = wire(el, [TensorCaps.from_info(INFO3)])
    return el, caps


# -- tensor_if ---------------------------------------------------------------

def test_if_max_reduction_pass(ctx):
    el, (cap,) = make_if(ctx, {"source": "0:max", "op": "gt", "operand": "0.5",
                               "then": "pass", "else": "drop"})
    frame = f32_frame([0.1, 0.9, 0.2])
    push(el, [frame])
    assert cap.frames == [frame.with_seq(0)]
    assert cap.frames[0].chunks[0] is frame.chunks[0]  # unmodified reference


def test_if_out_of_range_drops(ctx):
    el, (cap,) = make_if(ctx, {"source": "0:0", "op": "in_range",
                               "operand": "5:9", "then": "pass",
                               "else": "drop"})
    push(el, [f32_frame([3.0, 0.0, 0.0])])
    assert cap.frames == []


def test_if_routes_per_value(ctx):
    el, (cap0, cap1) = make_if(
        ctx, {"source": "0:0", "op": "gt", "operand": "5",
              "then": "route:0", "else": "route:1"}, n_src=2)
    push(el, [f32_frame([7.0, 0, 0], ts=0), f32_frame([2.0, 0, 0], ts=1)])
    assert [f.timestamp for f in cap0.frames] == [0]
    assert [f.timestamp for f in cap1.frames] == [1]


def test_if_mean_and_min_reductions(ctx):
    el, (cap,) = make_if(ctx, {"source": "0:mean", "op": "ge", "operand": "2",
                               "then": "pass", "else": "drop"})
    push(el, [f32_frame([1.0, 2.0, 3.0])])
    assert len(cap.frames) == 1
    el2, (cap2,) = make_if(ctx, {"source": "0:min", "op": "lt", "operand": "0",
                                 "then": "pass", "else": "drop"})
    push(el2, [f32_frame([-1.0, 5.0, 5.0])])
    assert len(cap2.frames) == 1


def test_if_element_index_validated_at_startup(ctx):
    el = TensorIf("i", {"source": "0:99", "op": "gt", "operand": "0"}, ctx)
    el.request_src_pad()
    with pytest.raises(PipelineError, match="element index 99"):
        wire(el, [TensorCaps.from_info(INFO3)])


def test_if_range_needs_lo_le_hi(ctx):
    with pytest.raises(PipelineError, match="lo <= hi"):
        TensorIf("i", {"source": "0:0", "op": "in_range", "operand": "9:5"}, ctx)


def test_if_route_target_must_exist(ctx):
    el = TensorIf("i", {"source": "0:0", "op": "gt", "operand": "0",
                        "then": "route:1", "else": "drop"}, ctx)
    el.request_src_pad()
    with pytest.raises(PipelineError, match="route target"):
        wire(el, [TensorCaps.from_info(INFO3)])


# -- tensor_rate ---------------------------------------------------------------

def rate_element(ctx, target, mode="drop_only", in_rate="30/1"):
    el = TensorRate("r", {"framerate": target, "mode": mode}, ctx)
    info = TensorsInfo.single(ElementType.UINT8, TensorDim.of(1),
                              Framerate.parse(in_rate))
    (cap,) = wire(el, [TensorCaps.from_info(info)])
    return el, cap, info


def u8_frames(info, rate, count):
    r = Framerate.parse(rate)
    return [make_frame(info, r.frame_ts(k), [bytes([k % 256])])
            for k in range(count)]


def test_rate_30_to_10_drops_two_thirds(ctx):
    el, cap, info = rate_element(ctx, "10/1")
    push(el, u8_frames(info, "30/1", 90))
    assert len(cap.frames) == 30
    assert [f.chunks[0].tobytes()[0] for f in cap.frames[:4]] == [0, 3, 6, 9]


def test_rate_target_above_input_passes_all(ctx):
    el, cap, info = rate_element(ctx, "60/1")
    push(el, u8_frames(info, "30/1", 30))
    assert len(cap.frames) == 30


def test_rate_duplicate_doubles_10_to_20(ctx):
    el, cap, info = rate_element(ctx, "20/1", mode="duplicate", in_rate="10/1")
    push(el, u8_frames(info, "10/1", 30))
    assert len(cap.frames) == 60
    values = [f.chunks[0].tobytes()[0] for f in cap.frames]
    assert values == [v for k in range(30) for v in (k, k)]


def test_rate_output_caps_carry_target(ctx):
    el, cap, info = rate_element(ctx, "10/1")
    assert el.src_pads[0].negotiated.to_info().rate == Framerate(10, 1)


def test_rate_qos_sheds_admissible_frames(ctx):
    el, cap, info = rate_element(ctx, "10/1")
    frames = u8_frames(info, "30/1", 90)
    for f in frames[:30]:
        el.receive(el.sink_pads[0], f)
    # 0.25 s lateness at 10 Hz -> ceil(2.5) = 3 admissible frames dropped
    el.handle_upstream_event(el.src_pads[0], Qos(lateness_ns=250_000_000))
    for f in frames[30:]:
        el.receive(el.sink_pads[0], f)
    assert len(cap.frames) == 30 - 3


def test_rate_rejects_variable_target(ctx):
    with pytest.raises(PipelineError, match="numerator"):
        TensorRate("r", {"framerate": "0/1"}, ctx)


# -- repo recurrence -------------------------------------------------------------

def register_adder(name="flow_add"):
    def adder(arrays, info):
        out = (arrays[0].astype(np.int64) + arrays[1].astype(np.int64))
        return [(out % 256).astype(np.uint8)]
    try:
        register_custom_fn(name, adder,
                           output_info=TensorsInfo.parse_spec("uint8:1:1:1:1"))
    except Exception:
        pass  # already registered by an earlier test
    return name


def running_sum_desc(n, fn):
    return f"""
    testsrc_tensor name=x info=uint8:1:1:1:1 fill=counter rate=5/1 num_frames={n}
        ! tensor_transform mode=arith option=add:1 ! mux.sink_0
    tensor_reposrc name=rs slot=acc info=uint8:1:1:1:1 ! mux.sink_1
    tensor_mux name=mux policy=base base=0
        ! tensor_filter framework=custom_fn model={fn} ! tee name=t
    t. ! appsink name=out
    t. ! tensor_reposink slot=acc
    """


def test_running_sum_recurrence():
    fn = register_adder()
    pipe = Pipeline(running_sum_desc(5, fn))
    report = pipe.run_until_eos(timeout=15)
    assert report.ok, report.error
    info = TensorsInfo.parse_spec("uint8:1:1:1:1")
    outs = [int(f.array(info)[0]) for f in pipe.element("out").collected()]
    assert outs == [1, 3, 6, 10, 15]
    pipe.set_state(State.NULL)


def test_reposrc_bootstrap_is_zero_filled():
    desc = """
    tensor_reposrc name=rs slot=s info=uint8:4:1:1:1 ! appsink name=a
    testsrc_tensor name=x info=uint8:4:1:1:1 fill=counter num_frames=2
        ! tensor_reposink slot=s
    """
    pipe = Pipeline(desc)
    report = pipe.run_until_eos(timeout=10)
    assert report.ok, report.error
    frames = pipe.element("a").collected()
    assert frames[0].chunks[0].tobytes() == bytes(4)
    assert frames[0].timestamp == 0
    assert frames[1].chunks[0].tobytes() == bytes([0, 1, 2, 3])
    pipe.set_state(State.NULL)


def test_two_reposrcs_on_one_slot_rejected():
    desc = """
    tensor_reposrc name=a slot=s info=uint8:1:1:1:1 ! nullsink name=na
    tensor_reposrc name=b slot=s info=uint8:1:1:1:1 ! nullsink name=nb
    testsrc_tensor info=uint8:1:1:1:1 num_frames=1 ! tensor_reposink slot=s
    """
    pipe = Pipeline(desc)
    with pytest.raises(GraphError, match="two repo sources"):
        pipe.set_state(State.READY)


def test_unpaired_repo_slot_rejected():
    pipe = Pipeline("tensor_reposrc slot=s info=uint8:1:1:1:1 ! nullsink")
    with pytest.raises(GraphError, match="needs both"):
        pipe.set_state(State.READY)
