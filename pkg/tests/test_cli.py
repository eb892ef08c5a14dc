"""CLI runner: exit codes, stats output, dot export."""

import json
import subprocess
import sys

import pytest

from tenspipe.cli import main

OK_PIPELINE = "testsrc_tensor info=uint8:1:1:1:1 num_frames=10 ! nullsink name=n"


def run_cli(args):
    return main(args)


def test_successful_run_exit_zero(capsys):
    code = run_cli(["run", OK_PIPELINE])
    assert code == 0
    out = capsys.readouterr().out
    assert "n" in out and "10" in out


def test_parse_error_exit_two(capsys):
    code = run_cli(["run", "a ! b !"])
    assert code == 2
    err = capsys.readouterr().err
    assert "line" in err and "column" in err


def test_validation_error_exit_two(capsys):
    code = run_cli(["run", "testsrc_tensor info=uint8:3:4:1:1 "
                           "! other/tensor,type=int8,dimension=3:4:1:1,framerate=0/1 "
                           "! nullsink"])
    assert code == 2


def test_runtime_error_exit_one(capsys):
    # deadlocked feedback loop from the runtime tests, with a tiny timeout
    desc = """
    testsrc_tensor name=x info=uint8:1:1:1:1 rate=5/1 num_frames=4 ! mux.sink_0
    tensor_reposrc name=r slot=s info=uint8:1:1:1:1 ! mux.sink_1
    tensor_mux name=mux policy=base base=0 ! tee name=t
    t. ! appsink name=a
    t. ! tensor_demux name=dd pick=0
    dd. ! tensor_rate framerate=1/1000 mode=drop_only ! tensor_reposink slot=s
    """
    code = run_cli(["run", desc, "--timeout", "1"])
    assert code == 1


def test_stats_json_block(capsys):
    code = run_cli(["run", OK_PIPELINE, "--stats", "--quiet"])
    assert code == 0
    out = capsys.readouterr().out
    blob = json.loads(out)
    assert blob["sinks"]["n"]["frames"] == 10
    assert "payload_copies" in blob


def test_dot_file_written(tmp_path, capsys):
    dot_path = tmp_path / "g.dot"
    code = run_cli(["run", OK_PIPELINE, "--dot", str(dot_path), "--quiet"])
    assert code == 0
    dot = dot_path.read_text()
    assert dot.startswith("digraph pipeline {")
    assert "->" in dot
    assert "other/tensor" in dot  # negotiated caps label


def test_quiet_suppresses_table(capsys):
    code = run_cli(["run", OK_PIPELINE, "--quiet"])
    assert code == 0
    assert capsys.readouterr().out == ""


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "tenspipe.cli", "run", OK_PIPELINE, "--quiet"],
        capture_output=True, text=True, timeout=60,
    )
    assert proc.returncode == 0, proc.stderr


def test_paced_flag_slows_run():
    import time
    start = time.perf_counter()
    code = run_cli(["run",
                    "testsrc_tensor info=uint8:1:1:1:1 rate=20/1 num_frames=10 "
                    "! nullsink", "--paced", "--quiet"])
    assert code == 0
    assert time.perf_counter() - start >= 0.4
