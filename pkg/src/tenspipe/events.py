"""In-band events that travel a pipeline alongside frames.

End-of-stream and flushes travel downstream, quality-of-service
lateness feedback travels upstream against the data flow.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class Eos:
    """End of stream; no frames follow on this pad."""


@dataclass(frozen=True)
class FlushStart:
    """Discard queued data until FlushStop."""


@dataclass(frozen=True)
class FlushStop:
    """Flushing finished; streaming may resume."""


@dataclass(frozen=True)
class Qos:
    """Downstream lateness report in ns (positive = running late)."""

    lateness_ns: int


EOS = Eos()
FLUSH_START = FlushStart()
FLUSH_STOP = FlushStop()
