"""Run statistics and the multi-model relative-throughput metric."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import TenspipeError
from .runtime import RunReport


def bench_relative_throughput(single_rates, multi_rates, hw_count: int = 1) -> float:
    """Throughput change (%) of running models together vs. alone.

    Sums each model's together/alone rate ratio, normalizes by the number
    of hardware units shared, and expresses the result as a percentage
    above (positive) or below (negative) the single-model baseline.
    """
    single = list(single_rates)
    multi = list(multi_rates)
    if len(single) != len(multi):
        raise TenspipeError("rate lists must have equal length")
    if not single:
        raise TenspipeError("rate lists must not be empty")
    if hw_count < 1:
        raise TenspipeError("hw_count must be >= 1")
    for r in single:
        if r <= 0:
            raise TenspipeError(f"single-model rate must be > 0, got {r}")
    ratio_sum = sum(m / s for m, s in zip(multi, single))
    return (ratio_sum / hw_count - 1.0) * 100.0


@dataclass
class SinkStats:
    frames: int
    fps: float
    mean_latency_ms: float | None
    p95_latency_ms: float | None


@dataclass
class RunStats:
    """Displayable per-run statistics derived from a run report."""

    sinks: dict[str, SinkStats]
    elapsed_s: float
    payload_copies: int
    queue_occupancy: dict[str, int]
    state: str
    error: str | None

    @classmethod
    def from_report(cls, report: RunReport) -> "RunStats":
        sinks = {}
        for name, sink in sorted(report.sinks.items()):
            lat = sorted(sink.latencies_ns)
            mean = p95 = None
            if lat:
                mean = sum(lat) / len(lat) / 1e6
                p95 = lat[min(len(lat) - 1, int(0.95 * len(lat)))] / 1e6
            fps = sink.count / report.elapsed_s if report.elapsed_s > 0 else 0.0
            sinks[name] = SinkStats(sink.count, fps, mean, p95)
        return cls(
            sinks=sinks,
            elapsed_s=report.elapsed_s,
            payload_copies=report.payload_copies,
            queue_occupancy=dict(sorted(report.queue_occupancy.items())),
            state=report.state.value,
            error=report.error,
        )

    def render_table(self) -> str:
        rows = [("sink", "frames", "fps", "mean-lat-ms", "p95-lat-ms")]
        for name, s in self.sinks.items():
            rows.append((
                name, str(s.frames), f"{s.fps:.1f}",
                "-" if s.mean_latency_ms is None else f"{s.mean_latency_ms:.2f}",
                "-" if s.p95_latency_ms is None else f"{s.p95_latency_ms:.2f}",
            ))
        widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
        lines = ["  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip()
                 for row in rows]
        lines.append(f"elapsed: {self.elapsed_s:.3f} s")
        lines.append(f"payload copies: {self.payload_copies}")
        for q, occ in self.queue_occupancy.items():
            lines.append(f"queue {q}: max occupancy {occ}")
        if self.error:
            lines.append(f"error: {self.error}")
        return "\n".join(lines)

    def to_json(self) -> str:
        return json.dumps(
            {
                "state": self.state,
                "elapsed_s": self.elapsed_s,
                "payload_copies": self.payload_copies,
                "sinks": {
                    name: {
                        "frames": s.frames,
                        "fps": s.fps,
                        "mean_latency_ms": s.mean_latency_ms,
                        "p95_latency_ms": s.p95_latency_ms,
                    }
                    for name, s in self.sinks.items()
                },
                "queues": self.queue_occupancy,
                "error": self.error,
            },
            indent=2,
            sort_keys=True,
        )
