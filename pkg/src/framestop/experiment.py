"""Example experiment layer: geometry, HV and event streams.

An :class:`ExperimentListener` has one handler per stream.  The
:class:`ExperimentPlugin` turns it into a record-loop listener and hands each
frame to :class:`DispatchSupport`, which picks the handler by the stream that
drove the frame.
"""

from __future__ import annotations

import abc
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

from .engine import DefaultFrameFactory, Frame, Stop, StreamDescriptor, StreamMode
from .loop import RecordListener

GEOMETRY = "geometry"
HV = "hv"
EVENT = "event"


@dataclass(frozen=True)
class ExperimentStreamSet:
    geometry: StreamDescriptor
    high_voltage: StreamDescriptor
    event: StreamDescriptor

    def __post_init__(self):
        names = (self.geometry.name, self.high_voltage.name, self.event.name)
        if names != (GEOMETRY, HV, EVENT):
            raise ValueError(f"experiment streams must be named {GEOMETRY}, {HV}, {EVENT}")

    def __iter__(self):
        return iter((self.geometry, self.high_voltage, self.event))


def experiment_streams(hv_mode: StreamMode = StreamMode.SEQUENTIAL) -> ExperimentStreamSet:
    return ExperimentStreamSet(
        StreamDescriptor(GEOMETRY, StreamMode.LOOKUP, True),
        StreamDescriptor(HV, hv_mode, True),
        StreamDescriptor(EVENT, StreamMode.SEQUENTIAL, True),
    )


class ExperimentFrame(Frame):
    """Frame with named accessors for the three experiment streams."""

    @property
    def geometry(self):
        return self.get(GEOMETRY)

    @property
    def hv(self):
        return self.get(HV)

    @property
    def event(self):
        return self.get(EVENT)


class ExperimentFrameFactory(DefaultFrameFactory):
    def create_frame(self, stop: Stop) -> ExperimentFrame:
        return ExperimentFrame(stop)


class ExperimentListener(abc.ABC):
    """Per-stream handlers plus no-op lifecycle hooks."""

    def configure(self, event):
        pass

    def reconfigure(self, event):
        pass

    def resume(self, event):
        pass

    def suspend(self, event):
        pass

    def finish(self, event):
        pass

    @abc.abstractmethod
    def geometry(self, frame: Frame) -> None: ...

    @abc.abstractmethod
    def high_voltage(self, frame: Frame) -> None: ...

    @abc.abstractmethod
    def event(self, frame: Frame) -> None: ...

    @abc.abstractmethod
    def other_stream(self, frame: Frame) -> None: ...


class DispatchSupport:
    def dispatch(self, frame: Frame, listener: ExperimentListener) -> str:
        """Call the handler matching the frame's driving stream; return its name."""
        match frame.driving_stop.stream:
            case "geometry":
                listener.geometry(frame)
                return "geometry"
            case "hv":
                listener.high_voltage(frame)
                return "high_voltage"
            case "event":
                listener.event(frame)
                return "event"
            case _:
                listener.other_stream(frame)
                return "other_stream"


def dispatch_frame(support: DispatchSupport, frame: Frame, listener: ExperimentListener) -> str:
    return support.dispatch(frame, listener)


class ExperimentPlugin(RecordListener):
    """Adapts an :class:`ExperimentListener` to the record-loop lifecycle."""

    def __init__(self, listener: ExperimentListener, support: DispatchSupport | None = None):
        self.listener = listener
        self.support = support or DispatchSupport()

    def configure(self, event):
        super().configure(event)
        self.listener.configure(event)

    def reconfigure(self, event):
        super().reconfigure(event)
        self.listener.reconfigure(event)

    def resume(self, event):
        self.listener.resume(event)

    def suspend(self, event):
        self.listener.suspend(event)

    def finish(self, event):
        self.listener.finish(event)

    def record_supplied(self, event):
        self.support.dispatch(event.record, self.listener)

    def __repr__(self):
        return f"ExperimentPlugin({self.listener!r})"


def adapt_listener(listener: ExperimentListener) -> ExperimentPlugin:
    return ExperimentPlugin(listener)


@dataclass
class AnalysisSummary:
    frames_by_stream: Counter = field(default_factory=Counter)
    first_time: int | None = None
    last_time: int | None = None
    custom: dict[str, object] = field(default_factory=dict)

    @property
    def total_frames(self) -> int:
        return sum(self.frames_by_stream.values())

    def items(self) -> list[tuple[str, str]]:
        """Flatten to sorted ``(key, value)`` pairs."""
        pairs = {"total_frames": str(self.total_frames)}
        if self.first_time is not None:
            pairs["first_time"] = str(self.first_time)
        if self.last_time is not None:
            pairs["last_time"] = str(self.last_time)
        for stream, count in self.frames_by_stream.items():
            pairs[f"frames.{stream}"] = str(count)
        for key, value in self.custom.items():
            pairs[f"custom.{key}"] = _text(value)
        return sorted(pairs.items())

    def to_text(self, name: str) -> str:
        lines = [f"[{name}]"]
        lines.extend(f"{key}={value}" for key, value in self.items())
        return "\n".join(lines) + "\n"


def _text(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value).replace("\n", " ")


def format_summaries(blocks) -> str:
    """Render ``(name, summary)`` pairs as blank-line separated key=value blocks."""
    return "\n".join(summary.to_text(name) for name, summary in blocks)


class SampleAnalysis(ExperimentListener):
    """Counts every frame it sees; subclasses add their own bookkeeping."""

    name = "analysis"

    def __init__(self, on_summary: Callable[[str, AnalysisSummary], None] | None = None):
        self.on_summary = on_summary
        self.last_summary: AnalysisSummary | None = None
        self._reset()

    def _reset(self):
        self._frames: Counter = Counter()
        self._first: int | None = None
        self._last: int | None = None

    def configure(self, event):
        self._reset()

    def _note(self, frame: Frame):
        self._frames[frame.driving_stop.stream] += 1
        if self._first is None:
            self._first = frame.time
        self._last = frame.time

    def geometry(self, frame):
        self._note(frame)

    def high_voltage(self, frame):
        self._note(frame)

    def event(self, frame):
        self._note(frame)

    def other_stream(self, frame):
        self._note(frame)

    def custom(self) -> dict[str, object]:
        return {}

    def summary(self) -> AnalysisSummary:
        return AnalysisSummary(Counter(self._frames), self._first, self._last, self.custom())

    def finish(self, event):
        self.last_summary = self.summary()
        if self.on_summary is not None:
            self.on_summary(self.name, self.last_summary)


class EventCounter(SampleAnalysis):
    name = "event_counter"

    def _reset(self):
        super()._reset()
        self.events = 0

    def event(self, frame):
        super().event(frame)
        self.events += 1

    def custom(self):
        return {"events": self.events}


class GeometryChangeLogger(SampleAnalysis):
    name = "geometry_change_logger"

    def _reset(self):
        super()._reset()
        self.changes: list[tuple[int, object]] = []

    def geometry(self, frame):
        super().geometry(frame)
        record = frame.get(GEOMETRY)
        if record is None:
            return
        if not self.changes or self.changes[-1][1] != record.payload:
            self.changes.append((record.time, record.payload))

    def custom(self):
        return {
            "changes": len(self.changes),
            "change_times": ",".join(str(t) for t, _ in self.changes),
            "last_payload": self.changes[-1][1] if self.changes else None,
        }


class HVMonitor(SampleAnalysis):
    name = "hv_monitor"

    def _reset(self):
        super()._reset()
        # (frame time, HV record present, HV payload)
        self.readings: list[tuple[int, bool, object]] = []

    def event(self, frame):
        super().event(frame)
        record = frame.get(HV)
        if record is None:
            self.readings.append((frame.time, False, None))
        else:
            self.readings.append((frame.time, True, record.payload))

    def custom(self):
        present = [payload for _, seen, payload in self.readings if seen]
        return {
            "event_frames": len(self.readings),
            "hv_present": len(present),
            "hv_absent": len(self.readings) - len(present),
            "last_hv_payload": present[-1] if present else None,
        }


SAMPLE_ANALYSES = {
    cls.name: cls for cls in (EventCounter, GeometryChangeLogger, HVMonitor)
}


def sample_analyses(on_summary=None) -> dict[str, SampleAnalysis]:
    return {name: cls(on_summary) for name, cls in SAMPLE_ANALYSES.items()}
