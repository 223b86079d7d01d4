"""Frames, streams and stops on top of the record loop.

A :class:`StopEngine` owns one :class:`StopSource` per stream.  Sequential
streams of interest drive the loop with Active stops.  Lookup streams of
interest answer, for the next Active stop, with the earliest record change
at or before it; that change is delivered first as a Passive stop.
Every source, of interest or not, loads its latest record into each frame.
"""

from __future__ import annotations

import bisect
import enum
from collections import deque
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Iterable, Mapping, Protocol

from .errors import (
    DuplicateStream,
    EngineAlreadyRunning,
    FactoryError,
    SourceError,
)
from .loop import END, RecordListener, _Composite


class StreamMode(enum.Enum):
    SEQUENTIAL = "sequential"
    LOOKUP = "lookup"


class StopKind(enum.Enum):
    ACTIVE = "A"
    PASSIVE = "P"


@dataclass(frozen=True)
class StreamDescriptor:
    name: str
    mode: StreamMode
    of_interest: bool = True

    def __post_init__(self):
        if not self.name or any(c.isspace() for c in self.name):
            raise ValueError(f"invalid stream name {self.name!r}")

    @property
    def drives(self) -> bool:
        return self.of_interest and self.mode is StreamMode.SEQUENTIAL


@dataclass(frozen=True)
class Record:
    stream: str
    time: int
    payload: Any = ""

    def __post_init__(self):
        if isinstance(self.time, bool) or not isinstance(self.time, int) or self.time < 0:
            raise ValueError(f"record time must be a non-negative int, got {self.time!r}")


@dataclass(frozen=True)
class Stop:
    stream: str
    time: int
    kind: StopKind
    # position of the triggering record within its stream
    ordinal: int = field(default=-1, compare=False, repr=False)

    @classmethod
    def active(cls, stream: str, time: int, ordinal: int = -1) -> "Stop":
        return cls(stream, time, StopKind.ACTIVE, ordinal)

    @classmethod
    def passive(cls, stream: str, time: int, ordinal: int = -1) -> "Stop":
        return cls(stream, time, StopKind.PASSIVE, ordinal)

    def __str__(self):
        kind = "Active" if self.kind is StopKind.ACTIVE else "Passive"
        return f"{kind}({self.stream}, {self.time})"


class Frame:
    """Snapshot of every stream's latest record at ``time``.

    Writable only until :meth:`freeze`; analyses always see frozen frames.
    """

    def __init__(self, stop: Stop):
        self.time = stop.time
        self.driving_stop = stop
        self._contents: dict[str, Record] = {}
        self._frozen = False

    def put(self, record: Record) -> None:
        if self._frozen:
            raise FactoryError("frame is frozen")
        if record.time > self.time:
            raise ValueError(f"record at {record.time} is later than frame at {self.time}")
        self._contents[record.stream] = record

    def freeze(self) -> None:
        self._frozen = True

    @property
    def frozen(self) -> bool:
        return self._frozen

    @property
    def contents(self) -> Mapping[str, Record]:
        return MappingProxyType(self._contents)

    def get(self, stream: str) -> Record | None:
        return self._contents.get(stream)

    def __contains__(self, stream):
        return stream in self._contents

    def __repr__(self):
        inner = ", ".join(f"{k}@{v.time}" for k, v in sorted(self._contents.items()))
        return f"<{type(self).__name__} {self.driving_stop} {{{inner}}}>"


class FrameFactory(Protocol):
    def create_frame(self, stop: Stop) -> Frame: ...


class DefaultFrameFactory:
    def create_frame(self, stop: Stop) -> Frame:
        return Frame(stop)


class StopSource(RecordListener):
    """Record supply for one stream.

    Also a lifecycle listener, so a :class:`FrameListener` can keep it in
    step with the analyses.
    """

    def __init__(self, descriptor: StreamDescriptor):
        self.descriptor = descriptor

    @property
    def name(self) -> str:
        return self.descriptor.name

    def next_active_stop(self) -> Stop | None:
        return None

    def consume_active(self) -> Stop:
        raise SourceError(f"{self.name}: no active stop to consume")

    def earliest_passive_stop(self, upcoming: Stop) -> Stop | None:
        return None

    def mark_delivered(self, stop: Stop) -> None:
        raise SourceError(f"{self.name}: passive stops are not supported")

    def load(self, frame: Frame) -> None:
        raise NotImplementedError

    def _check(self, record) -> Record:
        if not isinstance(record, Record):
            raise SourceError(f"{self.name}: expected Record, got {type(record).__name__}")
        if record.stream != self.name:
            raise SourceError(f"{self.name}: record belongs to stream {record.stream!r}")
        return record

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"


class SequentialStopSource(StopSource):
    """Stream read once, in order.

    Two cursors walk the same record sequence: one for Active stops and one
    for frame filling.  Records behind both cursors are dropped.
    """

    def __init__(self, descriptor: StreamDescriptor, records: Iterable[Record]):
        if descriptor.mode is not StreamMode.SEQUENTIAL:
            raise ValueError(f"{descriptor.name}: not a sequential stream")
        super().__init__(descriptor)
        self._it = iter(records)
        self._buffer: deque[Record] = deque()
        self._base = 0
        self._read = 0
        self._exhausted = False
        self._last_time: int | None = None
        self._active = 0
        self._fill = 0
        self._latest: Record | None = None
        self._driving: tuple[int, Record] | None = None

    def _get(self, index: int) -> Record | None:
        while self._read <= index:
            if self._exhausted:
                return None
            try:
                record = next(self._it)
            except StopIteration:
                self._exhausted = True
                return None
            except SourceError:
                raise
            except Exception as exc:
                raise SourceError(f"{self.name}: {exc}") from exc
            record = self._check(record)
            if self._last_time is not None and record.time < self._last_time:
                raise SourceError(
                    f"{self.name}: time decreases from {self._last_time} to {record.time}"
                )
            self._last_time = record.time
            self._buffer.append(record)
            self._read += 1
        return self._buffer[index - self._base]

    def _trim(self):
        low = min(self._active, self._fill) if self.descriptor.of_interest else self._fill
        while self._base < low and self._buffer:
            self._buffer.popleft()
            self._base += 1

    def next_active_stop(self) -> Stop | None:
        if not self.descriptor.of_interest:
            return None
        record = self._get(self._active)
        if record is None:
            return None
        return Stop.active(self.name, record.time, self._active)

    def consume_active(self) -> Stop:
        stop = self.next_active_stop()
        if stop is None:
            return super().consume_active()
        self._driving = (self._active, self._get(self._active))
        self._active += 1
        self._trim()
        return stop

    def load(self, frame: Frame) -> None:
        while True:
            record = self._get(self._fill)
            if record is None or record.time > frame.time:
                break
            self._latest = record
            self._fill += 1
        record = self._latest
        stop = frame.driving_stop
        if (stop.stream == self.name and self._driving is not None
                and self._driving[0] == stop.ordinal):
            record = self._driving[1]
        if record is not None:
            frame.put(record)
        self._trim()


class LookupStopSource(StopSource):
    """Preloaded, time-indexed table queried on demand (database role)."""

    def __init__(self, descriptor: StreamDescriptor, records: Iterable[Record]):
        if descriptor.mode is not StreamMode.LOOKUP:
            raise ValueError(f"{descriptor.name}: not a lookup stream")
        super().__init__(descriptor)
        self._table = sorted((self._check(r) for r in records), key=lambda r: r.time)
        self._times = [r.time for r in self._table]
        self._next_passive = 0

    @property
    def records(self) -> tuple[Record, ...]:
        return tuple(self._table)

    def earliest_passive_stop(self, upcoming: Stop) -> Stop | None:
        if not self.descriptor.of_interest or self._next_passive >= len(self._table):
            return None
        record = self._table[self._next_passive]
        if record.time > upcoming.time:
            return None
        return Stop.passive(self.name, record.time, self._next_passive)

    def mark_delivered(self, stop: Stop) -> None:
        if stop.ordinal != self._next_passive:
            raise SourceError(f"{self.name}: passive stop {stop} delivered out of turn")
        self._next_passive += 1

    def load(self, frame: Frame) -> None:
        stop = frame.driving_stop
        if stop.stream == self.name and stop.kind is StopKind.PASSIVE:
            record = self._table[stop.ordinal]
        else:
            index = bisect.bisect_right(self._times, frame.time) - 1
            record = self._table[index] if index >= 0 else None
        if record is not None:
            frame.put(record)


def stop_source(descriptor: StreamDescriptor, records: Iterable[Record]) -> StopSource:
    if descriptor.mode is StreamMode.SEQUENTIAL:
        return SequentialStopSource(descriptor, records)
    return LookupStopSource(descriptor, records)


class StopEngine:
    """Merge stop sources into one time-ordered sequence of stops and frames."""

    def __init__(self):
        self._sources: list[StopSource] = []
        self._index: dict[str, int] = {}
        self._running = False
        self._unbuilt: Stop | None = None

    @property
    def sources(self) -> tuple[StopSource, ...]:
        return tuple(self._sources)

    @property
    def running(self) -> bool:
        return self._running

    def register(self, source: StopSource) -> int:
        if self._running:
            raise EngineAlreadyRunning("cannot register sources once scheduling has started")
        name = source.descriptor.name
        if name in self._index:
            raise DuplicateStream(name)
        self._index[name] = len(self._sources)
        self._sources.append(source)
        return self._index[name]

    def registration_index(self, stream: str) -> int:
        return self._index[stream]

    def next_stop(self) -> Stop | None:
        self._running = True
        active = None
        active_source = None
        for source in self._sources:
            if not source.descriptor.drives:
                continue
            stop = source.next_active_stop()
            # strict < keeps the lower registration index on ties
            if stop is not None and (active is None or stop.time < active.time):
                active, active_source = stop, source
        if active is None:
            self._unbuilt = None
            return None

        passive = None
        passive_source = None
        for source in self._sources:
            if not source.descriptor.of_interest:
                continue
            stop = source.earliest_passive_stop(active)
            if stop is None or stop.time > active.time:
                continue
            if passive is None or stop.time < passive.time:
                passive, passive_source = stop, source
        if passive is not None:
            passive_source.mark_delivered(passive)
            self._unbuilt = passive
            return passive

        stop = active_source.consume_active()
        self._unbuilt = stop
        return stop

    def build_frame(self, stop: Stop, factory: FrameFactory | None = None) -> Frame:
        """Create a frame for ``stop`` and let every source load its record.

        ``stop`` must be the stop most recently returned by :meth:`next_stop`.
        """
        if stop is not self._unbuilt:
            raise ValueError(f"{stop} is not the pending stop")
        self._unbuilt = None
        if factory is None:
            factory = DefaultFrameFactory()
        try:
            frame = factory.create_frame(stop)
        except FactoryError:
            raise
        except Exception as exc:
            raise FactoryError(str(exc)) from exc
        if not isinstance(frame, Frame) or frame.time != stop.time \
                or frame.driving_stop != stop or frame.contents:
            raise FactoryError(f"factory returned an unusable frame for {stop}")
        for source in self._sources:
            source.load(frame)
        frame.freeze()
        return frame

    def stops(self):
        """Iterate the remaining schedule without building frames."""
        while (stop := self.next_stop()) is not None:
            yield stop


class FrameSource:
    """Record-loop source whose records are filled frames."""

    def __init__(self, engine: StopEngine, factory: FrameFactory | None = None):
        self.engine = engine
        self.factory = factory or DefaultFrameFactory()

    def next(self):
        stop = self.engine.next_stop()
        if stop is None:
            return END
        return self.engine.build_frame(stop, self.factory)


def frame_source(engine: StopEngine, factory: FrameFactory | None = None) -> FrameSource:
    return FrameSource(engine, factory)


class FrameListener(_Composite):
    """Two-phase listener: stop sources first, in registration order, then analyses."""

    def __init__(self, engine: StopEngine, analysis):
        super().__init__((*engine.sources, analysis))
        self.analysis = analysis
