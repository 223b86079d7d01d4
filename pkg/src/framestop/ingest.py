"""Tab-separated record files, file-backed sources and the stop trace format.

Record line::

    <stream>\\t<time>\\t<payload>\\n

Blank lines and lines starting with ``#`` are ignored.  Trace line::

    <ordinal>\\t<A|P>\\t<stream>\\t<time>\\t<stream:recTime,...>\\n
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator

from .engine import Frame, Record, StopKind, StopSource, StreamDescriptor, StreamMode, stop_source
from .errors import OrderError, ParseError, SourceError
from .loop import END, RecordListener

_TIME = re.compile(r"[0-9]+\Z")


def parse_record_line(line: str, lineno: int = 1, path=None) -> Record:
    parts = line.split("\t", 2)
    if len(parts) != 3:
        raise ParseError(lineno, "expected <stream>\\t<time>\\t<payload>", path)
    stream, time, payload = parts
    if not stream or any(c.isspace() for c in stream):
        raise ParseError(lineno, f"invalid stream name {stream!r}", path)
    if not _TIME.match(time):
        raise ParseError(lineno, f"time must be a non-negative integer, got {time!r}", path)
    if "\r" in payload:
        raise ParseError(lineno, "carriage return in payload", path)
    return Record(stream, int(time), payload)


def iter_record_file(path, sequential: bool = False, stream: str | None = None) -> Iterator[Record]:
    """Yield records from ``path`` lazily.

    ``sequential`` enforces non-decreasing times; ``stream`` rejects records
    of any other stream.
    """
    last_time = None
    lineno = 0
    with open(path, encoding="utf-8", newline="") as fh:
        try:
            for lineno, raw in enumerate(fh, 1):
                line = raw[:-1] if raw.endswith("\n") else raw
                if not line or line.startswith("#"):
                    continue
                record = parse_record_line(line, lineno, path)
                if stream is not None and record.stream != stream:
                    raise ParseError(
                        lineno, f"record for stream {record.stream!r} in a {stream!r} file", path
                    )
                if sequential and last_time is not None and record.time < last_time:
                    raise OrderError(lineno, path=path)
                last_time = record.time
                yield record
        except UnicodeDecodeError as exc:
            raise ParseError(lineno + 1, f"invalid UTF-8 ({exc.reason})", path) from exc


def parse_record_file(path, sequential: bool = False, stream: str | None = None) -> list[Record]:
    return list(iter_record_file(path, sequential, stream))


def format_record(record: Record) -> str:
    payload = record.payload
    if not isinstance(payload, str):
        raise ValueError("only text payloads can be written to a record file")
    if "\n" in payload or "\r" in payload:
        raise ValueError("payload must not contain line breaks")
    return f"{record.stream}\t{record.time}\t{payload}\n"


def write_record_file(path, records: Iterable[Record]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(format_record(record))


class RecordFileSource:
    """Record-loop source reading a record file one line at a time."""

    def __init__(self, path, sequential: bool = False):
        self.path = path
        self._it = iter_record_file(path, sequential)
        self._done = False

    def next(self):
        if self._done:
            return END
        try:
            return next(self._it)
        except StopIteration:
            self._done = True
            return END
        except OSError as exc:
            raise SourceError(f"{self.path}: {exc}") from exc


def file_stop_source(path, descriptor: StreamDescriptor) -> StopSource:
    """Parse ``path`` eagerly and wrap it as a stop source for ``descriptor``."""
    sequential = descriptor.mode is StreamMode.SEQUENTIAL
    records = parse_record_file(path, sequential=sequential, stream=descriptor.name)
    return stop_source(descriptor, records)


@dataclass(frozen=True)
class StopTraceEntry:
    ordinal: int
    kind: StopKind
    stream: str
    time: int
    contents: tuple[tuple[str, int], ...]

    @classmethod
    def from_frame(cls, ordinal: int, frame: Frame) -> "StopTraceEntry":
        stop = frame.driving_stop
        contents = tuple(sorted((name, rec.time) for name, rec in frame.contents.items()))
        return cls(ordinal, stop.kind, stop.stream, stop.time, contents)

    def to_line(self) -> str:
        contents = ",".join(f"{name}:{time}" for name, time in self.contents)
        return f"{self.ordinal}\t{self.kind.value}\t{self.stream}\t{self.time}\t{contents}\n"

    @classmethod
    def parse(cls, line: str) -> "StopTraceEntry":
        ordinal, kind, stream, time, contents = line.rstrip("\n").split("\t")
        pairs = []
        if contents:
            for item in contents.split(","):
                name, _, rec_time = item.rpartition(":")
                pairs.append((name, int(rec_time)))
        return cls(int(ordinal), StopKind(kind), stream, int(time), tuple(pairs))


def format_trace(entries: Iterable[StopTraceEntry]) -> str:
    return "".join(entry.to_line() for entry in entries)


class TraceRecorder(RecordListener):
    """Listener that records one :class:`StopTraceEntry` per frame."""

    def __init__(self):
        self.entries: list[StopTraceEntry] = []

    def configure(self, event):
        super().configure(event)
        self.entries = []

    def record_supplied(self, event):
        self.entries.append(StopTraceEntry.from_frame(len(self.entries) + 1, event.record))
