"""Run configuration, read from a YAML file.

Example::

    sources:
      - {path: geometry.tsv, stream: geometry, mode: lookup, interest: true}
      - {path: events.tsv, stream: event, mode: sequential}
    pipeline:
      - event_counter
      - branch:
          - geometry_change_logger
          - conditional:
              predicate: even-time
              then: [hv_monitor]
    limit: null
    trace: out/trace.tsv
    summary: out/summary.txt

Relative paths are resolved against the directory holding the config file.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from .engine import StopKind, StreamDescriptor, StreamMode
from .errors import ConfigError
from .experiment import SAMPLE_ANALYSES

_TOP_KEYS = {"sources", "pipeline", "limit", "trace", "summary"}
_SOURCE_KEYS = {"path", "stream", "mode", "interest"}


@dataclass(frozen=True)
class SourceSpec:
    path: Path
    stream: str
    mode: StreamMode
    of_interest: bool = True

    @property
    def descriptor(self) -> StreamDescriptor:
        return StreamDescriptor(self.stream, self.mode, self.of_interest)


@dataclass(frozen=True)
class RunConfig:
    sources: tuple[SourceSpec, ...]
    pipeline: Any = ("event_counter",)
    record_limit: int | None = None
    trace_output: Path | None = None
    summary_output: Path | None = None

    def with_limit(self, limit: int | None) -> "RunConfig":
        return dataclasses.replace(self, record_limit=limit)


def _predicate_fn(name: str):
    if name == "accept-all":
        return lambda frame: True
    if name == "veto-all":
        return lambda frame: False
    if name == "even-time":
        return lambda frame: frame.time % 2 == 0
    if name == "odd-time":
        return lambda frame: frame.time % 2 == 1
    if name.startswith("stream="):
        stream = name[len("stream="):]
        return lambda frame: frame.driving_stop.stream == stream
    if name.startswith("kind="):
        kind = {"active": StopKind.ACTIVE, "passive": StopKind.PASSIVE}.get(name[len("kind="):])
        if kind is not None:
            return lambda frame: frame.driving_stop.kind is kind
    return None


def predicate(name: str):
    """Return the frame predicate registered under ``name``."""
    fn = _predicate_fn(name)
    if fn is None:
        raise ConfigError(f"unknown predicate {name!r}")
    fn.__name__ = name
    return fn


def check_pipeline(node, where="pipeline"):
    if isinstance(node, str):
        if node not in SAMPLE_ANALYSES:
            raise ConfigError(f"{where}: unknown analysis {node!r}")
        return
    if isinstance(node, list):
        if not node:
            raise ConfigError(f"{where}: empty sequence")
        for i, child in enumerate(node):
            check_pipeline(child, f"{where}[{i}]")
        return
    if not isinstance(node, dict) or len(node) != 1:
        raise ConfigError(f"{where}: expected an analysis name, a list or a one-key mapping")
    (kind, body), = node.items()
    if kind in ("sequence", "branch"):
        if not isinstance(body, list) or not body:
            raise ConfigError(f"{where}.{kind}: expected a non-empty list")
        for i, child in enumerate(body):
            check_pipeline(child, f"{where}.{kind}[{i}]")
    elif kind == "conditional":
        if not isinstance(body, dict) or set(body) != {"predicate", "then"}:
            raise ConfigError(f"{where}.conditional: needs exactly 'predicate' and 'then'")
        if not isinstance(body["predicate"], str):
            raise ConfigError(f"{where}.conditional.predicate: expected a name")
        predicate(body["predicate"])
        check_pipeline(body["then"], f"{where}.conditional.then")
    else:
        raise ConfigError(f"{where}: unknown node kind {kind!r}")


def _limit(value, where="limit"):
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise ConfigError(f"{where}: expected a non-negative integer")
    return value


def parse_config(data, base_dir=".") -> RunConfig:
    base_dir = Path(base_dir)
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")

    raw_sources = data.get("sources")
    if not isinstance(raw_sources, list) or not raw_sources:
        raise ConfigError("sources: expected a non-empty list")
    sources = []
    seen = set()
    for i, item in enumerate(raw_sources):
        where = f"sources[{i}]"
        if not isinstance(item, dict):
            raise ConfigError(f"{where}: expected a mapping")
        unknown = set(item) - _SOURCE_KEYS
        if unknown:
            raise ConfigError(f"{where}: unknown keys: {', '.join(sorted(unknown))}")
        for key in ("path", "stream", "mode"):
            if not isinstance(item.get(key), str) or not item[key]:
                raise ConfigError(f"{where}.{key}: expected a non-empty string")
        try:
            mode = StreamMode(item["mode"].lower())
        except ValueError:
            raise ConfigError(f"{where}.mode: expected 'sequential' or 'lookup'") from None
        interest = item.get("interest", True)
        if not isinstance(interest, bool):
            raise ConfigError(f"{where}.interest: expected true or false")
        stream = item["stream"]
        if stream in seen:
            raise ConfigError(f"{where}: duplicate stream {stream!r}")
        seen.add(stream)
        try:
            spec = SourceSpec(base_dir / item["path"], stream, mode, interest)
            spec.descriptor
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
        sources.append(spec)
    if not any(s.mode is StreamMode.SEQUENTIAL and s.of_interest for s in sources):
        raise ConfigError("sources: need at least one sequential source of interest")

    pipeline = data.get("pipeline", ["event_counter"])
    check_pipeline(pipeline)

    outputs = {}
    for key in ("trace", "summary"):
        value = data.get(key)
        if value is not None and (not isinstance(value, str) or not value):
            raise ConfigError(f"{key}: expected a path")
        outputs[key] = None if value is None else base_dir / value

    return RunConfig(
        sources=tuple(sources),
        pipeline=pipeline,
        record_limit=_limit(data.get("limit")),
        trace_output=outputs["trace"],
        summary_output=outputs["summary"],
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({str(exc).splitlines()[0]})") from None
    return parse_config(data, path.parent)
