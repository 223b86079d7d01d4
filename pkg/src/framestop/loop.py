"""Generic record-processing loop.

Listeners follow a fixed lifecycle::

    dormant --configure--> configured --recordSupplied--> processing
    configured/processing --suspend--> suspended
    suspended --resume|reconfigure--> configured
    suspended --finish--> dormant

:func:`dispatch_message` is the only place a listener's state changes.  The
composites :class:`Sequence`, :class:`Branch` and :class:`Conditional` are
themselves listeners and forward every message to their children through it.
"""

from __future__ import annotations

import enum
import itertools
from contextlib import contextmanager
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Callable, Iterable, Iterator, Mapping, Protocol

from .errors import IllegalTransition, SourceError


class ListenerState(enum.Enum):
    DORMANT = "dormant"
    CONFIGURED = "configured"
    PROCESSING = "processing"
    SUSPENDED = "suspended"


class MessageKind(enum.Enum):
    CONFIGURE = "configure"
    RECONFIGURE = "reconfigure"
    RESUME = "resume"
    SUSPEND = "suspend"
    FINISH = "finish"
    RECORD_SUPPLIED = "recordSupplied"


class EndReason(enum.Enum):
    SOURCE_EXHAUSTED = "source-exhausted"
    LIMIT_REACHED = "limit-reached"
    ABORTED = "aborted"


_S = ListenerState
_M = MessageKind

TRANSITIONS: Mapping[tuple[ListenerState, MessageKind], ListenerState] = MappingProxyType({
    (_S.DORMANT, _M.CONFIGURE): _S.CONFIGURED,
    (_S.CONFIGURED, _M.RECORD_SUPPLIED): _S.PROCESSING,
    (_S.PROCESSING, _M.RECORD_SUPPLIED): _S.PROCESSING,
    (_S.PROCESSING, _M.SUSPEND): _S.SUSPENDED,
    # zero-record loops must still be able to suspend
    (_S.CONFIGURED, _M.SUSPEND): _S.SUSPENDED,
    (_S.SUSPENDED, _M.RESUME): _S.CONFIGURED,
    (_S.SUSPENDED, _M.RECONFIGURE): _S.CONFIGURED,
    (_S.SUSPENDED, _M.FINISH): _S.DORMANT,
})

HANDLER_NAMES = MappingProxyType({
    _M.CONFIGURE: "configure",
    _M.RECONFIGURE: "reconfigure",
    _M.RESUME: "resume",
    _M.SUSPEND: "suspend",
    _M.FINISH: "finish",
    _M.RECORD_SUPPLIED: "record_supplied",
})


@dataclass(frozen=True)
class ConfigurationEvent:
    parameters: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "parameters", MappingProxyType(dict(self.parameters)))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "ConfigurationEvent":
        params: dict[str, str] = {}
        for name, value in pairs:
            if name in params:
                raise ValueError(f"duplicate parameter {name!r}")
            params[name] = value
        return cls(params)

    def get(self, name: str, default: str | None = None) -> str | None:
        return self.parameters.get(name, default)


@dataclass(frozen=True)
class RecordEvent:
    records_supplied: int = 0
    loop_id: Any = None


@dataclass(frozen=True)
class RecordSuppliedEvent:
    record: Any
    sequence_number: int

    @property
    def frame(self):
        return self.record


_PAYLOAD_TYPES = {
    _M.CONFIGURE: ConfigurationEvent,
    _M.RECONFIGURE: ConfigurationEvent,
    _M.RESUME: RecordEvent,
    _M.SUSPEND: RecordEvent,
    _M.FINISH: RecordEvent,
    _M.RECORD_SUPPLIED: RecordSuppliedEvent,
}


@dataclass(frozen=True)
class LoopMessage:
    kind: MessageKind
    payload: Any

    def __post_init__(self):
        expected = _PAYLOAD_TYPES[self.kind]
        if not isinstance(self.payload, expected):
            raise TypeError(
                f"{self.kind.value} carries {expected.__name__}, "
                f"got {type(self.payload).__name__}"
            )


@dataclass(frozen=True)
class LoopReport:
    records_supplied: int
    listeners_invoked: int
    veto_count: int
    end_reason: EndReason
    limit: int | None = None

    def __post_init__(self):
        if self.end_reason is EndReason.LIMIT_REACHED:
            assert self.limit is not None and self.records_supplied <= self.limit


class LoopSignal(Exception):
    """Control-flow signal raised by a listener while handling a record."""


class Veto(LoopSignal):
    """Stop the enclosing sequence from handling the current record."""


class Abort(LoopSignal):
    """End the whole loop after the current record."""


class RecordListener:
    """Base listener; every handler is a no-op apart from storing parameters.

    Subclasses override the handlers they care about.  Handlers are called
    only via :func:`dispatch_message`, which owns ``state``.
    """

    state: ListenerState = ListenerState.DORMANT
    records_handled: int = 0
    parameters: Mapping[str, str] = MappingProxyType({})
    children: tuple = ()

    def configure(self, event: ConfigurationEvent) -> None:
        self.parameters = event.parameters

    def reconfigure(self, event: ConfigurationEvent) -> None:
        # new parameters replace the old ones wholesale
        self.parameters = event.parameters

    def resume(self, event: RecordEvent) -> None:
        pass

    def suspend(self, event: RecordEvent) -> None:
        pass

    def finish(self, event: RecordEvent) -> None:
        pass

    def record_supplied(self, event: RecordSuppliedEvent) -> None:
        pass


def dispatch_message(listener, message: LoopMessage) -> ListenerState:
    """Apply one lifecycle transition to ``listener`` and run its handler.

    Illegal (state, message) pairs raise :class:`IllegalTransition` without
    touching the listener.  A handler that raises a :class:`LoopSignal` still
    counts as delivered, so the transition is committed before re-raising.
    """
    current = listener.state
    new_state = TRANSITIONS.get((current, message.kind))
    if new_state is None:
        raise IllegalTransition(current, message.kind)
    handler = getattr(listener, HANDLER_NAMES[message.kind])
    try:
        handler(message.payload)
    except LoopSignal:
        _commit(listener, new_state, message.kind)
        raise
    _commit(listener, new_state, message.kind)
    return new_state


def _commit(listener, new_state, kind):
    listener.state = new_state
    if kind is MessageKind.RECORD_SUPPLIED:
        listener.records_handled += 1


def walk(listener) -> Iterator:
    """Yield ``listener`` and every listener nested inside it, depth first."""
    yield listener
    for child in getattr(listener, "children", ()):
        yield from walk(child)


def _total_vetoes(listener) -> int:
    return sum(getattr(node, "vetoes", 0) for node in walk(listener))


def _leaf_invocations(listener) -> int:
    return sum(
        node.records_handled for node in walk(listener) if not getattr(node, "children", ())
    )


class _Composite(RecordListener):
    def __init__(self, children):
        children = tuple(children)
        if not children:
            raise ValueError(f"{type(self).__name__} needs at least one listener")
        self.children = children
        self.vetoes = 0

    def _forward(self, message: LoopMessage) -> None:
        for child in self.children:
            dispatch_message(child, message)

    def configure(self, event):
        super().configure(event)
        self._forward(LoopMessage(MessageKind.CONFIGURE, event))

    def reconfigure(self, event):
        super().reconfigure(event)
        self._forward(LoopMessage(MessageKind.RECONFIGURE, event))

    def resume(self, event):
        self._forward(LoopMessage(MessageKind.RESUME, event))

    def suspend(self, event):
        self._forward(LoopMessage(MessageKind.SUSPEND, event))

    def finish(self, event):
        self._forward(LoopMessage(MessageKind.FINISH, event))

    def record_supplied(self, event):
        self._forward(LoopMessage(MessageKind.RECORD_SUPPLIED, event))

    def __repr__(self):
        return f"{type(self).__name__}({list(self.children)!r})"


class Sequence(_Composite):
    """Run children one after another; a veto skips the remaining children."""

    def record_supplied(self, event):
        message = LoopMessage(MessageKind.RECORD_SUPPLIED, event)
        for child in self.children:
            try:
                dispatch_message(child, message)
            except Veto:
                self.vetoes += 1
                return


class Branch(_Composite):
    """Run independent branches; a veto in one branch never reaches the others."""

    def record_supplied(self, event):
        message = LoopMessage(MessageKind.RECORD_SUPPLIED, event)
        for child in self.children:
            try:
                dispatch_message(child, message)
            except Veto:
                self.vetoes += 1


class Filter(RecordListener):
    """Listener that accepts or vetoes each record.

    Subclasses implement :meth:`accept`.
    """

    def accept(self, event: RecordSuppliedEvent) -> bool:
        raise NotImplementedError

    def record_supplied(self, event):
        if not self.accept(event):
            raise Veto()


class FunctionFilter(Filter):
    def __init__(self, fn: Callable[[Any], bool], name: str | None = None):
        self.fn = fn
        self.name = name or getattr(fn, "__name__", "predicate")

    def accept(self, event):
        return bool(self.fn(event.record))

    def __repr__(self):
        return f"FunctionFilter({self.name})"


class Conditional(_Composite):
    """Forward records to ``downstream`` only when ``predicate`` accepts them.

    Lifecycle messages always reach both children.
    """

    def __init__(self, predicate, downstream):
        super().__init__((predicate, downstream))
        self.predicate = predicate
        self.downstream = downstream

    def record_supplied(self, event):
        message = LoopMessage(MessageKind.RECORD_SUPPLIED, event)
        try:
            dispatch_message(self.predicate, message)
        except Veto:
            self.vetoes += 1
            return
        dispatch_message(self.downstream, message)


def sequence(listeners) -> Sequence:
    return Sequence(listeners)


def branch(sequences) -> Branch:
    return Branch(sequences)


def conditional(predicate, downstream) -> Conditional:
    if callable(predicate) and not isinstance(predicate, RecordListener):
        predicate = FunctionFilter(predicate)
    return Conditional(predicate, downstream)


class _End:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "END"

    def __bool__(self):
        return False


END = _End()


class RecordSource(Protocol):
    def next(self) -> Any:
        """Return the next record, or :data:`END` once exhausted (repeatedly)."""


class ListSource:
    """In-memory source; also answers indexed fetches for interactive use."""

    def __init__(self, records: Iterable[Any] = ()):
        self._records = list(records)
        self._pos = 0

    def next(self):
        if self._pos >= len(self._records):
            return END
        record = self._records[self._pos]
        self._pos += 1
        return record

    def record_at(self, index: int):
        if index < 0:
            raise ValueError("index must be non-negative")
        if index >= len(self._records):
            return END
        return self._records[index]

    def __len__(self):
        return len(self._records)


class IterableSource:
    """Sequential source over any iterable; iteration errors become SourceError."""

    def __init__(self, iterable: Iterable[Any]):
        self._it = iter(iterable)
        self._done = False

    def next(self):
        if self._done:
            return END
        try:
            return next(self._it)
        except StopIteration:
            self._done = True
            return END
        except SourceError:
            raise
        except Exception as exc:
            raise SourceError(str(exc)) from exc


_loop_ids = itertools.count(1)


def run_loop(
    source,
    listener,
    limit: int | None = None,
    config: ConfigurationEvent | None = None,
    continuation: MessageKind = MessageKind.RESUME,
) -> LoopReport:
    """Drive records from ``source`` to ``listener`` until exhaustion or ``limit``.

    A Dormant listener is configured with ``config``.  A Suspended listener is
    restarted with ``continuation`` (RESUME, or RECONFIGURE with ``config``).
    The listener is always suspended on the way out, including when the
    source fails.
    """
    if limit is not None and limit < 0:
        raise ValueError("limit must be non-negative")
    if config is None:
        config = ConfigurationEvent()
    loop_id = next(_loop_ids)

    state = listener.state
    if state is ListenerState.DORMANT:
        start = LoopMessage(MessageKind.CONFIGURE, config)
    elif state is ListenerState.SUSPENDED:
        if continuation is MessageKind.RESUME:
            start = LoopMessage(MessageKind.RESUME, RecordEvent(0, loop_id))
        elif continuation is MessageKind.RECONFIGURE:
            start = LoopMessage(MessageKind.RECONFIGURE, config)
        else:
            raise ValueError(f"cannot continue a loop with {continuation.value}")
    else:
        raise IllegalTransition(state, MessageKind.CONFIGURE)

    vetoes_before = _total_vetoes(listener)
    invoked_before = _leaf_invocations(listener)
    dispatch_message(listener, start)

    supplied = 0
    top_vetoes = 0
    try:
        while True:
            if limit is not None and supplied >= limit:
                end = EndReason.LIMIT_REACHED
                break
            try:
                record = source.next()
            except SourceError:
                raise
            except Exception as exc:
                raise SourceError(str(exc)) from exc
            if record is END:
                end = EndReason.SOURCE_EXHAUSTED
                break
            supplied += 1
            message = LoopMessage(
                MessageKind.RECORD_SUPPLIED, RecordSuppliedEvent(record, supplied)
            )
            try:
                dispatch_message(listener, message)
            except Veto:
                top_vetoes += 1
            except Abort:
                end = EndReason.ABORTED
                break
    except BaseException:
        if listener.state in (ListenerState.CONFIGURED, ListenerState.PROCESSING):
            dispatch_message(
                listener, LoopMessage(MessageKind.SUSPEND, RecordEvent(supplied, loop_id))
            )
        raise

    dispatch_message(listener, LoopMessage(MessageKind.SUSPEND, RecordEvent(supplied, loop_id)))
    return LoopReport(
        records_supplied=supplied,
        listeners_invoked=_leaf_invocations(listener) - invoked_before,
        veto_count=_total_vetoes(listener) - vetoes_before + top_vetoes,
        end_reason=end,
        limit=limit,
    )


def finish_loop(listener) -> None:
    """Send Finish to a suspended listener, returning it to Dormant."""
    dispatch_message(
        listener, LoopMessage(MessageKind.FINISH, RecordEvent(listener.records_handled))
    )


@contextmanager
def listener_scope(*listeners):
    """Scope for listeners that must end Dormant; checked only under ``__debug__``."""
    yield listeners
    if __debug__:
        for listener in listeners:
            assert listener.state is ListenerState.DORMANT, (
                f"{listener!r} left scope while {listener.state.value}"
            )
