import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import RecordingListener
from oracles import brute_force_frames, random_streams

from framestop.engine import (
    DefaultFrameFactory,
    Frame,
    FrameListener,
    FrameSource,
    LookupStopSource,
    Record,
    SequentialStopSource,
    Stop,
    StopEngine,
    StopKind,
    StreamDescriptor,
    StreamMode,
    stop_source,
)
from framestop.errors import DuplicateStream, EngineAlreadyRunning, FactoryError, SourceError
from framestop.experiment import ExperimentFrameFactory
from framestop.loop import END, EndReason, finish_loop, run_loop

SEQ, LOOK = StreamMode.SEQUENTIAL, StreamMode.LOOKUP


def recs(stream, *times):
    return [Record(stream, t, f"{stream}@{t}#{i}") for i, t in enumerate(times)]


def make_engine(*streams):
    engine = StopEngine()
    for desc, records in streams:
        engine.register(stop_source(desc, records))
    return engine


def geometry(*times, interest=True):
    return StreamDescriptor("geometry", LOOK, interest), recs("geometry", *times)


def events(*times):
    return StreamDescriptor("event", SEQ, True), recs("event", *times)


def run_all(engine, factory=None):
    out = []
    while (stop := engine.next_stop()) is not None:
        out.append((stop, engine.build_frame(stop, factory)))
    return out


# -- registration ---------------------------------------------------------------


def test_registration_indices():
    engine = StopEngine()
    indices = [
        engine.register(stop_source(StreamDescriptor(name, mode), []))
        for name, mode in (("geometry", LOOK), ("hv", SEQ), ("event", SEQ))
    ]
    assert indices == [0, 1, 2]


def test_duplicate_stream():
    engine = make_engine(events(1))
    with pytest.raises(DuplicateStream):
        engine.register(stop_source(StreamDescriptor("event", SEQ), []))


def test_register_after_start():
    engine = make_engine(events(1))
    engine.next_stop()
    with pytest.raises(EngineAlreadyRunning):
        engine.register(stop_source(StreamDescriptor("hv", SEQ), []))


# -- per-source queries ----------------------------------------------------------


def test_next_active_stop_peeks():
    source = SequentialStopSource(StreamDescriptor("event", SEQ), recs("event", 5, 7))
    assert source.next_active_stop() == Stop.active("event", 5)
    assert source.next_active_stop() == Stop.active("event", 5)
    assert source.consume_active() == Stop.active("event", 5)
    assert source.consume_active() == Stop.active("event", 7)
    assert source.next_active_stop() is None


def test_earliest_passive_initial_geometry():
    source = LookupStopSource(StreamDescriptor("geometry", LOOK), recs("geometry", 0))
    upcoming = Stop.active("event", 5)
    stop = source.earliest_passive_stop(upcoming)
    assert stop == Stop.passive("geometry", 0)
    source.mark_delivered(stop)
    assert source.earliest_passive_stop(upcoming) is None


def test_earliest_passive_enumerates_changes_in_order():
    source = LookupStopSource(StreamDescriptor("geometry", LOOK), recs("geometry", 3, 0, 9))
    upcoming = Stop.active("event", 5)
    brute = sorted(t for t in (3, 0, 9) if t <= 5)
    got = []
    while (stop := source.earliest_passive_stop(upcoming)) is not None:
        got.append(stop.time)
        source.mark_delivered(stop)
    assert got == brute == [0, 3]


def test_sequential_out_of_order_is_source_error():
    engine = make_engine((StreamDescriptor("event", SEQ), recs("event", 5, 3)))
    assert engine.next_stop() == Stop.active("event", 5)
    with pytest.raises(SourceError):
        engine.next_stop()


def test_wrong_stream_record_rejected():
    with pytest.raises(SourceError):
        LookupStopSource(StreamDescriptor("geometry", LOOK), recs("hv", 1))


# -- scheduling ------------------------------------------------------------------


def test_active_passive_scenario():
    engine = make_engine(geometry(0), events(1, 2))
    assert list(engine.stops()) == [
        Stop.passive("geometry", 0),
        Stop.active("event", 1),
        Stop.active("event", 2),
    ]
    assert engine.next_stop() is None


def test_no_passive_changes():
    engine = make_engine(geometry(), events(1, 2))
    assert list(engine.stops()) == [Stop.active("event", 1), Stop.active("event", 2)]


def test_interleaved_passive_and_active():
    streams = [geometry(0, 2), events(1, 3)]
    expected = [stop for stop, _ in brute_force_frames(streams)]
    assert expected == [
        Stop.passive("geometry", 0),
        Stop.active("event", 1),
        Stop.passive("geometry", 2),
        Stop.active("event", 3),
    ]
    assert list(make_engine(*streams).stops()) == expected


def test_equal_time_passive_first():
    engine = make_engine(events(4), geometry(4))
    assert [s.kind for s in engine.stops()] == [StopKind.PASSIVE, StopKind.ACTIVE]


def test_equal_time_actives_by_registration():
    hv = (StreamDescriptor("hv", SEQ), recs("hv", 3))
    engine = make_engine(events(3), hv)
    assert [s.stream for s in engine.stops()] == ["event", "hv"]


def test_passive_after_last_active_not_delivered():
    engine = make_engine(geometry(0, 10), events(5))
    assert list(engine.stops()) == [Stop.passive("geometry", 0), Stop.active("event", 5)]


def test_non_interest_streams_make_no_stops():
    engine = make_engine(geometry(0, interest=False), events(1))
    assert list(engine.stops()) == [Stop.active("event", 1)]


def test_no_driving_stream_ends_immediately():
    engine = make_engine(geometry(0))
    assert engine.next_stop() is None
    assert FrameSource(make_engine(geometry(0))).next() is END


# -- frames ----------------------------------------------------------------------


def test_frame_holds_latest_geometry():
    engine = make_engine(geometry(0), events(5, 7))
    frames = run_all(engine)
    last = frames[-1][1]
    assert last.time == 7
    assert {k: v.time for k, v in last.contents.items()} == {"geometry": 0, "event": 7}


def test_passive_frame_before_any_event_lacks_event():
    engine = make_engine(geometry(0), events(5, 7))
    stop = engine.next_stop()
    frame = engine.build_frame(stop)
    assert stop == Stop.passive("geometry", 0)
    assert "event" not in frame
    assert frame.get("geometry").time == 0


def test_frame_is_frozen_after_build():
    engine = make_engine(events(1))
    frame = engine.build_frame(engine.next_stop())
    assert frame.frozen
    with pytest.raises(FactoryError):
        frame.put(Record("event", 0))


def test_frame_rejects_future_record():
    frame = Frame(Stop.active("event", 3))
    with pytest.raises(ValueError):
        frame.put(Record("event", 4))


def test_build_frame_requires_pending_stop():
    engine = make_engine(events(1, 2))
    stop = engine.next_stop()
    engine.build_frame(stop)
    with pytest.raises(ValueError):
        engine.build_frame(stop)


def test_create_frame_contract():
    for stop in (Stop.active("event", 5), Stop.passive("geometry", 0)):
        frame = DefaultFrameFactory().create_frame(stop)
        assert frame.time == stop.time
        assert frame.driving_stop == stop
        assert dict(frame.contents) == {}


def test_factory_failures_wrapped():
    class Broken:
        def create_frame(self, stop):
            raise RuntimeError("no memory")

    class Wrong:
        def create_frame(self, stop):
            return Frame(Stop.active(stop.stream, stop.time + 1))

    for factory in (Broken(), Wrong()):
        engine = make_engine(events(1))
        with pytest.raises(FactoryError):
            engine.build_frame(engine.next_stop(), factory)


def test_default_and_experiment_factories_agree():
    rng = random.Random(7)
    streams = random_streams(rng, max_records=300)
    plain = run_all(make_engine(*streams))
    custom = run_all(make_engine(*streams), ExperimentFrameFactory())
    assert [(s, dict(f.contents)) for s, f in plain] == [(s, dict(f.contents)) for s, f in custom]


def test_random_frames_match_full_scan():
    rng = random.Random(12345)
    names = [f"s{i}" for i in range(5)]
    streams = []
    for i, name in enumerate(names):
        mode = SEQ if i < 2 else LOOK
        times = [rng.randint(0, 60) for _ in range(40)]
        if mode is SEQ:
            times.sort()
        streams.append((StreamDescriptor(name, mode, True), recs(name, *times)))
    got = run_all(make_engine(*streams))
    assert len(got) > 0
    for stop, frame in got:
        for desc, records in streams:
            candidates = [r for r in records if r.time <= frame.time]
            if not candidates:
                assert desc.name not in frame
                continue
            latest = max(r.time for r in candidates)
            assert frame.get(desc.name).time == latest


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_engine_matches_oracle(seed):
    streams = random_streams(random.Random(seed), max_records=150)
    expected = brute_force_frames(streams)
    got = [(stop, dict(frame.contents)) for stop, frame in run_all(make_engine(*streams))]
    assert got == expected


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_schedule_invariants(seed):
    streams = random_streams(random.Random(seed), max_records=150)
    got = run_all(make_engine(*streams))
    times = [stop.time for stop, _ in got]
    assert times == sorted(times)
    for _, frame in got:
        assert all(r.time <= frame.time for r in frame.contents.values())
    driving = {d.name: len(r) for d, r in streams if d.drives}
    actives = [s.stream for s, _ in got if s.kind is StopKind.ACTIVE]
    assert {name: actives.count(name) for name in driving} == driving


def test_frame_source_through_loop():
    engine = make_engine(geometry(0), events(1, 2))
    trace = RecordingListener()
    run_loop(FrameSource(engine), FrameListener(engine, trace))
    assert [f.driving_stop for f in trace.records] == [
        Stop.passive("geometry", 0),
        Stop.active("event", 1),
        Stop.active("event", 2),
    ]


def test_frame_source_limit_one():
    engine = make_engine(geometry(0), events(1, 2))
    trace = RecordingListener()
    report = run_loop(FrameSource(engine), FrameListener(engine, trace), limit=1)
    assert [f.driving_stop for f in trace.records] == [Stop.passive("geometry", 0)]
    assert report.end_reason is EndReason.LIMIT_REACHED


def test_frame_listener_drives_sources_first():
    order = []

    class Noisy(SequentialStopSource):
        def configure(self, event):
            order.append("source")

    class Analysis(RecordingListener):
        def configure(self, event):
            order.append("analysis")

    engine = StopEngine()
    engine.register(Noisy(StreamDescriptor("event", SEQ), recs("event", 1)))
    root = FrameListener(engine, Analysis())
    run_loop(FrameSource(engine), root)
    finish_loop(root)
    assert order == ["source", "analysis"]
    assert all(s.state is root.state for s in engine.sources)


def test_sequential_non_interest_fills_frames():
    hv = (StreamDescriptor("hv", SEQ, False), recs("hv", 0, 4, 9))
    got = run_all(make_engine(hv, events(3, 5, 10)))
    assert [f.get("hv").time for _, f in got] == [0, 4, 9]


def test_active_frame_carries_its_own_record_on_ties():
    engine = make_engine(events(5, 5))
    got = run_all(engine)
    assert [f.get("event").payload for _, f in got] == ["event@5#0", "event@5#1"]
