"""Frame/stream/stop analysis framework.

Records from several time-keyed streams are merged into frames, one frame
per stop, and delivered to lifecycle-managed listeners.
"""

from .engine import (
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
    StopSource,
    StreamDescriptor,
    StreamMode,
    frame_source,
    stop_source,
)
from .errors import (
    ConfigError,
    DuplicateStream,
    EngineAlreadyRunning,
    FactoryError,
    FrameStopError,
    IllegalTransition,
    OrderError,
    ParseError,
    SourceError,
)
from .loop import (
    END,
    Abort,
    Branch,
    Conditional,
    ConfigurationEvent,
    EndReason,
    Filter,
    ListenerState,
    ListSource,
    LoopMessage,
    LoopReport,
    MessageKind,
    RecordEvent,
    RecordListener,
    RecordSuppliedEvent,
    Sequence,
    Veto,
    branch,
    conditional,
    dispatch_message,
    finish_loop,
    run_loop,
    sequence,
)

__version__ = "0.1.0"
