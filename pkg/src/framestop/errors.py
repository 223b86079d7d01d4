"""Exception hierarchy shared by every layer of the framework."""


class FrameStopError(Exception):
    """Base class for all errors raised by framestop."""


class IllegalTransition(FrameStopError):
    def __init__(self, state, kind):
        super().__init__(f"illegal transition: {kind.value} while {state.value}")
        self.state = state
        self.kind = kind


class SourceError(FrameStopError):
    """A record or stop source could not supply data."""


class ParseError(SourceError):
    def __init__(self, line, detail, path=None):
        where = f"{path}:{line}" if path is not None else f"line {line}"
        super().__init__(f"{where}: {detail}")
        self.line = line
        self.detail = detail
        self.path = path


class OrderError(ParseError):
    def __init__(self, line, detail="time decreases in a sequential stream", path=None):
        super().__init__(line, detail, path)


class DuplicateStream(FrameStopError):
    def __init__(self, name):
        super().__init__(f"stream {name!r} is already registered")
        self.name = name


class EngineAlreadyRunning(FrameStopError):
    pass


class FactoryError(FrameStopError):
    pass


class ConfigError(FrameStopError):
    pass
