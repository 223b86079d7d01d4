"""End-to-end run: file sources -> stop engine -> listener tree -> trace and summaries."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from .config import RunConfig, predicate
from .engine import FrameListener, FrameSource, StopEngine
from .experiment import (
    SAMPLE_ANALYSES,
    AnalysisSummary,
    ExperimentFrameFactory,
    ExperimentPlugin,
    SampleAnalysis,
    format_summaries,
)
from .ingest import StopTraceEntry, TraceRecorder, file_stop_source, format_trace
from .loop import (
    Branch,
    ConfigurationEvent,
    FunctionFilter,
    LoopReport,
    Sequence,
    _Composite,
    conditional,
    finish_loop,
    run_loop,
)


@dataclass
class PipelineResult:
    report: LoopReport
    trace: list[StopTraceEntry]
    summaries: list[tuple[str, AnalysisSummary]]

    @property
    def trace_text(self) -> str:
        return format_trace(self.trace)

    @property
    def summary_text(self) -> str:
        return format_summaries(self.summaries)


def build_pipeline(node, analyses=None):
    """Turn a validated pipeline description into a listener tree.

    Returns ``(listener, analyses)`` where ``analyses`` lists every sample
    analysis as ``(label, analysis)`` in tree order.  Repeated analyses get
    ``#2``, ``#3``... suffixes.
    """
    if analyses is None:
        analyses = []
    if isinstance(node, str):
        analysis: SampleAnalysis = SAMPLE_ANALYSES[node]()
        count = sum(1 for label, a in analyses if a.name == node)
        analyses.append((node if count == 0 else f"{node}#{count + 1}", analysis))
        return ExperimentPlugin(analysis), analyses
    if isinstance(node, list):
        return Sequence([build_pipeline(child, analyses)[0] for child in node]), analyses
    (kind, body), = node.items()
    if kind == "sequence":
        return build_pipeline(list(body), analyses)
    if kind == "branch":
        branches = []
        for child in body:
            listener = build_pipeline(child, analyses)[0]
            if not isinstance(listener, _Composite):
                listener = Sequence([listener])
            branches.append(listener)
        return Branch(branches), analyses
    name = body["predicate"]
    test = FunctionFilter(predicate(name), name)
    then = body["then"]
    downstream = build_pipeline(then if isinstance(then, list) else [then], analyses)[0]
    return conditional(test, downstream), analyses


def build_engine(config: RunConfig) -> StopEngine:
    engine = StopEngine()
    for spec in config.sources:
        engine.register(file_stop_source(spec.path, spec.descriptor))
    return engine


def execute(config: RunConfig) -> PipelineResult:
    """Run the configured pipeline in memory; nothing is written."""
    engine = build_engine(config)
    recorder = TraceRecorder()
    tree, analyses = build_pipeline(config.pipeline)
    root = FrameListener(engine, Sequence([recorder, tree]))
    report = run_loop(
        FrameSource(engine, ExperimentFrameFactory()),
        root,
        limit=config.record_limit,
        config=ConfigurationEvent(),
    )
    finish_loop(root)
    summaries = [(label, analysis.last_summary) for label, analysis in analyses]
    return PipelineResult(report, recorder.entries, summaries)


def _write_outputs(outputs: list[tuple[Path, str]]) -> None:
    staged = []
    written = []
    try:
        for path, text in outputs:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_name(f".{path.name}.tmp")
            staged.append((tmp, path))
            with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        for tmp, path in staged:
            os.replace(tmp, path)
            written.append(path)
    except BaseException:
        for tmp, _ in staged:
            if tmp.exists():
                tmp.unlink()
        for path in written:
            path.unlink(missing_ok=True)
        raise


def run_pipeline(config: RunConfig) -> PipelineResult:
    """Run the pipeline and write the configured trace and summary files.

    Outputs appear only if the whole run succeeds.
    """
    result = execute(config)
    outputs = []
    if config.trace_output is not None:
        outputs.append((config.trace_output, result.trace_text))
    if config.summary_output is not None:
        outputs.append((config.summary_output, result.summary_text))
    _write_outputs(outputs)
    return result
