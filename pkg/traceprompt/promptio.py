"""promptio
Dataset reading and writing, and prompt record assembly.

Dataset layout: one directory per episode holding frame_%05d.png
(8-bit RGB) and episode.json {"instruction": str, "actions": [[...]...]}.

loadEpisode(path) -> Episode
writeEpisode(episode, path)
loadFrames(path) -> frames
    Frame sequences without metadata (stream input)

buildPromptRecord(step, episode, paths) -> PromptRecord
formatTextTrace(traces, precision) -> str
    The text form of a trace set

writeAnnotatedDataset(annotated, out, config) -> manifest
writeEpisodeOutput(annotated, out, config, bins), writeManifest(...)
    The same in two steps, one episode at a time
readPromptRecords(path) -> records
writeStreamResults(out, outputs, config)
"""

import json
import logging
import math
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import (
    Any,
    Callable,
    Dict,
    Iterable,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np
from PIL import Image

from . import builtin, core
from .actions import BinTable, encodeAction
from .annotate import AnnotatedEpisode, StepAnnotation
from .core import Episode, Frame, PipelineConfig, PromptTemplates, TraceSet

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

FRAME_RE = re.compile(r'^frame_(\d{5})\.png$')
OVERLAY_RE = re.compile(r'^overlay_(\d{5})\.png$')

TRACE_DECIMALS = 3


# File helpers


def atomicWrite(path: Path, write: Callable[[Path], None]) -> None:
    """Writes through a temporary sibling then renames it over path, so
    an interrupted run never leaves a half-written file in place.
    """
    tmp = path.with_name(f".{path.name}.tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        write(tmp)
        os.replace(tmp, path)
    except OSError as err:
        raise builtin.OutputError(f"Write failed: {err}", context=str(path)) from err


def writeText(path: Path, text: str) -> None:
    atomicWrite(path, lambda tmp: tmp.write_text(text, encoding='utf-8'))


def writePng(path: Path, frame: Frame) -> None:
    image = Image.fromarray(np.ascontiguousarray(frame.pixels))
    atomicWrite(path, lambda tmp: image.save(tmp, format='PNG'))


def readPng(path: Path, index: int) -> Frame:
    try:
        with Image.open(path) as image:
            pixels = np.asarray(image.convert('RGB'), dtype=np.uint8)
    except (OSError, ValueError) as err:
        raise builtin.FrameDecodeError(f"Cannot decode frame: {err}",
                                       context=str(path)) from err
    return Frame(pixels, index)


def dumpJson(data: Any) -> str:
    return json.dumps(data, sort_keys=True, indent=2) + '\n'


# Reading


def framePaths(path: Path) -> List[Path]:
    """frame_%05d.png files of a directory, checked to run 0..T-1."""
    if not path.is_dir():
        raise builtin.MissingMetadataError("Not a directory", context=str(path))
    found = {}
    for entry in path.iterdir():
        match = FRAME_RE.match(entry.name)
        if match:
            found[int(match.group(1))] = entry
    indices = sorted(found)
    for expected, index in enumerate(indices):
        if index != expected:
            raise builtin.NonContiguousFramesError(
                f"non-contiguous frames: frame_{expected:05d}.png missing",
                context=str(path),
            )
    return [found[i] for i in indices]


def loadFrames(path: PathLike) -> List[Frame]:
    """Frames of a directory of frame_%05d.png files, in index order."""
    return [readPng(p, i) for i, p in enumerate(framePaths(Path(path)))]


def readMetadata(path: Path) -> Mapping[str, Any]:
    metaPath = path / builtin.EPISODE_META
    try:
        meta = json.loads(metaPath.read_text(encoding='utf-8'))
    except FileNotFoundError as err:
        raise builtin.MissingMetadataError(
            f"missing {builtin.EPISODE_META}", context=str(path)) from err
    except (OSError, ValueError) as err:
        raise builtin.MissingMetadataError(
            f"unreadable {builtin.EPISODE_META}: {err}", context=str(path)) from err
    if not isinstance(meta, dict):
        raise builtin.MissingMetadataError(
            f"{builtin.EPISODE_META} is not an object", context=str(path))
    for key in ('instruction', 'actions'):
        if key not in meta:
            raise builtin.MissingMetadataError(
                f"{builtin.EPISODE_META} lacks {key!r}", context=str(path))
    return meta


def loadEpisode(path: PathLike) -> Episode:
    """Loads and validates one episode directory."""
    path = Path(path)
    meta = readMetadata(path)
    frames = loadFrames(path)
    try:
        actions = [tuple(float(v) for v in action) for action in meta['actions']]
    except (TypeError, ValueError) as err:
        raise builtin.MissingMetadataError(f"malformed actions: {err}",
                                           context=str(path)) from err
    episode = Episode(
        frames=tuple(frames),
        actions=tuple(actions),
        instruction=str(meta['instruction']),
        episodeId=str(meta.get('id', path.name)),
    )
    core.validateEpisode(episode).raiseIfInvalid(
        context=str(path), error=builtin.EpisodeValidationError)
    logger.debug("Loaded %r from %s", episode, path)
    return episode


def loadDataset(data: PathLike) -> List[Path]:
    """Episode directories (those holding episode.json) in name order."""
    root = Path(data)
    if not root.is_dir():
        raise builtin.DataError("Dataset directory not found", context=str(root))
    return sorted(p for p in root.iterdir()
                  if p.is_dir() and (p / builtin.EPISODE_META).is_file())


# Writing episodes


def writeEpisode(episode: Episode, path: PathLike) -> None:
    """Writes the unannotated layout that loadEpisode reads."""
    path = Path(path)
    for t, frame in enumerate(episode.frames):
        writePng(path / builtin.FRAME_PATTERN.format(t), frame)
    meta = {
        'id': episode.episodeId,
        'instruction': episode.instruction,
        'actions': [list(action) for action in episode.actions],
    }
    writeText(path / builtin.EPISODE_META, dumpJson(meta))


# Prompt records


@dataclass(frozen=True)
class PromptRecord:
    """One model input: two image references with a separator between
    them, the prompt text, and the tokenised action target.
    """
    originalImage: str
    promptImage: str
    separator: str
    instruction: str
    promptText: str
    actionTokens: Optional[core.Tokens]
    tracePresent: bool
    timestep: int
    episodeId: str
    vocabOffset: int = 0

    def asDict(self) -> Dict[str, Any]:
        return {
            'original_image': self.originalImage,
            'prompt_image': self.promptImage,
            'separator': self.separator,
            'instruction': self.instruction,
            'prompt_text': self.promptText,
            'action_tokens': (list(self.actionTokens)
                              if self.actionTokens is not None else None),
            'trace_present': self.tracePresent,
            'timestep': self.timestep,
            'episode_id': self.episodeId,
            'vocab_offset': self.vocabOffset,
        }


RECORD_KEYS = frozenset(PromptRecord(
    '', '', '', '', '', None, False, 0, '').asDict())


def validateRecord(record: PromptRecord,
                   templates: PromptTemplates = PromptTemplates()) -> PromptRecord:
    """Raises SchemaError if record breaks a PromptRecord invariant."""
    problems = []
    if record.separator != templates.separator:
        problems.append(f"separator {record.separator!r} is not {templates.separator!r}")
    if not record.tracePresent:
        if record.promptImage != record.originalImage:
            problems.append("trace absent but prompt image differs from original")
        if templates.traceHint in record.promptText:
            problems.append("trace absent but prompt text carries the trace hint")
    if record.timestep < 0:
        problems.append(f"negative timestep {record.timestep}")
    if record.actionTokens is not None and any(
            not isinstance(token, int) or token < 0 for token in record.actionTokens):
        problems.append("action tokens must be non-negative integers")
    if problems:
        raise builtin.SchemaError('; '.join(problems),
                                  context=f"{record.episodeId}@{record.timestep}")
    return record


def recordFromDict(data: Mapping[str, Any],
                   templates: PromptTemplates = PromptTemplates()) -> PromptRecord:
    missing = RECORD_KEYS - set(data)
    if missing:
        raise builtin.SchemaError(f"record lacks {sorted(missing)}")
    tokens = data['action_tokens']
    record = PromptRecord(
        originalImage=data['original_image'],
        promptImage=data['prompt_image'],
        separator=data['separator'],
        instruction=data['instruction'],
        promptText=data['prompt_text'],
        actionTokens=tuple(tokens) if tokens is not None else None,
        tracePresent=bool(data['trace_present']),
        timestep=int(data['timestep']),
        episodeId=data['episode_id'],
        vocabOffset=int(data['vocab_offset']),
    )
    return validateRecord(record, templates)


def roundHalfUp(value: float, precision: int) -> int:
    return int(math.floor(value / precision + 0.5)) * precision


def formatTextTrace(traces: Optional[TraceSet], precision: int = 1) -> str:
    """One line per trace, "point {i}: (x0,y0) -> (x1,y1) -> ...", with
    coordinates rounded to multiples of precision pixels.
    """
    if traces is None:
        return ''
    lines = []
    for i, trace in enumerate(traces):
        coords = ' -> '.join(
            f"({roundHalfUp(x, precision)},{roundHalfUp(y, precision)})"
            for x, y in trace.points.tolist()
        )
        lines.append(f"point {i}: {coords}")
    return '\n'.join(lines)


@dataclass(frozen=True)
class RecordPaths:
    """Image references used by one record."""
    original: str
    overlay: str


def buildPromptRecord(step: StepAnnotation, episode: Episode,
                      paths: RecordPaths,
                      bins: Optional[BinTable] = None,
                      templates: PromptTemplates = PromptTemplates(),
                      promptMode: str = 'visual',
                      vocabOffset: int = 0,
                      textPrecision: int = 1) -> PromptRecord:
    """Assembles the record of one step. Steps without a visible trace
    (warm-up, empty active set, dropout) use the original image twice
    and the plain template.
    """
    instruction = episode.instruction
    if step.showsTrace and promptMode == 'text':
        assert step.trace is not None
        promptImage = paths.original
        promptText = templates.textTrace.format(
            instruction=instruction,
            window=step.trace.windowEnd - step.trace.windowStart,
            trace=formatTextTrace(step.trace, textPrecision),
        )
    elif step.showsTrace:
        promptImage = paths.overlay
        promptText = templates.traced.format(instruction=instruction)
    else:
        promptImage = paths.original
        promptText = templates.plain.format(instruction=instruction)
    tokens = None
    if bins is not None:
        tokens = encodeAction(episode.actions[step.timestep], bins)
    return PromptRecord(
        originalImage=paths.original,
        promptImage=promptImage,
        separator=templates.separator,
        instruction=instruction,
        promptText=promptText,
        actionTokens=tokens,
        tracePresent=step.showsTrace,
        timestep=step.timestep,
        episodeId=episode.episodeId,
        vocabOffset=vocabOffset,
    )


def readPromptRecords(path: PathLike,
                      templates: PromptTemplates = PromptTemplates()) -> List[PromptRecord]:
    """Reads and validates a prompts.jsonl file."""
    path = Path(path)
    try:
        lines = path.read_text(encoding='utf-8').splitlines()
    except OSError as err:
        raise builtin.DataError(f"Cannot read records: {err}", context=str(path)) from err
    records = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except ValueError as err:
            raise builtin.SchemaError(f"invalid JSON: {err}",
                                      context=f"{path}:{number}") from err
        records.append(recordFromDict(data, templates))
    return records


# Trace documents


def traceDict(trace: Optional[TraceSet]) -> Optional[List[Dict[str, Any]]]:
    if trace is None:
        return None
    return [
        {
            'origin': traj.origin,
            'points': [[round(x, TRACE_DECIMALS), round(y, TRACE_DECIMALS)]
                       for x, y in traj.points.tolist()],
            'valid': list(traj.valid),
        }
        for traj in trace
    ]


def stepDict(step: StepAnnotation) -> Dict[str, Any]:
    window = None
    if step.trace is not None:
        window = [step.trace.windowStart, step.trace.windowEnd]
    return {
        'timestep': step.timestep,
        'window': window,
        'dropped': step.dropped,
        'history_len': step.historyLen,
        'traces': traceDict(step.trace),
    }


# Annotated datasets


def checkEpisodeId(episodeId: str) -> str:
    if not episodeId or episodeId in ('.', '..') or '/' in episodeId or '\\' in episodeId:
        raise builtin.OutputError(f"Episode id {episodeId!r} is not a valid directory name")
    return episodeId


def removeStale(directory: Path, pattern: "re.Pattern[str]", keep: Iterable[str]) -> None:
    keep = set(keep)
    for entry in directory.iterdir():
        if pattern.match(entry.name) and entry.name not in keep:
            entry.unlink()


def writeEpisodeOutput(annotated: AnnotatedEpisode, out: Path,
                       config: PipelineConfig,
                       bins: Optional[BinTable]) -> Dict[str, Any]:
    episode = annotated.episode
    name = checkEpisodeId(episode.episodeId)
    directory = out / name
    records = []
    overlays = []
    for step in annotated.steps:
        t = step.timestep
        originalName = builtin.FRAME_PATTERN.format(t)
        overlayName = builtin.OVERLAY_PATTERN.format(t)
        writePng(directory / originalName, episode.frames[t])
        if step.overlaid is not None and step.trace is not None and len(step.trace):
            writePng(directory / overlayName, step.overlaid)
            overlays.append(overlayName)
        record = buildPromptRecord(
            step, episode,
            RecordPaths(f"{name}/{originalName}", f"{name}/{overlayName}"),
            bins=bins,
            templates=config.templates,
            promptMode=config.promptMode,
            vocabOffset=config.vocabOffset,
            textPrecision=config.textPrecision,
        )
        records.append(validateRecord(record, config.templates).asDict())
    try:
        removeStale(directory, OVERLAY_RE, overlays)
    except OSError as err:
        raise builtin.OutputError(f"Cannot clean output: {err}",
                                  context=str(directory)) from err

    traces = {
        'episode_id': episode.episodeId,
        'kappa': config.trace.kappa,
        'seed': config.trace.seed,
        'config': config.asDict(),
        'steps': [stepDict(step) for step in annotated.steps],
    }
    writeText(directory / builtin.TRACES_DOC, dumpJson(traces))
    writeText(directory / builtin.PROMPTS_DOC,
              ''.join(json.dumps(r, sort_keys=True) + '\n' for r in records))
    return {
        'id': episode.episodeId,
        'dir': name,
        'steps': len(annotated.steps),
        'traced_steps': sum(1 for step in annotated.steps if step.showsTrace),
    }


def writeAnnotatedDataset(annotated: Sequence[AnnotatedEpisode], out: PathLike,
                          config: PipelineConfig = PipelineConfig(),
                          bins: Optional[BinTable] = None,
                          failed: Sequence[Tuple[str, str]] = ()) -> Dict[str, Any]:
    """Writes every episode's images, traces document and prompt
    records, then the manifest last.
    Re-running with identical inputs rewrites byte-identical files.
    """
    out = Path(out)
    entries = [writeEpisodeOutput(item, out, config, bins) for item in annotated]
    return writeManifest(out, config, entries, failed)


def writeManifest(out: PathLike, config: PipelineConfig,
                  entries: Sequence[Mapping[str, Any]],
                  failed: Sequence[Tuple[str, str]] = ()) -> Dict[str, Any]:
    """Writes manifest.json, the commit point of a dataset run."""
    manifest = {
        'config_hash': core.configHash(config),
        'config': config.asDict(),
        'episodes': list(entries),
        'failed': [{'id': episodeId, 'error': error} for episodeId, error in failed],
    }
    writeText(Path(out) / builtin.MANIFEST, dumpJson(manifest))
    logger.info("Wrote manifest of %d episodes to %s", len(entries), out)
    return manifest


# Stream output


def writeStreamResults(out: PathLike,
                       outputs: Sequence[Tuple[Optional[TraceSet], Optional[Frame]]],
                       config: PipelineConfig = PipelineConfig()) -> Dict[str, Any]:
    """Overlays of the steps that produced a trace, and one traces line
    per step.
    """
    out = Path(out)
    lines = []
    overlays = []
    for t, (traces, overlaid) in enumerate(outputs):
        if overlaid is not None:
            name = builtin.OVERLAY_PATTERN.format(t)
            writePng(out / name, overlaid)
            overlays.append(name)
        window = None if traces is None else [traces.windowStart, traces.windowEnd]
        lines.append(json.dumps(
            {'timestep': t, 'window': window, 'traces': traceDict(traces)},
            sort_keys=True,
        ) + '\n')
    writeText(out / builtin.STREAM_TRACES_DOC, ''.join(lines))
    try:
        removeStale(out, OVERLAY_RE, overlays)
    except OSError as err:
        raise builtin.OutputError(f"Cannot clean output: {err}",
                                  context=str(out)) from err
    summary = {
        'config_hash': core.configHash(config),
        'config': config.asDict(),
        'steps': len(outputs),
        'traced_steps': len(overlays),
    }
    writeText(out / builtin.MANIFEST, dumpJson(summary))
    return summary
