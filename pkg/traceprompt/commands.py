"""commands
Command-line surface of traceprompt.

buildParser() -> argparse.ArgumentParser
    annotate, stream, fit-actions, render, verify and benchmark

configFromArgs(args) -> PipelineConfig
    Flags first, then --config file overrides

Every handler takes the parsed arguments and returns an exit code.
"""

import argparse
import json
import logging
import statistics
import time
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Tuple

import numpy as np
from tqdm import tqdm

from traceprompt import Annotator, VERSION, builtin, exitCode
from traceprompt.actions import collectActionSamples, dumpBins, fitBins, loadBins
from traceprompt.annotate import annotateStep
from traceprompt.core import (
    Frame,
    OverlayStyle,
    PipelineConfig,
    PromptTemplates,
    TraceConfig,
    TrackerConfig,
)
from traceprompt.promptio import (
    loadDataset,
    loadEpisode,
    loadFrames,
    writePng,
    writeStreamResults,
    writeText,
)
from traceprompt.stream import Stream
from traceprompt.tracker import trackGrid, verifyTracker

logger = logging.getLogger(__name__)

Handler = Callable[[argparse.Namespace], int]

# Keys a --config file may set; flags use the same names with dashes
CONFIG_KEYS = frozenset({
    'k', 'm', 'n', 'kappa', 'dropout', 'seed', 'redraw_steps',
    'pyramid_levels', 'window_half', 'max_iters', 'epsilon', 'min_eigen',
    'linewidth', 'alpha', 'endpoint_radius', 'palette',
    'traced_template', 'plain_template', 'text_trace_template', 'separator',
    'threads', 'prompt_mode', 'vocab_offset', 'text_precision',
})

SPARSE_BUDGET = 0.030
DENSE_BUDGET = 0.600


# Configuration


def readConfigFile(path: str) -> Dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding='utf-8'))
    except OSError as err:
        raise builtin.DataError(f"Cannot read config: {err}", context=path) from err
    except ValueError as err:
        raise builtin.ConfigError(f"Invalid JSON: {err}", context=path) from err
    if not isinstance(data, dict):
        raise builtin.ConfigError("Config file must hold a JSON object", context=path)
    return data


def applyOverrides(args: argparse.Namespace, overrides: Dict[str, Any],
                   source: str = '--config') -> None:
    for key, value in overrides.items():
        dest = key.replace('-', '_')
        if dest not in CONFIG_KEYS:
            raise builtin.ConfigError(f"Unknown config key {key!r}", context=source)
        setattr(args, dest, value)


def configFromArgs(args: argparse.Namespace) -> PipelineConfig:
    """Builds the pipeline config from flags, with any --config file
    values taking precedence.
    """
    if args.config:
        applyOverrides(args, readConfigFile(args.config), args.config)
    templates = PromptTemplates()
    overrides = {
        'traced': args.traced_template,
        'plain': args.plain_template,
        'textTrace': args.text_trace_template,
        'separator': args.separator,
    }
    templates = PromptTemplates(**{
        name: value if value is not None else getattr(templates, name)
        for name, value in overrides.items()
    })
    style = OverlayStyle(
        linewidth=args.linewidth,
        alpha=args.alpha,
        endpointRadius=args.endpoint_radius,
        **({'palette': args.palette} if args.palette is not None else {}),
    )
    return PipelineConfig(
        trace=TraceConfig(
            gridSize=args.k,
            sampleCount=args.m,
            window=args.n,
            kappa=args.kappa,
            dropoutProb=args.dropout,
            redrawSteps=args.redraw_steps,
            seed=args.seed,
        ),
        tracker=TrackerConfig(
            pyramidLevels=args.pyramid_levels,
            windowHalf=args.window_half,
            maxIters=args.max_iters,
            epsilon=args.epsilon,
            minEigen=args.min_eigen,
        ),
        style=style,
        templates=templates,
        threads=args.threads,
        promptMode=args.prompt_mode,
        vocabOffset=args.vocab_offset,
        textPrecision=args.text_precision,
    )


# Handlers


def annotateCommand(args: argparse.Namespace) -> int:
    config = configFromArgs(args)
    bins = None
    if args.bins:
        try:
            bins = loadBins(Path(args.bins).read_text(encoding='utf-8'))
        except OSError as err:
            raise builtin.DataError(f"Cannot read bins: {err}",
                                    context=args.bins) from err
    outcome = Annotator(config).runDataset(args.data, args.out, bins,
                                           progress=not args.quiet)
    results = outcome['results']
    errors = [r['error'] for r in results if r['error'] is not None]
    for err in errors:
        print(f"{type(err).__name__}: {err.report()}")
    print(f"Annotated {len(results) - len(errors)} of {len(results)} episodes "
          f"into {args.out} (config {outcome['manifest']['config_hash'][:12]})")
    if not errors:
        return builtin.EXIT_OK
    return max(exitCode(err) for err in errors)


def streamCommand(args: argparse.Namespace) -> int:
    config = configFromArgs(args)
    frames = loadFrames(args.frames)
    stream = Stream(config.trace, config.tracker, config.style)
    steps: Iterable[Frame] = frames
    if not args.quiet:
        steps = tqdm(frames, desc="Streaming frames")
    outputs = [stream.step(frame) for frame in steps]
    summary = writeStreamResults(args.out, outputs, config)
    print(f"Streamed {len(frames)} frames: {summary['traced_steps']} with traces, "
          f"{stream.state.denseCount} dense and {stream.state.sparseCount} "
          f"sparse tracking calls")
    return builtin.EXIT_OK


def fitActionsCommand(args: argparse.Namespace) -> int:
    paths: List[Path] = loadDataset(args.data)
    if not paths:
        raise builtin.DataError("No episodes found", context=args.data)
    progress: Iterable[Path] = paths if args.quiet else tqdm(paths, desc="Reading actions")
    samples = collectActionSamples(loadEpisode(path) for path in progress)
    clip = (args.clip[0], args.clip[1]) if args.clip else None
    bins = fitBins(samples, nBins=args.bins, clip=clip)
    writeText(Path(args.out), dumpBins(bins))
    print(f"Fitted {bins.nBins} bins over {bins.dims} action dimensions "
          f"({len(samples[0])} samples) to {args.out}")
    return builtin.EXIT_OK


def renderCommand(args: argparse.Namespace) -> int:
    config = configFromArgs(args)
    episode = loadEpisode(args.episode)
    step = annotateStep(episode, args.t, config.trace, config.tracker, config.style)
    if step.overlaid is None:
        print(f"No trace before t={config.trace.window}; writing the original frame")
        writePng(Path(args.out), episode.frames[args.t])
    else:
        assert step.trace is not None
        writePng(Path(args.out), step.overlaid)
        print(f"Rendered {len(step.trace)} traces over "
              f"[{step.trace.windowStart}, {step.trace.windowEnd}] to {args.out}")
    return builtin.EXIT_OK


def verifyCommand(args: argparse.Namespace) -> int:
    config = configFromArgs(args)
    frames = loadFrames(args.episode)
    result = verifyTracker(frames, config.tracker, searchRadius=args.search_radius,
                           gridSize=args.grid, threads=config.threads)
    print(f"max deviation {result.maxDeviation:.4f} px, "
          f"mean deviation {result.meanDeviation:.4f} px "
          f"over {result.compared} points ({result.skipped} skipped)")
    if result.maxDeviation > args.tolerance:
        print(f"FAIL: max deviation exceeds tolerance {args.tolerance} px")
        return builtin.EXIT_VALIDATION
    return builtin.EXIT_OK


def translatingFrames(size: int, count: int, shift: Tuple[int, int] = (2, 0),
                      seed: int = 0) -> List[Frame]:
    """Multi-scale noise texture moved cyclically by shift every frame."""
    rng = np.random.default_rng(seed)
    grey = np.zeros((size, size))
    for radius in (1, 2, 4, 8):
        layer = rng.uniform(0, 1, size=(size, size))
        for axis in (0, 1):
            layer = sum(np.roll(layer, s, axis=axis)
                        for s in range(-radius, radius + 1)) / (2 * radius + 1)
        grey += (layer - layer.mean()) / layer.std()
    grey = np.clip((grey - grey.mean()) / grey.std() * 50.0 + 128.0, 0, 255)
    texture = np.repeat(np.round(grey).astype(np.uint8)[:, :, None], 3, axis=2)
    return [
        Frame(np.roll(texture, (k * shift[1], k * shift[0]), axis=(0, 1)), k)
        for k in range(count)
    ]


def benchmarkCommand(args: argparse.Namespace) -> int:
    config = configFromArgs(args)
    N = config.trace.window
    frames = translatingFrames(args.size, N + 1 + args.repeats)
    # Only the first dense call falls inside the timed range
    traceCfg = TraceConfig(
        gridSize=config.trace.gridSize,
        sampleCount=config.trace.sampleCount,
        window=N,
        kappa=config.trace.kappa,
        redrawSteps=len(frames),
        seed=config.trace.seed,
    )
    stream = Stream(traceCfg, config.tracker, config.style)
    for frame in frames[:N + 1]:
        stream.step(frame)
    sparse = []
    for frame in frames[N + 1:]:
        start = time.perf_counter()
        stream.step(frame)
        sparse.append(time.perf_counter() - start)
    dense = []
    for _ in range(args.dense_repeats):
        start = time.perf_counter()
        trackGrid(frames[:N + 1], config.trace.gridSize, config.tracker)
        dense.append(time.perf_counter() - start)

    code = builtin.EXIT_OK
    for name, timings, budget in (('sparse step', sparse, SPARSE_BUDGET),
                                  ('dense track', dense, DENSE_BUDGET)):
        median = statistics.median(timings)
        verdict = 'ok' if median <= budget else 'over budget'
        if median > 2 * budget:
            verdict = 'FAIL'
            code = builtin.EXIT_VALIDATION
        print(f"{name}: median {median * 1000:.1f} ms "
              f"(budget {budget * 1000:.0f} ms) {verdict}")
    logger.info("Benchmark sparse=%s dense=%s", sparse, dense)
    return code


# Parser


def addPipelineOptions(parser: argparse.ArgumentParser) -> None:
    trace = parser.add_argument_group('trace')
    trace.add_argument('--k', type=int, default=builtin.GRID_SIZE,
                       help="grid points per side")
    trace.add_argument('--m', type=int, default=builtin.SAMPLE_COUNT,
                       help="traces sampled per step")
    trace.add_argument('--n', type=int, default=builtin.WINDOW,
                       help="history window in timesteps")
    trace.add_argument('--kappa', type=float, default=builtin.KAPPA,
                       help="movement threshold in pixels")
    trace.add_argument('--dropout', type=float, default=builtin.DROPOUT_PROB,
                       help="trace dropout probability")
    trace.add_argument('--seed', type=int, default=builtin.SEED)
    trace.add_argument('--redraw-steps', type=int, default=builtin.REDRAW_STEPS,
                       help="streaming steps between dense recalibrations")

    tracker = parser.add_argument_group('tracker')
    tracker.add_argument('--pyramid-levels', type=int, default=builtin.PYRAMID_LEVELS)
    tracker.add_argument('--window-half', type=int, default=builtin.WINDOW_HALF)
    tracker.add_argument('--max-iters', type=int, default=builtin.MAX_ITERS)
    tracker.add_argument('--epsilon', type=float, default=builtin.EPSILON)
    tracker.add_argument('--min-eigen', type=float, default=builtin.MIN_EIGEN)

    style = parser.add_argument_group('overlay')
    style.add_argument('--linewidth', type=float, default=builtin.LINEWIDTH)
    style.add_argument('--alpha', type=float, default=builtin.ALPHA)
    style.add_argument('--endpoint-radius', type=float, default=builtin.ENDPOINT_RADIUS)

    run = parser.add_argument_group('run')
    run.add_argument('--threads', type=int, default=1,
                     help="worker count for annotate and verify")
    run.add_argument('--config', help="JSON file whose keys override flags")
    run.add_argument('--prompt-mode', choices=('visual', 'text'), default='visual')
    run.add_argument('--vocab-offset', type=int, default=0)
    run.add_argument('--text-precision', type=int, default=1)
    run.add_argument('--verbose', action='store_true', help="log progress to stderr")
    run.add_argument('--quiet', action='store_true', help="hide progress bars")
    # Settable from --config only
    parser.set_defaults(palette=None, traced_template=None, plain_template=None,
                        text_trace_template=None, separator=None)


def buildParser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='traceprompt',
        description="Visual trace annotation of robot episodes",
    )
    parser.add_argument('--version', action='version', version=VERSION)
    common = argparse.ArgumentParser(add_help=False)
    addPipelineOptions(common)
    commands = parser.add_subparsers(dest='command', required=True)

    def command(name: str, handler: Handler, help: str) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, parents=[common], help=help)
        sub.set_defaults(handler=handler)
        return sub

    sub = command('annotate', annotateCommand, "annotate a dataset of episodes")
    sub.add_argument('--data', required=True)
    sub.add_argument('--out', required=True)
    sub.add_argument('--bins', help="bin table from fit-actions, for action tokens")

    sub = command('stream', streamCommand, "stream a frame directory")
    sub.add_argument('--frames', required=True)
    sub.add_argument('--out', required=True)

    sub = command('fit-actions', fitActionsCommand, "fit action bins")
    sub.add_argument('--data', required=True)
    sub.add_argument('--out', required=True)
    sub.add_argument('--bins', type=int, default=builtin.N_BINS)
    sub.add_argument('--clip', type=float, nargs=2, metavar=('LOW', 'HIGH'),
                     help="clip to these percentiles before fitting")

    sub = command('render', renderCommand, "render one overlay")
    sub.add_argument('--episode', required=True)
    sub.add_argument('--t', type=int, required=True)
    sub.add_argument('--out', required=True)

    sub = command('verify', verifyCommand, "check the tracker against block matching")
    sub.add_argument('--episode', required=True)
    sub.add_argument('--search-radius', type=int, default=5)
    sub.add_argument('--tolerance', type=float, default=0.5)
    sub.add_argument('--grid', type=int, default=8, help="verified points per side")

    sub = command('benchmark', benchmarkCommand, "time sparse and dense tracking")
    sub.add_argument('--size', type=int, default=256)
    sub.add_argument('--repeats', type=int, default=20)
    sub.add_argument('--dense-repeats', type=int, default=3)
    return parser
