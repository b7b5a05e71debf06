"""annotate
Batch annotation of episodes over overlapping 2N-frame segments.

segmentEpisode(T, N) -> segments
    [0, 2N), [N, 3N), ... clamped to the episode

annotateEpisode(episode, traceCfg, trackerCfg, style) -> step annotations
    Dense tracking once per segment, one annotation per timestep

annotateStep(episode, t, traceCfg, trackerCfg, style) -> step annotation
    The same computation for a single timestep

applyDropout(annotations, dropoutProb, seed) -> step annotations
    Marks steps whose trace prompt is replaced by the original image
"""

import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import (
    Callable,
    Dict,
    List,
    Optional,
    Sequence,
    Tuple,
)

from . import builtin, core, system
from .core import (
    Episode,
    Frame,
    OverlayStyle,
    PointTrajectory,
    TraceConfig,
    TraceSet,
    TrackerConfig,
)
from .overlay import renderOverlay
from .trace import filterActive, sampleTraces, sliceTrajectories
from .tracker import trackGrid

logger = logging.getLogger(__name__)

GridTracker = Callable[[Sequence[Frame], int, TrackerConfig], List[PointTrajectory]]


@dataclass(frozen=True)
class Segment:
    """Timesteps [start, end) tracked together by one dense call."""
    start: int
    end: int

    def __post_init__(self) -> None:
        if self.end - self.start < 2:
            raise builtin.ConfigError(
                f"Segment [{self.start}, {self.end}) shorter than 2 frames")

    def __len__(self) -> int:
        return self.end - self.start

    def covers(self, t: int, N: int) -> bool:
        """True if the whole history window [t - N, t] lies inside."""
        return self.start <= t - N and t < self.end


@dataclass(eq=False, frozen=True)
class StepAnnotation:
    """Prompt inputs for one timestep.

    trace is None during warm-up (t < N); an empty TraceSet means the
    window held no active points. overlaid is present whenever trace is.
    dropped marks steps whose trace is withheld by trace dropout.
    """
    timestep: int
    trace: Optional[TraceSet]
    overlaid: Optional[Frame]
    dropped: bool
    historyLen: int

    @property
    def showsTrace(self) -> bool:
        """True if the emitted prompt carries the visual trace."""
        return (self.trace is not None and len(self.trace) > 0
                and not self.dropped)


@dataclass(eq=False, frozen=True)
class AnnotatedEpisode:
    episode: Episode
    steps: Tuple[StepAnnotation, ...]


def segmentEpisode(T: int, N: int) -> List[Segment]:
    """Segments [kN, min(kN + 2N, T)) for k = 0, 1, ... while
    kN + N < T, and always at least the first.
    """
    if T < 2:
        raise builtin.ConfigError(f"Episode length must be >= 2, is {T}")
    if N < 1:
        raise builtin.ConfigError(f"Window must be >= 1, is {N}")
    segments = []
    k = 0
    while k == 0 or k * N + N < T:
        segments.append(Segment(k * N, min(k * N + 2 * N, T)))
        k += 1
    return segments


def segmentFor(segments: Sequence[Segment], t: int, N: int) -> Segment:
    """The latest segment holding the full history window of t."""
    for segment in reversed(segments):
        if segment.covers(t, N):
            return segment
    raise builtin.TrackingError(f"No segment covers [{t - N}, {t}]",
                                context=f"timestep {t}")


def stepSeed(traceCfg: TraceConfig, episode: Episode, t: int) -> int:
    return system.deriveSeed(traceCfg.seed, system.nameHash(episode.episodeId), t)


def warmupStep(t: int) -> StepAnnotation:
    return StepAnnotation(timestep=t, trace=None, overlaid=None,
                          dropped=False, historyLen=t)


def buildStep(episode: Episode, t: int, segment: Segment,
              trajectories: Sequence[PointTrajectory],
              traceCfg: TraceConfig, style: OverlayStyle) -> StepAnnotation:
    """Slices the segment's trajectories to [t - N, t], filters, samples
    and renders the step.
    """
    N = traceCfg.window
    local = t - N - segment.start
    window = sliceTrajectories(trajectories, local, local + N + 1)
    active = filterActive(window, traceCfg.kappa, windowStart=t - N, windowEnd=t)
    traces = sampleTraces(active, traceCfg.sampleCount,
                          stepSeed(traceCfg, episode, t))
    return StepAnnotation(
        timestep=t,
        trace=traces,
        overlaid=renderOverlay(episode.frames[t], traces, style),
        dropped=False,
        historyLen=N,
    )


def checkEpisode(episode: Episode) -> None:
    core.validateEpisode(episode).raiseIfInvalid(context=episode.episodeId)
    if len(episode) < 2:
        raise builtin.ValidationError("Episode needs at least 2 frames",
                                      context=episode.episodeId)


def annotateEpisode(episode: Episode,
                    traceCfg: TraceConfig = TraceConfig(),
                    trackerCfg: TrackerConfig = TrackerConfig(),
                    style: OverlayStyle = OverlayStyle(),
                    gridTracker: GridTracker = trackGrid,
                    threads: int = 1) -> List[StepAnnotation]:
    """Returns one StepAnnotation per timestep, in timestep order.

    Each segment is tracked once by gridTracker; segments may be
    tracked on up to `threads` workers without changing the output.
    """
    checkEpisode(episode)
    T, N = len(episode), traceCfg.window
    segments = segmentEpisode(T, N)
    owner: Dict[int, Segment] = {t: segmentFor(segments, t, N) for t in range(N, T)}
    # Only when T <= N does a segment own no timestep
    needed = [segment for segment in segments if segment in owner.values()]

    def track(segment: Segment) -> List[PointTrajectory]:
        logger.debug("Tracking %s segment [%d, %d)", episode.episodeId,
                     segment.start, segment.end)
        return gridTracker(episode.frames[segment.start:segment.end],
                           traceCfg.gridSize, trackerCfg)

    if threads > 1 and len(needed) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            tracked = list(pool.map(track, needed))
    else:
        tracked = [track(segment) for segment in needed]
    trajectories = dict(zip(needed, tracked))

    steps = [
        warmupStep(t) if t < N else buildStep(
            episode, t, owner[t], trajectories[owner[t]], traceCfg, style)
        for t in range(T)
    ]
    logger.info("Annotated %s: %d steps, %d dense calls, %d with traces",
                episode.episodeId, T, len(needed),
                sum(1 for step in steps if step.showsTrace))
    return steps


def annotateStep(episode: Episode, t: int,
                 traceCfg: TraceConfig = TraceConfig(),
                 trackerCfg: TrackerConfig = TrackerConfig(),
                 style: OverlayStyle = OverlayStyle(),
                 gridTracker: GridTracker = trackGrid) -> StepAnnotation:
    """Annotation of timestep t alone; equal to annotateEpisode(...)[t]."""
    checkEpisode(episode)
    T, N = len(episode), traceCfg.window
    if not 0 <= t < T:
        raise builtin.ConfigError(f"Timestep {t} outside episode of {T}",
                                  context=episode.episodeId)
    if t < N:
        return warmupStep(t)
    segment = segmentFor(segmentEpisode(T, N), t, N)
    trajectories = gridTracker(episode.frames[segment.start:segment.end],
                               traceCfg.gridSize, trackerCfg)
    return buildStep(episode, t, segment, trajectories, traceCfg, style)


def applyDropout(annotations: Sequence[StepAnnotation], dropoutProb: float,
                 seed: int) -> List[StepAnnotation]:
    """Returns copies with dropped set independently per step, drawn
    from a splitmix64 stream seeded by (seed, timestep).
    """
    if not 0 <= dropoutProb <= 1:
        raise builtin.ConfigError(f"dropoutProb must be in [0, 1], is {dropoutProb}")
    return [
        dataclasses.replace(
            step,
            dropped=system.SplitMix64(
                system.deriveSeed(seed, step.timestep)).random() < dropoutProb,
        )
        for step in annotations
    ]


def episodeDropoutSeed(traceCfg: TraceConfig, episode: Episode) -> int:
    """Dropout seed of one episode, independent of every other episode."""
    return system.deriveSeed(traceCfg.seed, system.nameHash(episode.episodeId))
