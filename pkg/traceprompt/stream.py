"""stream
Online trace extraction for inference.

Dense K x K tracking runs at t = N and every redrawSteps after it;
in between only the M sampled points are re-tracked over the last
N + 1 frames.

streamInit(traceCfg, trackerCfg) -> StreamState

streamStep(state, frame) -> (TraceSet or None, overlaid Frame or None)

Stream
    Holds a StreamState and steps it
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import (
    Deque,
    List,
    Optional,
    Tuple,
)

import numpy as np

from . import builtin, system
from .annotate import GridTracker
from .core import (
    Frame,
    OverlayStyle,
    PointTrajectory,
    TraceConfig,
    TraceSet,
    TrackerConfig,
)
from .overlay import renderOverlay
from .trace import filterActive, sampleTraces
from .tracker import Pyramid, buildPyramid, gridQueries, trackPyramids

logger = logging.getLogger(__name__)

StepOutput = Tuple[Optional[TraceSet], Optional[Frame]]


@dataclass(eq=False)
class StreamState:
    """Mutable per-session state; calls must be serialised per session.

    Attributes
    ----------
    - t
        timestep of the next frame
    - frameQueue, pyramidQueue
        the last N + 1 frames and their pyramids
    - gridTracker
        called with the queued frames in place of dense tracking over
        the queued pyramids, when given
    - tracked
        current window trajectory of every tracked identity, or None
        when no trace is available
    - lastDenseAt
        timestep of the last dense recalibration
    - denseCount, sparseCount
        how many dense and sparse tracking calls were made
    """
    traceCfg: TraceConfig
    trackerCfg: TrackerConfig
    style: OverlayStyle = field(default_factory=OverlayStyle)
    gridTracker: Optional[GridTracker] = None
    t: int = 0
    frameQueue: Deque[Frame] = field(default_factory=deque)
    pyramidQueue: Deque[Pyramid] = field(default_factory=deque)
    tracked: Optional[List[PointTrajectory]] = None
    lastDenseAt: Optional[int] = None
    frameSize: Optional[Tuple[int, int]] = None
    denseCount: int = 0
    sparseCount: int = 0

    @property
    def trackedPoints(self) -> Optional[np.ndarray]:
        """(M', 2) latest positions of the tracked identities."""
        if self.tracked is None:
            return None
        return np.stack([traj.points[-1] for traj in self.tracked])

    def isDenseStep(self, t: int) -> bool:
        N = self.traceCfg.window
        return t >= N and (t - N) % self.traceCfg.redrawSteps == 0


def streamInit(traceCfg: TraceConfig = TraceConfig(),
               trackerCfg: TrackerConfig = TrackerConfig(),
               style: OverlayStyle = OverlayStyle(),
               gridTracker: Optional[GridTracker] = None) -> StreamState:
    """A fresh state at t = 0 with an empty queue."""
    if traceCfg.sampleCount > traceCfg.gridSize ** 2:
        raise builtin.ConfigError(
            f"sampleCount {traceCfg.sampleCount} exceeds "
            f"{traceCfg.gridSize}x{traceCfg.gridSize} grid")
    maxlen = traceCfg.window + 1
    return StreamState(
        traceCfg=traceCfg,
        trackerCfg=trackerCfg,
        style=style,
        gridTracker=gridTracker,
        frameQueue=deque(maxlen=maxlen),
        pyramidQueue=deque(maxlen=maxlen),
    )


def denseStep(state: StreamState, frame: Frame) -> StepOutput:
    cfg, t = state.traceCfg, state.t
    if state.gridTracker is None:
        width, height = frame.size
        trajectories = trackPyramids(list(state.pyramidQueue),
                                     gridQueries(width, height, cfg.gridSize),
                                     state.trackerCfg)
    else:
        trajectories = state.gridTracker(list(state.frameQueue), cfg.gridSize,
                                         state.trackerCfg)
    state.denseCount += 1
    state.lastDenseAt = t
    active = filterActive(trajectories, cfg.kappa,
                          windowStart=t - cfg.window, windowEnd=t)
    traces = sampleTraces(active, cfg.sampleCount, system.deriveSeed(cfg.seed, t))
    logger.debug("Dense recalibration at t=%d: %d active, %d sampled",
                 t, len(active), len(traces))
    if not len(traces):
        state.tracked = None
        return None, None
    state.tracked = list(traces.traces)
    return traces, renderOverlay(frame, traces, state.style)


def sparseStep(state: StreamState, frame: Frame) -> StepOutput:
    cfg, t = state.traceCfg, state.t
    assert state.tracked is not None
    # Position 1 of the previous window is the queue's first frame now
    queries = [traj.points[1] for traj in state.tracked]
    trajectories = trackPyramids(list(state.pyramidQueue), queries,
                                 state.trackerCfg)
    state.sparseCount += 1
    kept = [
        PointTrajectory(traj.points, traj.status, previous.origin)
        for traj, previous in zip(trajectories, state.tracked)
        if traj.allValid
    ]
    if len(kept) < len(state.tracked):
        logger.debug("Lost %d of %d tracked points at t=%d",
                     len(state.tracked) - len(kept), len(state.tracked), t)
    if not kept:
        state.tracked = None
        return None, None
    state.tracked = kept
    traces = TraceSet(tuple(kept), windowStart=t - cfg.window, windowEnd=t)
    return traces, renderOverlay(frame, traces, state.style)


def streamStep(state: StreamState, frame: Frame) -> StepOutput:
    """Feeds the next frame and returns this step's trace and overlay,
    or (None, None) during warm-up and whenever no trace is available.
    """
    if state.frameSize is None:
        state.frameSize = frame.size
    elif frame.size != state.frameSize:
        raise builtin.ValidationError(
            f"frame size mismatch: {frame.size}, expected {state.frameSize}",
            context=f"timestep {state.t}",
        )
    pyramid = buildPyramid(frame, state.trackerCfg)
    state.frameQueue.append(frame)
    state.pyramidQueue.append(pyramid)
    try:
        if state.t < state.traceCfg.window:
            return None, None
        if state.isDenseStep(state.t):
            return denseStep(state, frame)
        if state.tracked is None:
            return None, None
        return sparseStep(state, frame)
    finally:
        state.t += 1


class Stream:
    """Convenience wrapper around one StreamState."""

    def __init__(self, traceCfg: TraceConfig = TraceConfig(),
                 trackerCfg: TrackerConfig = TrackerConfig(),
                 style: OverlayStyle = OverlayStyle(),
                 gridTracker: Optional[GridTracker] = None) -> None:
        self.state = streamInit(traceCfg, trackerCfg, style, gridTracker)

    def step(self, frame: Frame) -> StepOutput:
        return streamStep(self.state, frame)
