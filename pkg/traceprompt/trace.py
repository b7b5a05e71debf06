"""trace
Turns raw grid trajectories into the active set and the sampled trace
set.

trajectoryMovement(traj) -> float
    Total l1 movement along a trajectory

filterActive(trajs, kappa) -> ActiveSet
    Fully valid trajectories that move more than kappa

sampleTraces(active, M, seed) -> TraceSet
    Uniform sample of M active trajectories

sliceTrajectories(trajs, start, stop) -> trajectories
    Cuts every trajectory to the same window
"""

import logging
from dataclasses import dataclass
from typing import (
    List,
    Optional,
    Sequence,
    Tuple,
)

from . import builtin
from .core import PointTrajectory, TraceSet
from .system import SplitMix64

logger = logging.getLogger(__name__)


@dataclass(eq=False, frozen=True)
class ActiveSet:
    """Trajectories whose movement strictly exceeds kappa.
    windowStart/windowEnd are carried through to the sampled TraceSet.
    """
    trajectories: Tuple[PointTrajectory, ...]
    kappa: float
    totalInput: int
    windowStart: int = 0
    windowEnd: int = 0

    def __len__(self) -> int:
        return len(self.trajectories)


def trajectoryMovement(traj: PointTrajectory) -> float:
    """Sum over adjacent positions of |dx| + |dy|."""
    if len(traj) < 2:
        raise builtin.TrackingError(
            "Movement needs at least 2 positions", context=traj.origin)
    # Summed step by step, in order, so the result is reproducible exactly
    points = traj.points.tolist()
    total = 0.0
    for (x0, y0), (x1, y1) in zip(points[:-1], points[1:]):
        total += abs(x1 - x0) + abs(y1 - y0)
    return total


def filterActive(trajs: Sequence[PointTrajectory], kappa: float,
                 windowStart: int = 0,
                 windowEnd: Optional[int] = None) -> ActiveSet:
    """Keeps fully valid trajectories whose movement is strictly greater
    than kappa, in input order.
    """
    if kappa < 0:
        raise builtin.ConfigError(f"kappa must be >= 0, is {kappa}")
    active = tuple(
        traj for traj in trajs
        if traj.allValid and trajectoryMovement(traj) > kappa
    )
    if windowEnd is None:
        windowEnd = windowStart + (len(trajs[0]) - 1 if trajs else 0)
    logger.debug("%d of %d trajectories active at kappa=%s",
                 len(active), len(trajs), kappa)
    return ActiveSet(active, kappa, len(trajs), windowStart, windowEnd)


def sampleIndices(n: int, M: int, seed: int) -> List[int]:
    """M distinct indices from range(n), sorted, by a partial
    Fisher-Yates shuffle over a splitmix64 stream.
    """
    if n <= M:
        return list(range(n))
    rng = SplitMix64(seed)
    pool = list(range(n))
    for i in range(M):
        j = i + rng.below(n - i)
        pool[i], pool[j] = pool[j], pool[i]
    return sorted(pool[:M])


def sampleTraces(active: ActiveSet, M: int, seed: int) -> TraceSet:
    """Returns min(M, len(active)) trajectories in input order,
    deterministic given (active, M, seed).
    """
    if M < 1:
        raise builtin.ConfigError(f"Sample count must be >= 1, is {M}")
    chosen = sampleIndices(len(active), M, seed)
    return TraceSet(
        traces=tuple(active.trajectories[i] for i in chosen),
        windowStart=active.windowStart,
        windowEnd=active.windowEnd,
    )


def sliceTrajectories(trajs: Sequence[PointTrajectory], start: int,
                      stop: int) -> List[PointTrajectory]:
    """Positions [start, stop) of every trajectory."""
    return [traj.slice(start, stop) for traj in trajs]
