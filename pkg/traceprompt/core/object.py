"""object.py

Defines the immutable values passed between traceprompt modules.

Frame
    One RGB observation

Episode
    Frames, per-step actions and an instruction

TrackStatus
    Outcome of tracking one point across one frame pair

PointTrajectory
    One point's positions over a window

TraceSet
    The sampled trajectories used for one visual prompt

ValidationReport
    Violations found in an episode
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import (
    Iterator,
    Tuple,
)

import numpy as np

from .. import builtin
from . import types as t

__all__ = [
    'Episode',
    'Frame',
    'PointTrajectory',
    'TraceSet',
    'TrackStatus',
    'ValidationReport',
    'readOnly',
]

# Rec. 601 luma weights
LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float64)


def readOnly(array: np.ndarray) -> np.ndarray:
    """Returns array with its writeable flag cleared."""
    array.flags.writeable = False
    return array


@dataclass(eq=False, frozen=True)
class Frame:
    """An 8-bit RGB observation.
    pixels is a (height, width, 3) uint8 array in row-major order; it is
    copied on construction and never written afterwards.
    """
    pixels: np.ndarray = field(repr=False)
    index: int = 0

    def __post_init__(self) -> None:
        pixels = np.array(self.pixels, dtype=np.uint8, copy=True)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise builtin.ValidationError(
                f"Expected (height, width, 3) pixels, got {pixels.shape}",
                context=f"frame {self.index}",
            )
        object.__setattr__(self, 'pixels', readOnly(pixels))

    def __repr__(self) -> str:
        return f"<Frame {self.index}: {self.width}x{self.height}>"

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def size(self) -> Tuple[int, int]:
        return (self.width, self.height)

    def luminance(self) -> np.ndarray:
        """Returns the Rec. 601 luminance as float64 in [0, 255]."""
        return self.pixels.astype(np.float64) @ LUMA

    def withPixels(self, pixels: np.ndarray) -> "Frame":
        """Returns a new Frame at the same index with different pixels."""
        return type(self)(pixels, self.index)

    def sameAs(self, other: "Frame") -> bool:
        """True if both frames hold byte-identical pixels."""
        return (self.pixels.shape == other.pixels.shape
                and bool(np.array_equal(self.pixels, other.pixels)))


@dataclass(eq=False, frozen=True)
class Episode:
    """A single demonstration.
    actions are kept as plain tuples so malformed data (ragged
    dimensions) can still be represented and reported by validation.
    """
    frames: Tuple[Frame, ...]
    actions: Tuple[t.ActionVector, ...]
    instruction: str
    episodeId: str

    def __post_init__(self) -> None:
        object.__setattr__(self, 'frames', tuple(self.frames))
        object.__setattr__(
            self, 'actions',
            tuple(tuple(float(v) for v in action) for action in self.actions),
        )

    def __repr__(self) -> str:
        return f"<Episode {self.episodeId!r}: {len(self.frames)} frames>"

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def actionDim(self) -> int:
        return len(self.actions[0]) if self.actions else 0


class TrackStatus(Enum):
    """Outcome of tracking a point across one frame pair."""
    TRACKED = "tracked"
    LOST = "lost"
    OUT_OF_BOUNDS = "out_of_bounds"


@dataclass(eq=False, frozen=True)
class PointTrajectory:
    """A point's positions over consecutive timesteps.

    Attributes
    ----------
    - points
        (L, 2) float64 array of (x, y); positions after a loss repeat
        the last valid position
    - status
        one TrackStatus per position; position 0 is always TRACKED for
        a freshly tracked query
    - origin
        grid cell or query index the trajectory started from
    """
    points: np.ndarray = field(repr=False)
    status: Tuple[TrackStatus, ...]
    origin: int

    def __post_init__(self) -> None:
        points = np.array(self.points, dtype=np.float64, copy=True)
        points = points.reshape(-1, 2)
        if len(points) == 0:
            raise builtin.TrackingError("Empty trajectory", context=self.origin)
        if len(self.status) != len(points):
            raise builtin.TrackingError(
                f"{len(self.status)} statuses for {len(points)} points",
                context=self.origin,
            )
        object.__setattr__(self, 'points', readOnly(points))
        object.__setattr__(self, 'status', tuple(self.status))

    def __len__(self) -> int:
        return len(self.points)

    def __repr__(self) -> str:
        return f"<PointTrajectory {self.origin}: {len(self)} points>"

    @property
    def valid(self) -> Tuple[bool, ...]:
        return tuple(s is TrackStatus.TRACKED for s in self.status)

    @property
    def allValid(self) -> bool:
        return all(s is TrackStatus.TRACKED for s in self.status)

    @property
    def start(self) -> t.Point:
        x, y = self.points[0]
        return (float(x), float(y))

    @property
    def final(self) -> t.Point:
        x, y = self.points[-1]
        return (float(x), float(y))

    def slice(self, start: int, stop: int) -> "PointTrajectory":
        """Returns the sub-trajectory over positions [start, stop)."""
        if not 0 <= start < stop <= len(self):
            raise builtin.TrackingError(
                f"Slice [{start}, {stop}) outside trajectory of {len(self)}",
                context=self.origin,
            )
        return type(self)(self.points[start:stop], self.status[start:stop],
                          self.origin)


@dataclass(eq=False, frozen=True)
class TraceSet:
    """The sampled active trajectories for one prompt, covering
    timesteps windowStart..windowEnd inclusive.
    """
    traces: Tuple[PointTrajectory, ...]
    windowStart: int
    windowEnd: int

    def __post_init__(self) -> None:
        object.__setattr__(self, 'traces', tuple(self.traces))

    def __len__(self) -> int:
        return len(self.traces)

    def __iter__(self) -> Iterator[PointTrajectory]:
        return iter(self.traces)

    def __repr__(self) -> str:
        origins = [trace.origin for trace in self.traces]
        return f"<TraceSet [{self.windowStart}, {self.windowEnd}]: {origins}>"

    @property
    def origins(self) -> Tuple[int, ...]:
        return tuple(trace.origin for trace in self.traces)

    @property
    def endpoints(self) -> np.ndarray:
        """(len, 2) array of final positions."""
        if not self.traces:
            return np.zeros((0, 2), dtype=np.float64)
        return np.stack([trace.points[-1] for trace in self.traces])


@dataclass(frozen=True)
class ValidationReport:
    """Violations found by validateEpisode; empty means OK."""
    violations: Tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def raiseIfInvalid(self, context: object = None,
                       error: type = builtin.ValidationError) -> None:
        if self.violations:
            raise error("Episode failed validation", context=context,
                        violations=self.violations)

