"""Errors and fixed constants used throughout traceprompt.
"""

from typing import Any, Optional, Sequence, Tuple

# Errors

class TraceError(Exception):
    """Base exception class for all traceprompt errors.

    context is an optional locator (path, episode id, timestep) that is
    prefixed to the message when reported.
    """

    def __init__(self, msg: str, context: Optional[Any] = None) -> None:
        super().__init__(msg)
        self.context = context

    def msg(self) -> str:
        return self.args[0]

    def report(self) -> str:
        """Returns the contained context and message as a formatted string"""
        if self.context is None:
            return self.msg()
        return f"{self.context}: {self.msg()}"

class ConfigError(TraceError):
    """Raised for configurations that break their invariants."""

class ValidationError(TraceError):
    """Raised when episode data breaks its invariants.
    The individual violations are kept in .violations
    """

    def __init__(self, msg: str, context: Optional[Any] = None,
                 violations: Sequence[str] = ()) -> None:
        super().__init__(msg, context)
        self.violations: Tuple[str, ...] = tuple(violations)

    def report(self) -> str:
        lines = [super().report()]
        lines += [f"  - {violation}" for violation in self.violations]
        return '\n'.join(lines)

class EpisodeValidationError(ValidationError):
    """Raised by the loader when a stored episode fails validation."""

class TrackingError(TraceError):
    """Raised when tracker preconditions are not met."""

class BinningError(TraceError):
    """Raised by action fitting, encoding and decoding."""

class SchemaError(TraceError):
    """Raised when a prompt record breaks its invariants."""

class DataError(TraceError):
    """Base class for dataset I/O failures."""

class MissingMetadataError(DataError):
    """episode.json is absent or unreadable."""

class NonContiguousFramesError(DataError):
    """Frame files do not form a contiguous index sequence from 0."""

class FrameDecodeError(DataError):
    """A frame file could not be decoded as an RGB image."""

class OutputError(DataError):
    """Writing to the output directory failed."""


# Exit codes

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


# Defaults

GRID_SIZE = 40
SAMPLE_COUNT = 5
WINDOW = 6
KAPPA = 2.0
DROPOUT_PROB = 0.1
REDRAW_STEPS = 20
SEED = 0

PYRAMID_LEVELS = 3
WINDOW_HALF = 5
MAX_ITERS = 30
EPSILON = 0.01
MIN_EIGEN = 1e-4

N_BINS = 256
ACTION_DIM = 7

MIN_FRAME_SIDE = 32


# Overlay colours, in drawing order

RED = (255, 0, 0)
YELLOW = (255, 255, 0)
PURPLE = (160, 32, 240)
BLUE = (0, 0, 255)
GREEN = (0, 200, 0)

DEFAULT_PALETTE = (RED, YELLOW, PURPLE, BLUE, GREEN)

LINEWIDTH = 2
ALPHA = 1.0
ENDPOINT_RADIUS = 3


# Prompt text

SEPARATOR = '<sep>'

TRACE_HINT = 'overlaid with the visual trace'

TRACED_TEMPLATE = (
    'You are given two images: the current observation and the same '
    'observation ' + TRACE_HINT + ' of the robot end effector. '
    'What action should the robot take to {instruction}?'
)

PLAIN_TEMPLATE = 'What action should the robot take to {instruction}?'

TEXT_TRACE_TEMPLATE = (
    'You are given the current observation and the movement of tracked '
    'points on the robot end effector over the last {window} steps, '
    'listed as pixel coordinates from oldest to newest:\n'
    '{trace}\n'
    'What action should the robot take to {instruction}?'
)


# File layout

FRAME_PATTERN = 'frame_{:05d}.png'
OVERLAY_PATTERN = 'overlay_{:05d}.png'
EPISODE_META = 'episode.json'
TRACES_DOC = 'traces.json'
PROMPTS_DOC = 'prompts.jsonl'
STREAM_TRACES_DOC = 'traces.jsonl'
MANIFEST = 'manifest.json'
