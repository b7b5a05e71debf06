"""core
Domain types shared by every traceprompt module, and episode validation.

types.py contains the attribute type aliases.
object.py contains the immutable domain values (Frame, Episode, ...).
config.py contains the configuration dataclasses.

validateEpisode(episode) -> ValidationReport
    Checks every episode, frame and action invariant
"""
import math
from typing import List

# Merge namespace
from .object import *
from .types import *
from .config import *

from . import (
    object as o,
    types as t,
    config as c,
)

from .. import builtin


def validateEpisode(episode: o.Episode) -> o.ValidationReport:
    """Returns a report of every invariant the episode breaks.
    Violations are data: nothing is raised and nothing is mutated.
    """
    violations: List[str] = []
    frames, actions = episode.frames, episode.actions
    if not frames:
        violations.append("episode has no frames")
    if len(actions) != len(frames):
        violations.append(
            f"action/frame length mismatch: {len(actions)} actions "
            f"for {len(frames)} frames"
        )

    if frames:
        width, height = frames[0].size
        for position, frame in enumerate(frames):
            if frame.size != (width, height):
                violations.append(
                    f"frame size mismatch at {position}: "
                    f"{frame.width}x{frame.height}, expected {width}x{height}"
                )
            if (frame.width < builtin.MIN_FRAME_SIDE
                    or frame.height < builtin.MIN_FRAME_SIDE):
                violations.append(
                    f"undersized frame at {position}: "
                    f"{frame.width}x{frame.height} below "
                    f"{builtin.MIN_FRAME_SIDE}x{builtin.MIN_FRAME_SIDE}"
                )
            if frame.index != position:
                violations.append(
                    f"frame index mismatch at {position}: index {frame.index}"
                )

    if actions:
        dim = len(actions[0])
        if dim == 0:
            violations.append("action dimension is zero")
        for position, action in enumerate(actions):
            if len(action) != dim:
                violations.append(
                    f"action dimension mismatch at {position}: "
                    f"{len(action)}, expected {dim}"
                )
            if not all(math.isfinite(v) for v in action):
                violations.append(f"non-finite action value at {position}")
    return o.ValidationReport(tuple(violations))
