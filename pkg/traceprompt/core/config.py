"""config.py

Configuration values for every stage of the pipeline.

TraceConfig
    Grid size, sample count, window, movement threshold, dropout,
    redraw interval and seed

TrackerConfig
    Pyramidal Lucas-Kanade parameters

OverlayStyle
    How traces are drawn

PromptTemplates
    Prompt text and separator marker

PipelineConfig
    All of the above plus runtime options

configHash(config)
    SHA-256 of the canonical JSON snapshot
"""

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping

from .. import builtin
from . import types as t

__all__ = [
    'OverlayStyle',
    'PipelineConfig',
    'PromptTemplates',
    'TraceConfig',
    'TrackerConfig',
    'configHash',
]

PROMPT_MODES = ('visual', 'text')


def expectElseError(condition: bool, msg: str, context: Any = None) -> None:
    """Raises ConfigError with msg if condition does not hold."""
    if not condition:
        raise builtin.ConfigError(msg, context)


def snapshot(value: Any) -> Any:
    """Converts dataclasses, tuples and mappings into JSON-safe values."""
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: snapshot(getattr(value, f.name))
                for f in dataclasses.fields(value)}
    if isinstance(value, Mapping):
        return {str(k): snapshot(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [snapshot(v) for v in value]
    return value


@dataclass(frozen=True)
class TraceConfig:
    """Visual trace generation parameters.

    gridSize K, sampleCount M, window N, kappa (total l1 movement in
    pixels a trajectory must exceed to count as active), dropoutProb,
    redrawSteps for the streaming tracker, and the base seed.
    """
    gridSize: int = builtin.GRID_SIZE
    sampleCount: int = builtin.SAMPLE_COUNT
    window: int = builtin.WINDOW
    kappa: float = builtin.KAPPA
    dropoutProb: float = builtin.DROPOUT_PROB
    redrawSteps: int = builtin.REDRAW_STEPS
    seed: int = builtin.SEED

    def __post_init__(self) -> None:
        expectElseError(self.gridSize >= 2, f"gridSize must be >= 2, is {self.gridSize}")
        expectElseError(self.sampleCount >= 1, f"sampleCount must be >= 1, is {self.sampleCount}")
        expectElseError(self.window >= 1, f"window must be >= 1, is {self.window}")
        expectElseError(self.kappa >= 0, f"kappa must be >= 0, is {self.kappa}")
        expectElseError(self.redrawSteps >= 1, f"redrawSteps must be >= 1, is {self.redrawSteps}")
        expectElseError(0 <= self.dropoutProb <= 1,
                        f"dropoutProb must be in [0, 1], is {self.dropoutProb}")
        expectElseError(self.sampleCount <= self.gridSize ** 2,
                        f"sampleCount {self.sampleCount} exceeds "
                        f"{self.gridSize}x{self.gridSize} grid")
        expectElseError(0 <= self.seed < 2 ** 64,
                        f"seed must be a 64-bit unsigned integer, is {self.seed}")

    def asDict(self) -> Dict[str, Any]:
        return snapshot(self)


@dataclass(frozen=True)
class TrackerConfig:
    """Pyramidal Lucas-Kanade parameters.
    Each pyramid holds pyramidLevels + 1 images; the tracking window is
    (2 * windowHalf + 1) pixels square.
    """
    pyramidLevels: int = builtin.PYRAMID_LEVELS
    windowHalf: int = builtin.WINDOW_HALF
    maxIters: int = builtin.MAX_ITERS
    epsilon: float = builtin.EPSILON
    minEigen: float = builtin.MIN_EIGEN

    def __post_init__(self) -> None:
        expectElseError(self.pyramidLevels >= 0,
                        f"pyramidLevels must be >= 0, is {self.pyramidLevels}")
        expectElseError(self.windowHalf >= 2, f"windowHalf must be >= 2, is {self.windowHalf}")
        expectElseError(self.maxIters >= 1, f"maxIters must be >= 1, is {self.maxIters}")
        expectElseError(self.epsilon > 0, f"epsilon must be > 0, is {self.epsilon}")
        expectElseError(self.minEigen >= 0, f"minEigen must be >= 0, is {self.minEigen}")

    @property
    def windowSide(self) -> int:
        return 2 * self.windowHalf + 1

    def asDict(self) -> Dict[str, Any]:
        return snapshot(self)


@dataclass(frozen=True)
class OverlayStyle:
    """How a TraceSet is drawn onto a frame."""
    linewidth: float = builtin.LINEWIDTH
    alpha: float = builtin.ALPHA
    palette: t.Palette = builtin.DEFAULT_PALETTE
    endpointRadius: float = builtin.ENDPOINT_RADIUS

    def __post_init__(self) -> None:
        palette = tuple(tuple(int(c) for c in color) for color in self.palette)
        object.__setattr__(self, 'palette', palette)
        expectElseError(self.linewidth >= 1, f"linewidth must be >= 1, is {self.linewidth}")
        expectElseError(0 <= self.alpha <= 1, f"alpha must be in [0, 1], is {self.alpha}")
        expectElseError(len(palette) > 0, "palette must not be empty")
        expectElseError(self.endpointRadius >= 0,
                        f"endpointRadius must be >= 0, is {self.endpointRadius}")
        for color in palette:
            expectElseError(len(color) == 3 and all(0 <= c <= 255 for c in color),
                            f"Invalid RGB colour {color}")

    def asDict(self) -> Dict[str, Any]:
        return snapshot(self)


@dataclass(frozen=True)
class PromptTemplates:
    """Prompt wording. Templates are formatted with {instruction};
    the text-trace template also takes {trace} and {window}.
    """
    traced: str = builtin.TRACED_TEMPLATE
    plain: str = builtin.PLAIN_TEMPLATE
    textTrace: str = builtin.TEXT_TRACE_TEMPLATE
    separator: str = builtin.SEPARATOR
    traceHint: str = builtin.TRACE_HINT

    def __post_init__(self) -> None:
        expectElseError(bool(self.separator) and not any(c.isspace() for c in self.separator),
                        f"separator must be a single marker, is {self.separator!r}")
        expectElseError(self.traceHint in self.traced,
                        "traced template must contain the trace hint")
        expectElseError(self.traceHint not in self.plain,
                        "plain template must not contain the trace hint")

    def asDict(self) -> Dict[str, Any]:
        return snapshot(self)


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a dataset annotation run depends on."""
    trace: TraceConfig = field(default_factory=TraceConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    style: OverlayStyle = field(default_factory=OverlayStyle)
    templates: PromptTemplates = field(default_factory=PromptTemplates)
    threads: int = 1
    promptMode: str = 'visual'
    vocabOffset: int = 0
    textPrecision: int = 1

    def __post_init__(self) -> None:
        expectElseError(self.threads >= 1, f"threads must be >= 1, is {self.threads}")
        expectElseError(self.promptMode in PROMPT_MODES,
                        f"promptMode must be one of {PROMPT_MODES}, is {self.promptMode!r}")
        expectElseError(self.vocabOffset >= 0, f"vocabOffset must be >= 0, is {self.vocabOffset}")
        expectElseError(self.textPrecision >= 1,
                        f"textPrecision must be >= 1, is {self.textPrecision}")

    def asDict(self) -> Dict[str, Any]:
        """Snapshot of everything that affects output.
        threads is excluded: output does not depend on worker count.
        """
        data = snapshot(self)
        del data['threads']
        return data


def configHash(config: PipelineConfig) -> str:
    """Returns the hex SHA-256 of the canonical config snapshot."""
    canonical = json.dumps(config.asDict(), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()
