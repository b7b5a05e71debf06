"""overlay
Draws sampled traces onto an observation frame.

paletteColor(index, palette) -> RGB

rasteriseTrace(trace, style, shape) -> mask
    Pixels covered by one trace's polyline and endpoint marker

renderOverlay(frame, traces, style) -> Frame
    A new frame with every trace composited in order

Strokes are built from filled discs stamped every half pixel along each
segment, with vertices snapped to the half-pixel grid, so the output is
byte-exact on every platform.
"""

import math
from typing import List, Tuple

import numpy as np

from . import builtin, core
from .core import Frame, OverlayStyle, PointTrajectory, TraceSet

STAMP_STEP = 0.5


def paletteColor(index: int,
                 palette: core.Palette = builtin.DEFAULT_PALETTE) -> core.RGB:
    """Colours repeat once the palette is exhausted."""
    return palette[index % len(palette)]


def snapHalfPixel(points: np.ndarray) -> np.ndarray:
    return np.round(points * 2.0) / 2.0


def stampCentres(vertices: np.ndarray) -> List[Tuple[float, float]]:
    """Disc centres every STAMP_STEP px along the polyline, both ends
    of every segment included.
    """
    centres = [(float(vertices[0, 0]), float(vertices[0, 1]))]
    for (ax, ay), (bx, by) in zip(vertices[:-1].tolist(), vertices[1:].tolist()):
        steps = max(1, math.ceil(math.hypot(bx - ax, by - ay) / STAMP_STEP))
        for k in range(1, steps + 1):
            f = k / steps
            centres.append((ax + (bx - ax) * f, ay + (by - ay) * f))
    return centres


def stampDisc(mask: np.ndarray, cx: float, cy: float, radius: float) -> None:
    """Marks every pixel whose centre lies within radius of (cx, cy)."""
    height, width = mask.shape
    x0, x1 = max(0, math.floor(cx - radius)), min(width - 1, math.ceil(cx + radius))
    y0, y1 = max(0, math.floor(cy - radius)), min(height - 1, math.ceil(cy + radius))
    if x0 > x1 or y0 > y1:
        return
    ys, xs = np.ogrid[y0:y1 + 1, x0:x1 + 1]
    mask[y0:y1 + 1, x0:x1 + 1] |= (xs - cx) ** 2 + (ys - cy) ** 2 <= radius * radius


def rasteriseTrace(trace: PointTrajectory, style: OverlayStyle,
                   shape: Tuple[int, int]) -> np.ndarray:
    """Boolean (height, width) mask of the pixels one trace covers."""
    mask = np.zeros(shape, dtype=bool)
    vertices = snapHalfPixel(trace.points)
    for cx, cy in stampCentres(vertices):
        stampDisc(mask, cx, cy, style.linewidth / 2.0)
    ex, ey = vertices[-1]
    stampDisc(mask, float(ex), float(ey), style.endpointRadius)
    return mask


def composite(image: np.ndarray, mask: np.ndarray, color: core.RGB,
              alpha: float) -> None:
    """out = alpha * color + (1 - alpha) * under, over the masked pixels."""
    under = image[mask].astype(np.float64)
    blended = alpha * np.array(color, dtype=np.float64) + (1.0 - alpha) * under
    image[mask] = np.floor(blended + 0.5).astype(np.uint8)


def renderOverlay(frame: Frame, traces: TraceSet,
                  style: OverlayStyle = OverlayStyle()) -> Frame:
    """Returns a new frame with traces drawn in order, later traces over
    earlier ones. The input frame is never modified.
    """
    image = np.array(frame.pixels, copy=True)
    shape = (frame.height, frame.width)
    for i, trace in enumerate(traces):
        mask = rasteriseTrace(trace, style, shape)
        composite(image, mask, paletteColor(i, style.palette), style.alpha)
    return frame.withPixels(image)
