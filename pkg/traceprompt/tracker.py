"""tracker
Deterministic pyramidal Lucas-Kanade point tracking.

buildPyramid(frame, config) -> Pyramid
    Luminance pyramid with per-level gradients

trackPoint(prev, next, p, config) -> (point, TrackStatus)
    Tracks one point across one frame pair

trackPoints(frames, queries, config) -> trajectories
    Chains tracking over a frame window

trackPyramids(pyramids, queries, config) -> trajectories
    The same over pyramids that are already built

trackGrid(frames, K, config) -> trajectories
    Tracks a K x K grid of cell centres

oracleTrackPoint(prev, next, p, searchRadius) -> point
    Exhaustive block matching, used to check the tracker

verifyTracker(frames, config, searchRadius, gridSize, threads) -> VerifyResult
    Compares the tracker against the oracle over an episode
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import (
    List,
    Optional,
    Sequence,
    Tuple,
)

import numpy as np

from . import builtin, core
from .core import Frame, PointTrajectory, TrackStatus, TrackerConfig

logger = logging.getLogger(__name__)

# Status codes used inside the vectorised tracker
TRACKED, LOST, OUT_OF_BOUNDS = 0, 1, 2
STATUSES = (TrackStatus.TRACKED, TrackStatus.LOST, TrackStatus.OUT_OF_BOUNDS)


@dataclass(eq=False, frozen=True)
class PaddedLevel:
    """One pyramid level and its gradients, edge-padded by margin pixels
    on every side and flattened for window sampling.
    stride is the padded row length.
    """
    stride: int
    margin: int
    lum: np.ndarray
    gx: np.ndarray
    gy: np.ndarray


@dataclass(eq=False, frozen=True)
class Pyramid:
    """A luminance pyramid. Level 0 is full resolution; each further
    level halves the previous one, rounding up.
    gradients holds (gx, gy) central differences for every level, and
    padded the same data laid out for sampling.
    """
    levels: Tuple[np.ndarray, ...]
    gradients: Tuple[Tuple[np.ndarray, np.ndarray], ...]
    padded: Tuple[PaddedLevel, ...]

    def __repr__(self) -> str:
        dims = [f"{level.shape[1]}x{level.shape[0]}" for level in self.levels]
        return f"<Pyramid {', '.join(dims)}>"

    @property
    def shape(self) -> Tuple[int, int]:
        """(height, width) of level 0"""
        return self.levels[0].shape  # type: ignore

    @property
    def margin(self) -> int:
        return self.padded[0].margin


# Image helpers


def halve(image: np.ndarray) -> np.ndarray:
    """2x2 box average; odd dimensions replicate their last row/column."""
    if image.shape[0] % 2:
        image = np.concatenate([image, image[-1:, :]], axis=0)
    if image.shape[1] % 2:
        image = np.concatenate([image, image[:, -1:]], axis=1)
    return 0.25 * (image[0::2, 0::2] + image[0::2, 1::2]
                   + image[1::2, 0::2] + image[1::2, 1::2])


def centralGradients(image: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Returns (gx, gy); central differences inside, one-sided at edges."""
    gy, gx = np.gradient(image)
    return gx, gy


def padLevel(image: np.ndarray, gradients: Tuple[np.ndarray, np.ndarray],
             margin: int) -> PaddedLevel:
    def flat(array: np.ndarray) -> np.ndarray:
        padded = np.pad(array, margin, mode='edge').ravel()
        padded.flags.writeable = False
        return padded

    gx, gy = gradients
    return PaddedLevel(
        stride=image.shape[1] + 2 * margin,
        margin=margin,
        lum=flat(image),
        gx=flat(gx),
        gy=flat(gy),
    )


def windowTaps(level: PaddedLevel, centres: np.ndarray,
               windowHalf: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Locates the windows around centres in a padded level.

    Every sample of a window shares its centre's fractional part, so a
    window is read as one (side + 1)-square integer patch and
    interpolated with one pair of weights.
    Returns (index, ax, ay): the (P, (side + 1)^2) flat patch indices,
    row-major, and the (P, 1, 1) fractional parts of x and y.
    Centres must lie inside the unpadded level, with windowHalf below
    level.margin.
    """
    floor = np.floor(centres)
    frac = centres - floor
    corner = floor.astype(np.intp) + (level.margin - windowHalf)
    span = np.arange(2 * windowHalf + 2, dtype=np.intp)
    steps = (span[:, None] * level.stride + span).ravel()
    index = (corner[:, 1] * level.stride + corner[:, 0])[:, None] + steps
    return index, frac[:, 0, None, None], frac[:, 1, None, None]


def sampleWindows(flat: np.ndarray, index: np.ndarray, ax: np.ndarray,
                  ay: np.ndarray) -> np.ndarray:
    """(P, side^2) bilinear window samples of a padded, flattened image,
    row-major, from the taps of windowTaps.
    """
    patch = flat[index]
    side = int(round(np.sqrt(patch.shape[1])))
    patch = patch.reshape(-1, side, side)
    top = patch[:, :-1, :-1] * (1.0 - ax) + patch[:, :-1, 1:] * ax
    bottom = patch[:, 1:, :-1] * (1.0 - ax) + patch[:, 1:, 1:] * ax
    return (top * (1.0 - ay) + bottom * ay).reshape(len(patch), -1)


def windowFits(points: np.ndarray, shape: Tuple[int, int],
               windowHalf: int) -> np.ndarray:
    """True for each point whose whole window lies inside shape."""
    height, width = shape
    x, y = points[:, 0], points[:, 1]
    return ((x - windowHalf >= 0) & (x + windowHalf <= width - 1)
            & (y - windowHalf >= 0) & (y + windowHalf <= height - 1))


def minEigenvalue(gxx: np.ndarray, gxy: np.ndarray,
                  gyy: np.ndarray) -> np.ndarray:
    """Smaller eigenvalue of each symmetric 2x2 [[gxx, gxy], [gxy, gyy]]."""
    half = 0.5 * (gxx - gyy)
    return 0.5 * (gxx + gyy) - np.sqrt(half * half + gxy * gxy)


# Pyramids


def buildPyramid(frame: Frame, config: TrackerConfig) -> Pyramid:
    """Builds the luminance pyramid of frame with config.pyramidLevels
    halvings, so config.pyramidLevels + 1 levels.
    Raises ConfigError if the coarsest level cannot hold the tracking
    window.
    """
    levels = [frame.luminance()]
    for _ in range(config.pyramidLevels):
        levels.append(halve(levels[-1]))
    coarsest = levels[-1]
    if min(coarsest.shape) < config.windowSide:
        raise builtin.ConfigError(
            f"{frame.width}x{frame.height} frame is "
            f"{coarsest.shape[1]}x{coarsest.shape[0]} at pyramid level "
            f"{config.pyramidLevels}, smaller than the "
            f"{config.windowSide}px tracking window",
            context=f"frame {frame.index}",
        )
    gradients = tuple(centralGradients(level) for level in levels)
    for level in levels:
        level.flags.writeable = False
    return Pyramid(
        levels=tuple(levels),
        gradients=gradients,
        padded=tuple(padLevel(level, grads, config.windowHalf + 1)
                     for level, grads in zip(levels, gradients)),
    )


# Tracking


def rowDot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sum(a * b, axis=1)


def trackBatch(prev: Pyramid, next: Pyramid, points: np.ndarray,
               config: TrackerConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Coarse-to-fine Lucas-Kanade for every point at once.

    Each point is computed independently, so the batch it travels in
    never changes its result.
    Returns (positions, status codes); failed points keep their input
    position.
    """
    wh = config.windowHalf
    for pyramid in (prev, next):
        if pyramid.margin <= wh or len(pyramid.levels) != len(prev.levels):
            raise builtin.ConfigError(
                f"{pyramid!r} was not built for this tracker configuration")
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    count = len(points)
    npix = config.windowSide ** 2
    disp = np.zeros((count, 2), dtype=np.float64)
    lost = np.zeros(count, dtype=bool)
    escaped = np.zeros(count, dtype=bool)
    top = len(prev.levels) - 1

    for level in range(top, -1, -1):
        if level < top:
            disp *= 2.0
        base = points / (2.0 ** level)
        src, dst = prev.padded[level], next.padded[level]
        # Coarse windows may overhang the edge and sample it replicated;
        # at level 0 a window that does not fit is out of bounds.
        reach = wh if level == 0 else 0
        idx = np.flatnonzero(windowFits(base, prev.levels[level].shape, reach))
        if idx.size == 0:
            continue
        index, ax, ay = windowTaps(src, base[idx], wh)
        i0 = sampleWindows(src.lum, index, ax, ay)
        ix = sampleWindows(src.gx, index, ax, ay)
        iy = sampleWindows(src.gy, index, ax, ay)
        gxx, gxy, gyy = rowDot(ix, ix), rowDot(ix, iy), rowDot(iy, iy)
        det = gxx * gyy - gxy * gxy
        solvable = ((minEigenvalue(gxx, gxy, gyy) / npix >= config.minEigen)
                    & (det > 0))
        if level == 0:
            lost[idx[~solvable]] = True

        active = solvable.copy()
        for _ in range(config.maxIters):
            rows = np.flatnonzero(active)
            if rows.size == 0:
                break
            target = base[idx[rows]] + disp[idx[rows]]
            fits = windowFits(target, next.levels[level].shape, reach)
            if level == 0:
                escaped[idx[rows[~fits]]] = True
            active[rows[~fits]] = False
            rows, target = rows[fits], target[fits]
            if rows.size == 0:
                break
            index, ax, ay = windowTaps(dst, target, wh)
            i1 = sampleWindows(dst.lum, index, ax, ay)
            sub = slice(None) if rows.size == idx.size else rows
            diff = i0[sub] - i1
            bx = rowDot(diff, ix[sub])
            by = rowDot(diff, iy[sub])
            ddx = (gyy[rows] * bx - gxy[rows] * by) / det[rows]
            ddy = (gxx[rows] * by - gxy[rows] * bx) / det[rows]
            disp[idx[rows], 0] += ddx
            disp[idx[rows], 1] += ddy
            converged = np.hypot(ddx, ddy) < config.epsilon
            active[rows[converged]] = False

    final = points + disp
    status = np.full(count, TRACKED, dtype=np.int8)
    status[lost] = LOST
    status[escaped | ~windowFits(final, next.shape, wh)] = OUT_OF_BOUNDS
    status[~windowFits(points, prev.shape, wh)] = OUT_OF_BOUNDS
    positions = np.where((status == TRACKED)[:, None], final, points)
    return positions, status


def trackPoint(prev: Pyramid, next: Pyramid, p: core.Point,
               config: TrackerConfig) -> Tuple[core.Point, TrackStatus]:
    """Tracks point p from prev into next.
    Lost and out-of-bounds results return p unchanged.
    """
    positions, status = trackBatch(prev, next, np.array([p]), config)
    x, y = positions[0]
    return (float(x), float(y)), STATUSES[status[0]]


def checkFrames(frames: Sequence[Frame]) -> None:
    """Raises TrackingError unless frames form a trackable window."""
    if len(frames) < 2:
        raise builtin.TrackingError(
            f"window too short: {len(frames)} frame(s), need at least 2")
    size = frames[0].size
    for frame in frames[1:]:
        if frame.size != size:
            raise builtin.TrackingError(
                f"frame size mismatch: {frame.size} vs {size}",
                context=f"frame {frame.index}",
            )


def trackPyramids(pyramids: Sequence[Pyramid], queries: core.Points,
                  config: TrackerConfig) -> List[PointTrajectory]:
    """Chains trackBatch over consecutive pyramids starting from the
    first. A point that fails stays frozen at its last valid position
    with its failure status for the rest of the window.
    """
    if len(pyramids) < 2:
        raise builtin.TrackingError(
            f"window too short: {len(pyramids)} frame(s), need at least 2")
    start = np.asarray(queries, dtype=np.float64).reshape(-1, 2)
    height, width = pyramids[0].shape
    inside = ((start[:, 0] >= 0) & (start[:, 0] < width)
              & (start[:, 1] >= 0) & (start[:, 1] < height))
    if not inside.all():
        bad = int(np.flatnonzero(~inside)[0])
        raise builtin.TrackingError(
            f"query {tuple(start[bad])} outside {width}x{height} frame",
            context=f"query {bad}",
        )

    length, count = len(pyramids), len(start)
    history = np.empty((length, count, 2), dtype=np.float64)
    codes = np.full((length, count), TRACKED, dtype=np.int8)
    history[0] = start
    alive = np.ones(count, dtype=bool)
    for step in range(1, length):
        history[step] = history[step - 1]
        codes[step] = codes[step - 1]
        rows = np.flatnonzero(alive)
        if rows.size == 0:
            continue
        positions, status = trackBatch(pyramids[step - 1], pyramids[step],
                                       history[step - 1, rows], config)
        history[step, rows] = positions
        codes[step, rows] = status
        alive[rows[status != TRACKED]] = False
    logger.debug("Tracked %d points over %d frames, %d lost",
                 count, length, int((~alive).sum()))
    return [
        PointTrajectory(
            points=history[:, q],
            status=tuple(STATUSES[code] for code in codes[:, q]),
            origin=q,
        )
        for q in range(count)
    ]


def trackPoints(frames: Sequence[Frame], queries: core.Points,
                config: TrackerConfig) -> List[PointTrajectory]:
    """Returns one trajectory of len(frames) per query, in query order."""
    checkFrames(frames)
    pyramids = [buildPyramid(frame, config) for frame in frames]
    return trackPyramids(pyramids, queries, config)


def gridQueries(width: int, height: int, K: int) -> np.ndarray:
    """K x K cell centres, row-major (j outer, i inner)."""
    if K < 2:
        raise builtin.ConfigError(f"Grid size must be >= 2, is {K}")
    cells = np.arange(K, dtype=np.float64) + 0.5
    ys, xs = np.meshgrid(cells * height / K, cells * width / K, indexing='ij')
    return np.stack([xs.ravel(), ys.ravel()], axis=1)


def trackGrid(frames: Sequence[Frame], K: int,
              config: TrackerConfig) -> List[PointTrajectory]:
    """Tracks the K x K grid of cell centres of the first frame."""
    checkFrames(frames)
    first = frames[0]
    return trackPoints(frames, gridQueries(first.width, first.height, K), config)


# Block-matching oracle


def oracleTrackPoint(prev: Frame, next: Frame, p: Tuple[int, int],
                     searchRadius: int,
                     windowHalf: int = builtin.WINDOW_HALF) -> Tuple[int, int]:
    """Exhaustive integer search minimising the sum of absolute
    luminance differences over the window.
    Ties go to the smallest l1 displacement, then smaller dy, then
    smaller dx.
    """
    x, y = int(p[0]), int(p[1])
    reach = windowHalf + searchRadius
    for frame in (prev, next):
        if not (reach <= x <= frame.width - 1 - reach
                and reach <= y <= frame.height - 1 - reach):
            raise builtin.TrackingError(
                f"Window of {2 * windowHalf + 1}px with search radius "
                f"{searchRadius} cannot fit around {(x, y)}",
                context=f"frame {frame.index}",
            )
    lum0, lum1 = prev.luminance(), next.luminance()
    patch = lum0[y - windowHalf:y + windowHalf + 1,
                 x - windowHalf:x + windowHalf + 1]
    best = None
    for dy in range(-searchRadius, searchRadius + 1):
        for dx in range(-searchRadius, searchRadius + 1):
            cx, cy = x + dx, y + dy
            candidate = lum1[cy - windowHalf:cy + windowHalf + 1,
                             cx - windowHalf:cx + windowHalf + 1]
            sad = float(np.sum(np.abs(patch - candidate)))
            key = (sad, abs(dx) + abs(dy), dy, dx)
            if best is None or key < best:
                best = key
    assert best is not None
    return (x + best[3], y + best[2])


@dataclass(frozen=True)
class VerifyResult:
    """Deviation of Lucas-Kanade from the block-matching oracle, in px."""
    maxDeviation: float
    meanDeviation: float
    compared: int
    skipped: int


def verifyTracker(frames: Sequence[Frame], config: TrackerConfig,
                  searchRadius: int = 5, gridSize: int = 8,
                  threads: int = 1) -> VerifyResult:
    """Tracks an interior grid of integer points across every
    consecutive frame pair with both trackers.
    Points the tracker reports as lost or out of bounds are skipped.
    Frame pairs may be checked on up to `threads` workers without
    changing the result.
    """
    checkFrames(frames)
    width, height = frames[0].size
    margin = config.windowHalf + searchRadius
    if width - 1 - 2 * margin < 0 or height - 1 - 2 * margin < 0:
        raise builtin.TrackingError(
            f"{width}x{height} frames leave no room for the search window")
    xs = np.linspace(margin, width - 1 - margin, gridSize).round().astype(int)
    ys = np.linspace(margin, height - 1 - margin, gridSize).round().astype(int)
    queries = [(int(x), int(y)) for y in ys for x in xs]
    pyramids = [buildPyramid(frame, config) for frame in frames]

    def comparePair(step: int) -> List[Optional[float]]:
        positions, status = trackBatch(pyramids[step - 1], pyramids[step],
                                       np.array(queries, dtype=np.float64), config)
        deviations: List[Optional[float]] = []
        for q, query in enumerate(queries):
            if status[q] != TRACKED:
                deviations.append(None)
                continue
            ox, oy = oracleTrackPoint(frames[step - 1], frames[step], query,
                                      searchRadius, config.windowHalf)
            deviations.append(float(np.hypot(positions[q, 0] - ox,
                                             positions[q, 1] - oy)))
        return deviations

    steps = range(1, len(frames))
    if threads > 1 and len(steps) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pairs = list(pool.map(comparePair, steps))
    else:
        pairs = [comparePair(step) for step in steps]
    deviations = [d for pair in pairs for d in pair if d is not None]
    skipped = sum(d is None for pair in pairs for d in pair)
    if not deviations:
        return VerifyResult(0.0, 0.0, 0, skipped)
    return VerifyResult(max(deviations), sum(deviations) / len(deviations),
                        len(deviations), skipped)
