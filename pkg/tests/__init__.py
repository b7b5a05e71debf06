"""Builders for synthetic test data shared by the test modules."""
import contextlib
import io
from typing import Iterator, List, Tuple

import numpy as np

from traceprompt.core import Episode, Frame

INSTRUCTION = "put the carrot on the plate"


def blur(image: np.ndarray, radius: int) -> np.ndarray:
    """Cyclic box blur, applied twice along each axis."""
    for _ in range(2):
        for axis in (0, 1):
            image = sum(
                np.roll(image, s, axis=axis) for s in range(-radius, radius + 1)
            ) / (2 * radius + 1)
    return image


def texture(width: int = 64, height: int = 64, seed: int = 0,
            scales: Tuple[int, ...] = (1, 2, 4, 8)) -> np.ndarray:
    """Grey noise with structure at every scale in scales, stretched to
    a standard deviation of 50. The blur wraps around, so cyclic shifts
    of the result are exact translations.
    """
    rng = np.random.default_rng(seed)
    image = np.zeros((height, width))
    for radius in scales:
        layer = blur(rng.uniform(0, 1, size=(height, width)), radius)
        image += (layer - layer.mean()) / layer.std()
    image = (image - image.mean()) / image.std() * 50.0 + 128.0
    grey = np.round(np.clip(image, 0, 255)).astype(np.uint8)
    return np.repeat(grey[:, :, None], 3, axis=2)


def noiseFrame(width: int = 64, height: int = 64, seed: int = 0,
               index: int = 0) -> Frame:
    return Frame(texture(width, height, seed), index)


def uniformFrame(width: int = 64, height: int = 64, value: int = 128,
                 index: int = 0) -> Frame:
    return Frame(np.full((height, width, 3), value, dtype=np.uint8), index)


def shifted(frame: Frame, dx: int, dy: int, index: int = 0) -> Frame:
    """frame moved cyclically by (dx, dy) pixels."""
    return Frame(np.roll(frame.pixels, (dy, dx), axis=(0, 1)), index)


def translatingFrames(count: int, step: Tuple[int, int] = (2, 0),
                      width: int = 64, height: int = 64,
                      seed: int = 0) -> List[Frame]:
    base = noiseFrame(width, height, seed)
    return [shifted(base, k * step[0], k * step[1], index=k) for k in range(count)]


def staticFrames(count: int, width: int = 64, height: int = 64,
                 seed: int = 0) -> List[Frame]:
    base = noiseFrame(width, height, seed)
    return [Frame(base.pixels, k) for k in range(count)]


def makeEpisode(frames: List[Frame], episodeId: str = 'ep0', dim: int = 7,
                seed: int = 0, instruction: str = INSTRUCTION) -> Episode:
    rng = np.random.default_rng(seed)
    actions = [tuple(float(v) for v in rng.uniform(-1, 1, dim)) for _ in frames]
    return Episode(tuple(frames), tuple(actions), instruction, episodeId)


def translatingEpisode(T: int, step: Tuple[int, int] = (2, 0),
                       episodeId: str = 'ep0', width: int = 64, height: int = 64,
                       seed: int = 0) -> Episode:
    return makeEpisode(translatingFrames(T, step, width, height, seed),
                       episodeId, seed=seed)


@contextlib.contextmanager
def capture(streamName: str = 'stdout') -> Iterator[io.StringIO]:
    """Collects what is printed to stdout or stderr inside the block."""
    buffer = io.StringIO()
    redirect = {
        'stdout': contextlib.redirect_stdout,
        'stderr': contextlib.redirect_stderr,
    }[streamName]
    with redirect(buffer):
        yield buffer
