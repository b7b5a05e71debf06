"""types.py

Attribute types used in traceprompt objects.
"""

from typing import (
    Sequence,
    Tuple,
)

__all__ = [
    'Point',
    'Points',
    'RGB',
    'Palette',
    'ActionVector',
    'Tokens',
    'Window',
]

Point = Tuple[float, float]  # (x, y) in pixels, sub-pixel precision
Points = Sequence[Point]

RGB = Tuple[int, int, int]  # 8 bits per channel
Palette = Tuple[RGB, ...]

ActionVector = Tuple[float, ...]  # one continuous action, dimension D
Tokens = Tuple[int, ...]  # one bin index per action dimension

Window = Tuple[int, int]  # timestep range (start, end), end exclusive
