"""actions
Quantile discretisation of continuous actions into bin tokens.

fitBins(samples, nBins) -> BinTable
    Per-dimension interior boundaries at the i/nBins empirical quantiles

encodeAction(action, bins) -> tokens
decodeTokens(tokens, bins) -> action (bin centres)

dumpBins(bins) -> str, loadBins(text) -> BinTable
    JSON form, floats written with 17 significant digits
"""

import json
import logging
import math
from dataclasses import dataclass
from typing import (
    Iterable,
    List,
    Optional,
    Sequence,
    Tuple,
)

import numpy as np

from . import builtin, core
from .core import Episode, readOnly

logger = logging.getLogger(__name__)


@dataclass(eq=False, frozen=True)
class BinTable:
    """Quantile bins for every action dimension.

    Attributes
    ----------
    - boundaries
        (dims, nBins - 1) non-decreasing interior boundaries
    - dataMin, dataMax
        (dims,) extremes of the fitting data
    - nBins
        number of bins (tokens) per dimension
    """
    boundaries: np.ndarray
    dataMin: np.ndarray
    dataMax: np.ndarray
    nBins: int = builtin.N_BINS

    def __post_init__(self) -> None:
        boundaries = np.array(self.boundaries, dtype=np.float64, copy=True)
        dataMin = np.array(self.dataMin, dtype=np.float64, copy=True).reshape(-1)
        dataMax = np.array(self.dataMax, dtype=np.float64, copy=True).reshape(-1)
        if boundaries.ndim != 2 or boundaries.shape[1] != self.nBins - 1:
            raise builtin.BinningError(
                f"Expected (dims, {self.nBins - 1}) boundaries, got {boundaries.shape}")
        if not len(dataMin) == len(dataMax) == len(boundaries):
            raise builtin.BinningError("min/max/boundaries dimension mismatch")
        object.__setattr__(self, 'boundaries', readOnly(boundaries))
        object.__setattr__(self, 'dataMin', readOnly(dataMin))
        object.__setattr__(self, 'dataMax', readOnly(dataMax))

    def __repr__(self) -> str:
        return f"<BinTable {self.dims} dims x {self.nBins} bins>"

    @property
    def dims(self) -> int:
        return len(self.boundaries)

    def binEdges(self, dim: int, index: int) -> Tuple[float, float]:
        """(left, right) of one bin; the outer bins end at the data extremes."""
        left = self.dataMin[dim] if index == 0 else self.boundaries[dim, index - 1]
        right = (self.dataMax[dim] if index == self.nBins - 1
                 else self.boundaries[dim, index])
        return float(left), float(right)


def interpolatedQuantiles(ordered: np.ndarray, qs: np.ndarray) -> np.ndarray:
    """Linear interpolation between order statistics:
    h = (n - 1) q, value = x[floor h] + (h - floor h)(x[floor h + 1] - x[floor h]).
    """
    n = len(ordered)
    h = (n - 1) * qs
    lo = np.floor(h).astype(np.intp)
    frac = h - lo
    hi = np.minimum(lo + 1, n - 1)
    return ordered[lo] + frac * (ordered[hi] - ordered[lo])


def fitBins(samples: Sequence[Iterable[float]], nBins: int = builtin.N_BINS,
            clip: Optional[Tuple[float, float]] = None) -> BinTable:
    """Fits one row of boundaries per dimension of samples.

    clip, when given, is a (low, high) percentile pair; values are
    clipped to those quantiles before fitting.
    """
    if nBins < 2:
        raise builtin.BinningError(f"nBins must be >= 2, is {nBins}")
    if not len(samples):
        raise builtin.BinningError("No action dimensions to fit")
    qs = np.arange(1, nBins, dtype=np.float64) / nBins
    rows, mins, maxs = [], [], []
    for dim, values in enumerate(samples):
        data = np.asarray(list(values), dtype=np.float64)
        if data.size < nBins:
            raise builtin.BinningError(
                f"insufficient samples: {data.size} for {nBins} bins",
                context=f"dimension {dim}",
            )
        if not np.all(np.isfinite(data)):
            raise builtin.BinningError("non-finite sample", context=f"dimension {dim}")
        ordered = np.sort(data)
        if clip is not None:
            low, high = interpolatedQuantiles(
                ordered, np.array(clip, dtype=np.float64) / 100.0)
            ordered = np.clip(ordered, low, high)
        rows.append(interpolatedQuantiles(ordered, qs))
        mins.append(ordered[0])
        maxs.append(ordered[-1])
    logger.info("Fitted %d bins over %d dimensions", nBins, len(rows))
    return BinTable(np.stack(rows), np.array(mins), np.array(maxs), nBins)


def checkDim(vector: Sequence, bins: BinTable) -> None:
    if len(vector) != bins.dims:
        raise builtin.BinningError(
            f"dimension mismatch: {len(vector)}, expected {bins.dims}")


def encodeAction(action: Sequence[float], bins: BinTable) -> core.Tokens:
    """Per dimension, the number of boundaries strictly below the value,
    clamped to [0, nBins - 1].
    Raises BinningError on a non-finite value.
    """
    checkDim(action, bins)
    tokens = []
    for dim, value in enumerate(action):
        if not math.isfinite(value):
            raise builtin.BinningError(f"non-finite value {value}",
                                       context=f"dimension {dim}")
        index = int(np.searchsorted(bins.boundaries[dim], float(value), side='left'))
        tokens.append(min(max(index, 0), bins.nBins - 1))
    return tuple(tokens)


def encodeActions(actions: Iterable[Sequence[float]],
                  bins: BinTable) -> List[core.Tokens]:
    return [encodeAction(action, bins) for action in actions]


def decodeTokens(tokens: Sequence[int], bins: BinTable) -> core.ActionVector:
    """Bin centres of the given tokens."""
    checkDim(tokens, bins)
    values = []
    for dim, index in enumerate(tokens):
        if not 0 <= index < bins.nBins:
            raise builtin.BinningError(
                f"token {index} outside [0, {bins.nBins - 1}]",
                context=f"dimension {dim}",
            )
        left, right = bins.binEdges(dim, int(index))
        values.append((left + right) / 2.0)
    return tuple(values)


def collectActionSamples(episodes: Iterable[Episode]) -> List[List[float]]:
    """Per-dimension value lists over every action of every episode."""
    columns: List[List[float]] = []
    for episode in episodes:
        for action in episode.actions:
            if not columns:
                columns = [[] for _ in action]
            if len(action) != len(columns):
                raise builtin.BinningError(
                    f"dimension mismatch: {len(action)}, expected {len(columns)}",
                    context=episode.episodeId,
                )
            for column, value in zip(columns, action):
                column.append(value)
    return columns


# Serialisation


def formatFloat(value: float) -> str:
    if not math.isfinite(value):
        raise builtin.BinningError(f"Cannot serialise {value}")
    return format(value, '.17g')


def formatRow(values: Iterable[float]) -> str:
    return '[' + ','.join(formatFloat(float(v)) for v in values) + ']'


def dumpBins(bins: BinTable) -> str:
    """JSON text with keys n_bins, dims, boundaries, min, max."""
    rows = ',\n  '.join(formatRow(row) for row in bins.boundaries)
    return (
        '{\n'
        f'"n_bins":{bins.nBins},\n'
        f'"dims":{bins.dims},\n'
        f'"boundaries":[\n  {rows}\n],\n'
        f'"min":{formatRow(bins.dataMin)},\n'
        f'"max":{formatRow(bins.dataMax)}\n'
        '}\n'
    )


def loadBins(text: str) -> BinTable:
    try:
        data = json.loads(text)
        table = BinTable(
            boundaries=np.array(data['boundaries'], dtype=np.float64),
            dataMin=data['min'],
            dataMax=data['max'],
            nBins=int(data['n_bins']),
        )
        dims = int(data['dims'])
    except (ValueError, KeyError, TypeError) as err:
        raise builtin.BinningError(f"Invalid bin table: {err}") from err
    if table.dims != dims:
        raise builtin.BinningError(
            f"dims {dims} does not match {table.dims} boundary rows")
    return table
