from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from cryptonet.utils import ValidPath, write_csv

BAND_PERCENTILES = (1, 5, 25, 75, 95, 99)
BAND_COLUMNS = ["p1", "p5", "p25", "p75", "p95", "p99"]


def _freeze(array, dtype=float) -> np.ndarray:
    array = np.array(array, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class CentralityVector:
    """L2-normalized, non-negative eigenvector centrality of one window.

    A window whose graph failed verification carries the reason in `failure`
    and `nan` scores.
    """

    symbols: Tuple[str, ...]
    scores: np.ndarray
    window_end_ts: Optional[int] = None
    norm: str = "L2"
    iterations: int = 0
    failure: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))
        object.__setattr__(self, "scores", _freeze(self.scores))
        if self.scores.shape != (len(self.symbols),):
            raise ValueError("There must be exactly one score per symbol.")

    @classmethod
    def failed(
        cls, symbols: Sequence[str], window_end_ts: Optional[int], reason: str
    ) -> "CentralityVector":
        return cls(
            symbols=tuple(symbols),
            scores=np.full(len(symbols), np.nan),
            window_end_ts=window_end_ts,
            failure=reason,
        )

    @property
    def is_failed(self) -> bool:
        return self.failure is not None

    def __getitem__(self, symbol: str) -> float:
        return float(self.scores[self.symbols.index(symbol)])

    @property
    def argmax(self) -> str:
        return self.symbols[int(np.nanargmax(self.scores))]


def vectors_to_frame(vectors: Sequence[CentralityVector]) -> pd.DataFrame:
    rows = [
        (v.window_end_ts, symbol, score)
        for v in vectors
        for symbol, score in zip(v.symbols, v.scores)
    ]
    return pd.DataFrame(rows, columns=["window_end_ts", "symbol", "score"])


def write_vectors(vectors: Sequence[CentralityVector], path: ValidPath) -> Path:
    return write_csv(vectors_to_frame(vectors), path)


@dataclass(frozen=True, eq=False)
class CentralityBands:
    """Focus series plus, for each window, the 1-99, 5-95 and 25-75 percentiles of
    the other assets' scores. `bands[w]` holds `p1, p5, p25, p75, p95, p99`."""

    timestamps: np.ndarray
    focus_series: Dict[str, np.ndarray]
    bands: np.ndarray
    percentiles: Tuple[float, ...] = field(default=BAND_PERCENTILES)

    def __post_init__(self):
        object.__setattr__(self, "timestamps", _freeze(self.timestamps, np.int64))
        object.__setattr__(self, "bands", _freeze(self.bands))
        object.__setattr__(
            self,
            "focus_series",
            {k: _freeze(v) for k, v in self.focus_series.items()},
        )

    def band(self, low: float, high: float) -> Tuple[np.ndarray, np.ndarray]:
        return (
            self.bands[:, self.percentiles.index(low)],
            self.bands[:, self.percentiles.index(high)],
        )

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.bands, columns=BAND_COLUMNS)
        frame.insert(0, "window_end_ts", self.timestamps)
        return frame

    def to_csv(self, path: ValidPath) -> Path:
        return write_csv(self.to_frame(), path)
