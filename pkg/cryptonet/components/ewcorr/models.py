from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from cryptonet.utils import ValidPath, write_csv

PSD_TOLERANCE = 1e-8


def _freeze(array, dtype=float) -> np.ndarray:
    array = np.array(array, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Exponential weights `w_t = w_0 * exp((t - window) / theta)`, `t = 1..window`,
    normalized so that they sum to 1. The latest observation gets the largest weight.
    """

    weights: np.ndarray
    theta: float
    window: int
    w_0: float

    def __post_init__(self):
        object.__setattr__(self, "weights", _freeze(self.weights))

    def __len__(self) -> int:
        return self.window


@dataclass(frozen=True, eq=False)
class WeightedCorrelationMatrix:
    symbols: Tuple[str, ...]
    values: np.ndarray
    window_end_ts: int
    excluded: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))
        object.__setattr__(self, "excluded", tuple(self.excluded))
        object.__setattr__(self, "values", _freeze(self.values))
        n = len(self.symbols)
        if self.values.shape != (n, n):
            raise ValueError(f"values has shape {self.values.shape}, expected {(n, n)}")

    def __getitem__(self, pair: Tuple[str, str]) -> float:
        i, j = (self.symbols.index(s) for s in pair)
        return float(self.values[i, j])

    def is_valid(self, tolerance: float = PSD_TOLERANCE) -> bool:
        """Checks symmetry, unit diagonal, bounds and positive semi-definiteness."""
        values = self.values
        if len(self.symbols) == 0:
            return True
        return bool(
            np.array_equal(values, values.T)
            and np.all(np.diag(values) == 1.0)
            and np.all(np.abs(values) <= 1.0)
            and np.linalg.eigvalsh(values).min() >= -tolerance
        )

    def pairs(self) -> List[Tuple[str, str, float]]:
        i, j = np.triu_indices(len(self.symbols), k=1)
        return [
            (self.symbols[a], self.symbols[b], float(self.values[a, b]))
            for a, b in zip(i, j)
        ]


@dataclass(frozen=True, eq=False)
class CorrelationSeries:
    """Average correlations per window.

    `per_asset_mean[i, w]` is the mean correlation of `symbols[i]` with the other
    assets of window `w`, `nan` when the asset is absent from that window.
    """

    timestamps: np.ndarray
    symbols: Tuple[str, ...]
    per_asset_mean: np.ndarray
    market_mean: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))
        object.__setattr__(self, "timestamps", _freeze(self.timestamps, np.int64))
        object.__setattr__(self, "per_asset_mean", _freeze(self.per_asset_mean))
        object.__setattr__(self, "market_mean", _freeze(self.market_mean))

    def __getitem__(self, symbol: str) -> np.ndarray:
        return self.per_asset_mean[self.symbols.index(symbol)]

    def peak(self) -> Optional[int]:
        """Timestamp of the window with the highest market mean."""
        if np.all(np.isnan(self.market_mean)):
            return None
        return int(self.timestamps[np.nanargmax(self.market_mean)])

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"ts": self.timestamps, "market_mean": self.market_mean})
        for symbol, values in zip(self.symbols, self.per_asset_mean):
            frame[symbol] = values
        return frame

    def to_csv(self, path: ValidPath) -> Path:
        return write_csv(self.to_frame(), path)


def matrices_to_frame(matrices: Sequence[WeightedCorrelationMatrix]) -> pd.DataFrame:
    rows = [
        (m.window_end_ts, a, b, rho) for m in matrices for a, b, rho in m.pairs()
    ]
    return pd.DataFrame(rows, columns=["window_end_ts", "sym_i", "sym_j", "rho"])


def write_matrices(
    matrices: Sequence[WeightedCorrelationMatrix], path: ValidPath
) -> Path:
    """Writes the long format `window_end_ts,sym_i,sym_j,rho`, `i < j`."""
    return write_csv(matrices_to_frame(matrices), path)
