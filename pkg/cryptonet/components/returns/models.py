from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, Tuple

import numpy as np
import pandas as pd
import pydantic

from cryptonet.utils import ValidPath, percentiles, write_csv

SUMMARY_PERCENTILES = (25, 50, 75)


class ReturnKind(str, Enum):
    LOG = "log"
    SIMPLE = "simple"


@dataclass(frozen=True, eq=False)
class ReturnPanel:
    """Returns between consecutive bars, labelled by the timestamp of the later bar.

    `mask[i, t]` is `False` when either source price was gap-filled, `values` is
    `nan` there.
    """

    symbols: Tuple[str, ...]
    timestamps: np.ndarray
    values: np.ndarray
    mask: np.ndarray
    kind: ReturnKind = ReturnKind.LOG

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))
        object.__setattr__(self, "kind", ReturnKind(self.kind))
        dtypes = {"timestamps": np.int64, "values": float, "mask": bool}
        for name, dtype in dtypes.items():
            array = np.array(getattr(self, name), dtype=dtype, copy=True)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        if self.values.shape != (len(self.symbols), len(self.timestamps)):
            raise ValueError(
                f"values has shape {self.values.shape}, expected "
                f"{(len(self.symbols), len(self.timestamps))}"
            )
        if self.mask.shape != self.values.shape:
            raise ValueError("mask and values must have the same shape.")
        if not np.all(np.isfinite(self.values[self.mask])):
            raise ValueError("Every unmasked return must be finite.")

    @property
    def n_observations(self) -> int:
        return len(self.timestamps)


class BhrEntry(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    symbol: str
    bhr: float


class BhrReport(pydantic.BaseModel):
    """Buy-and-hold returns sorted ascending, with their summary percentiles.

    Percentiles use linear interpolation between order statistics and are
    reported in ascending order (`p25 <= median <= p75`).
    """

    model_config = pydantic.ConfigDict(frozen=True)

    ts_start: int
    ts_end: int
    entries: List[BhrEntry]
    median: float
    p25: float
    p75: float
    dropped: List[str] = []

    @classmethod
    def from_values(
        cls, ts_start: int, ts_end: int, values: List[Tuple[str, float]], dropped
    ) -> "BhrReport":
        entries = [
            BhrEntry(symbol=s, bhr=v)
            for s, v in sorted(values, key=lambda x: (x[1], x[0]))
        ]
        p25, median, p75 = percentiles([e.bhr for e in entries], SUMMARY_PERCENTILES)
        return cls(
            ts_start=ts_start,
            ts_end=ts_end,
            entries=entries,
            median=median,
            p25=p25,
            p75=p75,
            dropped=sorted(dropped),
        )

    def __getitem__(self, symbol: str) -> float:
        for entry in self.entries:
            if entry.symbol == symbol:
                return entry.bhr
        raise KeyError(symbol)

    @property
    def symbols(self) -> List[str]:
        return [e.symbol for e in self.entries]

    def extremes(self, k: int = 10) -> Tuple[List[BhrEntry], List[BhrEntry]]:
        """Returns the `k` worst performers (ascending) and the `k` best
        performers (descending)."""
        return self.entries[:k], self.entries[::-1][:k]

    def summary(self) -> dict:
        return {
            "median": self.median,
            "p25": self.p25,
            "p75": self.p75,
            "dropped": list(self.dropped),
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [[e.symbol, e.bhr] for e in self.entries], columns=["symbol", "bhr"]
        )

    def to_csv(self, path: ValidPath) -> Path:
        return write_csv(self.to_frame(), path)

    def write_summary(self, path: ValidPath) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        return path
