from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from pathlib import Path
from typing import List, Tuple

import pandas as pd
import pydantic

from cryptonet.utils import HOUR_MS, MINUTE_MS, ValidPath, write_csv

IMBALANCE_COLUMNS = ["bucket_start_ts", "buy_total", "sell_total", "imbalance"]


class Bucket(str, Enum):
    MINUTE = "minute"
    HOUR = "hour"

    @property
    def ms(self) -> int:
        return MINUTE_MS if self == Bucket.MINUTE else HOUR_MS


class PeakDirection(str, Enum):
    ABS = "abs"
    SELL = "sell"
    BUY = "buy"


@dataclass(frozen=True)
class ImbalanceSeries:
    """Signed notional per bucket, positive values meaning selling pressure.

    Totals are exact decimals in the quote currency.
    """

    symbol: str
    quote: str
    bucket: Bucket
    timestamps: Tuple[int, ...]
    buy_total: Tuple[Decimal, ...]
    sell_total: Tuple[Decimal, ...]

    def __post_init__(self):
        object.__setattr__(self, "bucket", Bucket(self.bucket))
        object.__setattr__(self, "timestamps", tuple(int(t) for t in self.timestamps))
        object.__setattr__(self, "buy_total", tuple(self.buy_total))
        object.__setattr__(self, "sell_total", tuple(self.sell_total))
        n = len(self.timestamps)
        if len(self.buy_total) != n or len(self.sell_total) != n:
            raise ValueError("There must be one buy and one sell total per bucket.")
        for previous, current in zip(self.timestamps, self.timestamps[1:]):
            if current <= previous:
                raise ValueError("Bucket timestamps must be strictly increasing.")
        if any(t % self.bucket.ms for t in self.timestamps):
            raise ValueError("Bucket timestamps must be aligned on bucket boundaries.")

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def values(self) -> Tuple[Decimal, ...]:
        return tuple(s - b for s, b in zip(self.sell_total, self.buy_total))

    def __getitem__(self, ts: int) -> Decimal:
        index = self.timestamps.index(ts)
        return self.sell_total[index] - self.buy_total[index]

    def total(self) -> Decimal:
        return sum(self.values, Decimal(0))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "bucket_start_ts": list(self.timestamps),
                "buy_total": [str(x) for x in self.buy_total],
                "sell_total": [str(x) for x in self.sell_total],
                "imbalance": [str(x) for x in self.values],
            },
            columns=IMBALANCE_COLUMNS,
        )

    def to_csv(self, path: ValidPath) -> Path:
        return write_csv(self.to_frame(), path)


class ImbalancePeak(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    ts: int
    value: Decimal
    buy_total: Decimal
    sell_total: Decimal


def peaks_to_frame(peaks: List[ImbalancePeak]) -> pd.DataFrame:
    return pd.DataFrame(
        [[p.ts, str(p.buy_total), str(p.sell_total), str(p.value)] for p in peaks],
        columns=IMBALANCE_COLUMNS,
    )
