from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from typing import Tuple

import numpy as np
import pydantic

from cryptonet.utils import DAY_MS, HOUR_MS, MINUTE_MS

CANDLE_COLUMNS = ["symbol", "quote", "ts", "open", "high", "low", "close", "volume"]
TRADE_COLUMNS = ["symbol", "quote", "ts", "price", "amount", "side"]


class Interval(str, Enum):
    MINUTE = "1m"
    HOUR = "1h"
    DAY = "1d"

    @property
    def ms(self) -> int:
        return {"1m": MINUTE_MS, "1h": HOUR_MS, "1d": DAY_MS}[self.value]


class Side(str, Enum):
    BUY = "BUY"
    SELL = "SELL"

    @classmethod
    def from_buyer_maker(cls, is_buyer_maker: bool) -> "Side":
        # the buyer resting on the book means the aggressor sold
        return cls.SELL if is_buyer_maker else cls.BUY


class Candle(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    symbol: str = pydantic.Field(min_length=1)
    quote: str = pydantic.Field(min_length=1)
    ts: int
    open: float = pydantic.Field(gt=0, allow_inf_nan=False)
    high: float = pydantic.Field(gt=0, allow_inf_nan=False)
    low: float = pydantic.Field(gt=0, allow_inf_nan=False)
    close: float = pydantic.Field(gt=0, allow_inf_nan=False)
    volume: float = pydantic.Field(ge=0, allow_inf_nan=False)

    @pydantic.model_validator(mode="after")
    def check_price_range(self) -> "Candle":
        if self.low > self.high:
            raise ValueError(f"low ({self.low}) > high ({self.high})")
        for name in ("open", "close"):
            value = getattr(self, name)
            if not self.low <= value <= self.high:
                raise ValueError(
                    f"{name} ({value}) outside [low, high] = [{self.low}, {self.high}]"
                )
        return self

    def is_aligned(self, interval: Interval) -> bool:
        return self.ts % interval.ms == 0

    @property
    def key(self) -> Tuple[str, str, int]:
        return self.symbol, self.quote, self.ts


class TradeRecord(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    symbol: str = pydantic.Field(min_length=1)
    quote: str = pydantic.Field(min_length=1)
    ts: int
    price: Decimal = pydantic.Field(gt=0, allow_inf_nan=False)
    amount: Decimal = pydantic.Field(gt=0, allow_inf_nan=False)
    side: Side

    @property
    def notional(self) -> Decimal:
        return self.price * self.amount


def _read_only(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class PricePanel:
    """Aligned closing prices, one row per symbol, one column per bar.

    `mask[i, t]` is `True` when the bar was observed and `False` when the cell was
    forward-filled (or precedes the symbol's first observation, in which case the
    price is `nan`).
    """

    symbols: Tuple[str, ...]
    timestamps: np.ndarray
    prices: np.ndarray
    mask: np.ndarray
    quote: str = ""

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))
        timestamps = _read_only(np.asarray(self.timestamps, dtype=np.int64))
        prices = _read_only(np.asarray(self.prices, dtype=float))
        mask = _read_only(np.asarray(self.mask, dtype=bool))
        object.__setattr__(self, "timestamps", timestamps)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "mask", mask)

        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("A panel cannot hold duplicate symbols.")
        if prices.shape != (len(self.symbols), len(timestamps)):
            raise ValueError(
                f"prices has shape {prices.shape}, expected "
                f"{(len(self.symbols), len(timestamps))}"
            )
        if mask.shape != prices.shape:
            raise ValueError("mask and prices must have the same shape.")
        if len(timestamps) > 1:
            steps = np.diff(timestamps)
            if np.any(steps <= 0):
                raise ValueError("Timestamps must be strictly increasing.")
            if np.any(steps != steps[0]):
                raise ValueError("Timestamps must be uniformly spaced.")
        observed = prices[mask]
        if not np.all(np.isfinite(observed)) or np.any(observed <= 0):
            raise ValueError("Every observed price must be finite and positive.")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.prices.shape

    def column_index(self, ts: int) -> int:
        matches = np.flatnonzero(self.timestamps == ts)
        if len(matches) == 0:
            raise KeyError(ts)
        return int(matches[0])
