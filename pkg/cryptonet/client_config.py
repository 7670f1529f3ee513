import os
from dataclasses import dataclass, field
from multiprocessing.pool import ThreadPool
from pathlib import Path
from typing import Any, Callable, Iterable, List, Optional, TypeVar

from cryptonet.components.market_data.models import Interval
from cryptonet.utils import ValidPath

T = TypeVar("T")
R = TypeVar("R")

DEFAULT_BASE_URL = "https://api.binance.com"
DEFAULT_ARCHIVE_URL = "https://data.binance.vision"


def _env_data_dir() -> Path:
    return Path(os.environ.get("CRYPTONET_DATA_DIR", "data"))


def _env_rate_limit_ms() -> int:
    return int(os.environ.get("CRYPTONET_RATE_LIMIT_MS", "100"))


class Query(dict):
    def add_simple_arg(self, name: str, value: Any):
        if value is not None:
            self[name] = value

    def add_flag(self, name: str, value: bool):
        if value:
            self[name] = "true"

    def __add__(self, other) -> "Query":
        result = Query(self)
        result.update(other)
        return result


@dataclass
class ClientConfig:
    data_dir: ValidPath = field(default_factory=_env_data_dir)
    rate_limit_ms: int = field(default_factory=_env_rate_limit_ms)
    base_url: str = DEFAULT_BASE_URL
    archive_url: str = DEFAULT_ARCHIVE_URL
    max_retries: int = 5
    backoff_s: float = 0.5
    max_backoff_s: float = 30.0
    timeout_s: float = 30.0
    workers: int = 1
    progress: bool = False

    def candle_store(self, interval: Interval = Interval.HOUR) -> Path:
        # one store per bar size, hourly and minute bars share timestamps
        return Path(self.data_dir) / f"candles_{Interval(interval).value}.csv"

    def trade_store(self, symbol: str, quote: str) -> Path:
        return Path(self.data_dir) / f"trades_{symbol}{quote}.csv"

    def backoff(self, attempt: int) -> float:
        return min(self.backoff_s * (2**attempt), self.max_backoff_s)

    def map(self, function: Callable[[T], R], items: Iterable[T]) -> List[R]:
        """Applies `function` to every item, keeping the input order.

        Uses a thread pool when more than one worker is configured.
        """
        items = list(items)
        if self.workers <= 1 or len(items) <= 1:
            return [function(x) for x in items]
        pool = ThreadPool(self.workers)
        try:
            return pool.map(function, items)
        finally:
            pool.close()
            pool.join()


class CryptonetCaller:
    def __init__(self, client_config: Optional[ClientConfig] = None):
        if client_config is None:
            client_config = ClientConfig()
        self.client_config = client_config
