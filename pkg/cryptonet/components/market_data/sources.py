from __future__ import annotations

import time
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd
import pydantic
import requests
from tqdm import tqdm

from cryptonet.client_config import ClientConfig, Query
from cryptonet.components.market_data.archive import (
    read_venue_agg_trades,
    read_venue_klines,
)
from cryptonet.components.market_data.models import (
    CANDLE_COLUMNS,
    TRADE_COLUMNS,
    Candle,
    Interval,
    Side,
    TradeRecord,
)
from cryptonet.exceptions import NetworkError, SchemaError, SymbolUnknown
from cryptonet.utils import HOUR_MS, ValidPath, print_debug, read_csv

KLINES_LIMIT = 1000
AGG_TRADES_LIMIT = 1000
RETRYABLE_STATUS = {418, 429, 500, 502, 503, 504}
UNKNOWN_SYMBOL_CODE = -1121


class CandleSource:
    """Where candles and trades come from. Subclasses may return unsorted data
    with duplicates, the caller sorts and deduplicates."""

    name = "source"

    def candles(
        self, symbol: str, quote: str, interval: Interval, ts_start: int, ts_end: int
    ) -> List[Candle]:
        raise NotImplementedError

    def trades(
        self, symbol: str, quote: str, ts_start: int, ts_end: int
    ) -> List[TradeRecord]:
        raise NotImplementedError


class BinanceSource(CandleSource):
    name = "binance"

    def __init__(
        self,
        client_config: Optional[ClientConfig] = None,
        session: Optional[requests.Session] = None,
    ):
        self.client_config = client_config or ClientConfig()
        self.session = session or requests.Session()
        self._last_request_time = 0.0

    def _wait_for_rate_limit(self):
        min_interval = self.client_config.rate_limit_ms / 1000
        elapsed = time.monotonic() - self._last_request_time
        if elapsed < min_interval:
            time.sleep(min_interval - elapsed)
        self._last_request_time = time.monotonic()

    def get(self, path: str, params: Query, symbol: str) -> Any:
        url = self.client_config.base_url.rstrip("/") + path
        last_error = ""
        attempts = self.client_config.max_retries + 1
        for attempt in range(attempts):
            self._wait_for_rate_limit()
            print_debug("request", {"url": url, "params": dict(params)})
            try:
                response = self.session.get(
                    url, params=params, timeout=self.client_config.timeout_s
                )
            except (requests.ConnectionError, requests.Timeout) as err:
                last_error = str(err)
            else:
                if response.status_code == 200:
                    try:
                        return response.json()
                    except ValueError:
                        raise SchemaError(
                            self.name, "the body is not JSON", response.text
                        )
                payload = _safe_json(response)
                if (
                    isinstance(payload, dict)
                    and payload.get("code") == UNKNOWN_SYMBOL_CODE
                ):
                    raise SymbolUnknown(symbol, str(payload.get("msg", "")))
                last_error = f"HTTP {response.status_code}: {response.text[:200]}"
                if response.status_code not in RETRYABLE_STATUS:
                    raise NetworkError(url, attempt + 1, last_error)
            if attempt + 1 < attempts:
                time.sleep(self.client_config.backoff(attempt))
        raise NetworkError(url, attempts, last_error)

    def candles(
        self, symbol: str, quote: str, interval: Interval, ts_start: int, ts_end: int
    ) -> List[Candle]:
        pair = f"{symbol}{quote}".upper()
        result = []
        cursor = ts_start
        expected_bars = max((ts_end - ts_start) // interval.ms, 1)
        progress_bar = tqdm(
            total=expected_bars,
            desc=f"{pair} {interval.value}",
            disable=not self.client_config.progress,
        )
        while cursor < ts_end:
            params = Query(symbol=pair, interval=interval.value)
            params.add_simple_arg("startTime", cursor)
            params.add_simple_arg("endTime", ts_end - 1)
            params.add_simple_arg("limit", KLINES_LIMIT)
            page = self.get("/api/v3/klines", params, symbol)
            if not isinstance(page, list):
                raise SchemaError(self.name, "klines must be a list", page)
            if not page:
                break
            result.extend(_parse_kline(row, symbol, quote, page) for row in page)
            progress_bar.update(len(page))
            next_cursor = result[-1].ts + interval.ms
            if next_cursor <= cursor or len(page) < KLINES_LIMIT:
                break
            cursor = next_cursor
        progress_bar.close()
        return result

    def trades(
        self, symbol: str, quote: str, ts_start: int, ts_end: int
    ) -> List[TradeRecord]:
        pair = f"{symbol}{quote}".upper()
        result = []
        window_start = ts_start
        from_id = None
        progress_bar = tqdm(
            total=ts_end - ts_start,
            desc=f"{pair} trades",
            unit="ms",
            disable=not self.client_config.progress,
        )
        while True:
            params = Query(symbol=pair, limit=AGG_TRADES_LIMIT)
            paging_by_id = from_id is not None
            if paging_by_id:
                params.add_simple_arg("fromId", from_id)
            else:
                if window_start >= ts_end:
                    break
                # the venue refuses time windows longer than one hour
                params.add_simple_arg("startTime", window_start)
                window_end = min(window_start + HOUR_MS, ts_end)
                params.add_simple_arg("endTime", window_end - 1)
            page = self.get("/api/v3/aggTrades", params, symbol)
            if not isinstance(page, list):
                raise SchemaError(self.name, "aggTrades must be a list", page)
            if not page:
                if paging_by_id:
                    break
                progress_bar.update(min(HOUR_MS, ts_end - window_start))
                window_start += HOUR_MS
                continue

            reached_end = False
            for row in page:
                trade, trade_id = _parse_agg_trade(row, symbol, quote, page)
                if trade.ts >= ts_end:
                    reached_end = True
                    break
                if trade.ts >= ts_start:
                    result.append(trade)
                from_id = trade_id + 1
            if result:
                progress_bar.update(max(result[-1].ts - ts_start - progress_bar.n, 0))
            if reached_end or (paging_by_id and len(page) < AGG_TRADES_LIMIT):
                break
        progress_bar.close()
        return result


def _safe_json(response) -> Any:
    try:
        return response.json()
    except ValueError:
        return None


def _parse_kline(row: Any, symbol: str, quote: str, page: Any) -> Candle:
    try:
        return Candle(
            symbol=symbol,
            quote=quote,
            ts=int(row[0]),
            open=row[1],
            high=row[2],
            low=row[3],
            close=row[4],
            volume=row[5],
        )
    except (TypeError, IndexError, ValueError, pydantic.ValidationError) as err:
        raise SchemaError("binance", f"bad kline {row!r}: {err}", page) from err


def _parse_agg_trade(row: Any, symbol: str, quote: str, page: Any):
    try:
        trade = TradeRecord(
            symbol=symbol,
            quote=quote,
            ts=int(row["T"]),
            price=row["p"],
            amount=row["q"],
            side=Side.from_buyer_maker(bool(row["m"])),
        )
        return trade, int(row["a"])
    except (TypeError, KeyError, ValueError, pydantic.ValidationError) as err:
        raise SchemaError("binance", f"bad trade {row!r}: {err}", page) from err


class ArchiveSource(CandleSource):
    """Reads candles and trades from local files.

    Understands canonical CSV stores (`candles.csv` or `candles_<interval>.csv`,
    `trades_<PAIR>.csv`) and the venue's monthly archive files
    (`<PAIR>-1h-2022-05.csv`, `<PAIR>-aggTrades-2022-05.csv`). Files are read in
    name order, so a later file overrides an earlier one on duplicated timestamps.
    """

    name = "archive"

    def __init__(self, root: ValidPath):
        self.root = Path(root)

    def _files(self, pattern: str) -> List[Path]:
        if self.root.is_file():
            return [self.root] if self.root.match(pattern) else []
        return sorted(self.root.glob(pattern))

    def candles(
        self, symbol: str, quote: str, interval: Interval, ts_start: int, ts_end: int
    ) -> List[Candle]:
        pair = f"{symbol}{quote}".upper()
        frames = []
        stores = self._files("candles.csv") + self._files(
            f"candles_{interval.value}.csv"
        )
        for path in stores:
            frame = read_csv(path, dtype={"symbol": str, "quote": str})
            _check_columns(frame, CANDLE_COLUMNS, path)
            frames.append(frame[(frame.symbol == symbol) & (frame.quote == quote)])
        for path in self._files(f"{pair}-{interval.value}-*.csv"):
            frames.append(read_venue_klines(path, symbol, quote))
        rows = _in_range(frames, ts_start, ts_end)
        return [
            _validate_row(Candle, row, index, str(self.root))
            for index, row in enumerate(rows)
        ]

    def trades(
        self, symbol: str, quote: str, ts_start: int, ts_end: int
    ) -> List[TradeRecord]:
        pair = f"{symbol}{quote}".upper()
        frames = []
        for path in self._files(f"trades_{pair}*.csv"):
            frame = pd.read_csv(path, dtype=str)
            _check_columns(frame, TRADE_COLUMNS, path)
            frame["ts"] = frame["ts"].astype("int64")
            frames.append(frame)
        for path in self._files(f"{pair}-aggTrades-*.csv"):
            frames.append(read_venue_agg_trades(path, symbol, quote))
        rows = _in_range(frames, ts_start, ts_end)
        return [
            _validate_row(TradeRecord, row, index, str(self.root))
            for index, row in enumerate(rows)
        ]


def _check_columns(frame: pd.DataFrame, columns: List[str], path: Path):
    if list(frame.columns) != columns:
        raise SchemaError(
            str(path), f"expected the header {','.join(columns)}", list(frame.columns)
        )


def _in_range(frames, ts_start: int, ts_end: int) -> List[Dict[str, Any]]:
    if not frames:
        return []
    frame = pd.concat(frames, ignore_index=True)
    frame = frame[(frame["ts"] >= ts_start) & (frame["ts"] < ts_end)]
    return frame.to_dict(orient="records")


def _validate_row(model, row: Dict[str, Any], index: int, source: str):
    try:
        return model.model_validate(row)
    except pydantic.ValidationError as err:
        reason = f"row {index}: {err.errors()[0]['msg']}"
        raise SchemaError(source, reason, row) from err
