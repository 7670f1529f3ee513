from __future__ import annotations

import os
import threading
import warnings
from collections import defaultdict
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
import pydantic

from cryptonet.client_config import CryptonetCaller
from cryptonet.components.market_data.archive import download_archive
from cryptonet.components.market_data.models import (
    CANDLE_COLUMNS,
    TRADE_COLUMNS,
    Candle,
    Interval,
    PricePanel,
    Side,
    TradeRecord,
)
from cryptonet.components.market_data.sources import (
    ArchiveSource,
    BinanceSource,
    CandleSource,
)
from cryptonet.exceptions import (
    EmptyPanel,
    InvalidRange,
    IoError,
    MixedQuotes,
    SchemaError,
    ValidationError,
)
from cryptonet.utils import (
    Timestamp,
    ValidPath,
    ceil_to_interval,
    read_csv,
    to_list,
    to_timestamp_ms,
    write_csv,
)

ValidCandle = Union[Candle, Mapping[str, Any]]
ValidTrade = Union[TradeRecord, Mapping[str, Any]]

_locks_guard = threading.Lock()
_store_locks: Dict[str, threading.Lock] = defaultdict(threading.Lock)


def _store_lock(path: Path) -> threading.Lock:
    with _locks_guard:
        return _store_locks[str(Path(path).resolve())]


def dedup_last_wins(records: Iterable[Any], key) -> List[Any]:
    """Collapses records sharing a key, the last one wins. Output sorted by key."""
    latest = {}
    for record in records:
        latest[key(record)] = record
    return [latest[k] for k in sorted(latest)]


def _first_error(err: pydantic.ValidationError) -> str:
    error = err.errors()[0]
    location = ".".join(str(x) for x in error.get("loc", ()))
    if location:
        return f"{location}: {error['msg']}"
    return error["msg"]


def validate_candles(
    candles: Iterable[ValidCandle], interval: Optional[Interval] = None
) -> List[Candle]:
    result = []
    for row, candle in enumerate(candles):
        if not isinstance(candle, Candle):
            try:
                candle = Candle.model_validate(dict(candle))
            except pydantic.ValidationError as err:
                raise ValidationError(row, _first_error(err)) from err
        if interval is not None and not candle.is_aligned(interval):
            raise ValidationError(
                row, f"ts {candle.ts} is not a multiple of {interval.ms} ms"
            )
        result.append(candle)
    return result


def validate_trades(trades: Iterable[ValidTrade]) -> List[TradeRecord]:
    result = []
    for row, trade in enumerate(trades):
        if not isinstance(trade, TradeRecord):
            try:
                trade = TradeRecord.model_validate(dict(trade))
            except pydantic.ValidationError as err:
                raise ValidationError(row, _first_error(err)) from err
        result.append(trade)
    return result


def _candles_to_frame(candles: Sequence[Candle]) -> pd.DataFrame:
    return pd.DataFrame(
        [c.model_dump() for c in candles], columns=CANDLE_COLUMNS
    ).astype({"ts": "int64"})


def _trades_to_frame(trades: Sequence[TradeRecord]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            [t.symbol, t.quote, t.ts, str(t.price), str(t.amount), t.side.value]
            for t in trades
        ],
        columns=TRADE_COLUMNS,
    ).astype({"ts": "int64"})


def _write_atomically(frame: pd.DataFrame, path: Path):
    tmp_path = path.with_name(path.name + ".tmp")
    try:
        write_csv(frame, tmp_path)
        os.replace(tmp_path, path)
    except OSError as err:
        raise IoError(path, str(err)) from err


def _check_header(frame: pd.DataFrame, columns: List[str], path: Path):
    if list(frame.columns) != columns:
        raise SchemaError(
            str(path),
            f"expected the header `{','.join(columns)}`, "
            f"found `{','.join(map(str, frame.columns))}`",
        )


def read_candle_store(
    store_path: ValidPath, interval: Optional[Interval] = None
) -> pd.DataFrame:
    """Reads and validates a candle store. Raises `ValidationError` naming the
    first offending data row (0-based, header excluded)."""
    store_path = Path(store_path)
    try:
        frame = read_csv(store_path, dtype={"symbol": str, "quote": str, "ts": str})
    except FileNotFoundError as err:
        raise IoError(store_path, "no such file") from err
    except OSError as err:
        raise IoError(store_path, str(err)) from err
    _check_header(frame, CANDLE_COLUMNS, store_path)

    ts = pd.to_numeric(frame["ts"], errors="coerce")
    numeric = {
        c: pd.to_numeric(frame[c], errors="coerce")
        for c in ("open", "high", "low", "close", "volume")
    }
    checks = [
        (frame["symbol"].isna() | frame["quote"].isna(), "missing symbol or quote"),
        (ts.isna() | (ts != ts.round()), "ts is not an integer"),
    ]
    for column in ("open", "high", "low", "close"):
        values = numeric[column]
        checks.append(
            (~np.isfinite(values) | (values <= 0), f"{column} must be positive")
        )
    checks += [
        (~np.isfinite(numeric["volume"]) | (numeric["volume"] < 0), "volume < 0"),
        (numeric["low"] > numeric["high"], "low > high"),
        (
            (numeric["open"] < numeric["low"]) | (numeric["open"] > numeric["high"]),
            "open outside [low, high]",
        ),
        (
            (numeric["close"] < numeric["low"]) | (numeric["close"] > numeric["high"]),
            "close outside [low, high]",
        ),
    ]
    if interval is not None:
        checks.append(
            (ts.fillna(0) % interval.ms != 0, f"ts not aligned to {interval.value}")
        )
    first_bad = None
    for failed, reason in checks:
        failed = np.asarray(failed, dtype=bool)
        if failed.any():
            row = int(np.flatnonzero(failed)[0])
            if first_bad is None or row < first_bad[0]:
                first_bad = (row, reason)
    if first_bad is not None:
        raise ValidationError(first_bad[0], first_bad[1], source=str(store_path))

    result = pd.DataFrame({"symbol": frame["symbol"], "quote": frame["quote"]})
    result["ts"] = ts.astype("int64")
    for column, values in numeric.items():
        result[column] = values.astype(float)
    return result


def read_trade_store(store_path: ValidPath) -> pd.DataFrame:
    """Reads and validates a trade store, prices and amounts stay exact strings."""
    store_path = Path(store_path)
    try:
        frame = pd.read_csv(store_path, dtype=str, keep_default_na=False)
    except FileNotFoundError as err:
        raise IoError(store_path, "no such file") from err
    except OSError as err:
        raise IoError(store_path, str(err)) from err
    _check_header(frame, TRADE_COLUMNS, store_path)
    for row, record in enumerate(frame.itertuples(index=False)):
        reason = _trade_row_problem(record)
        if reason is not None:
            raise ValidationError(row, reason, source=str(store_path))
    frame["ts"] = frame["ts"].astype("int64")
    return frame


def _trade_row_problem(record) -> Optional[str]:
    if not record.symbol or not record.quote:
        return "missing symbol or quote"
    if not record.ts.lstrip("-").isdigit():
        return f"ts `{record.ts}` is not an integer"
    for name in ("price", "amount"):
        try:
            value = Decimal(getattr(record, name))
        except InvalidOperation:
            return f"{name} `{getattr(record, name)}` is not a number"
        if not value.is_finite() or value <= 0:
            return f"{name} must be positive"
    if record.side not in (Side.BUY.value, Side.SELL.value):
        return f"side `{record.side}` is neither BUY nor SELL"
    return None


def frame_to_trades(frame: pd.DataFrame) -> List[TradeRecord]:
    # rows were validated by read_trade_store
    return [
        TradeRecord.model_construct(
            symbol=symbol,
            quote=quote,
            ts=int(ts),
            price=Decimal(price),
            amount=Decimal(amount),
            side=Side(side),
        )
        for symbol, quote, ts, price, amount, side in frame[TRADE_COLUMNS].itertuples(
            index=False
        )
    ]


class MarketDataAPI(CryptonetCaller):
    def _default_source(self) -> CandleSource:
        return BinanceSource(self.client_config)

    def fetch_candles(
        self,
        symbol: str,
        ts_start: Timestamp,
        ts_end: Timestamp,
        interval: Interval = Interval.HOUR,
        quote: str = "USDT",
        source: Optional[CandleSource] = None,
    ) -> List[Candle]:
        """Fetches the candles of one symbol in `[ts_start, ts_end)`.

        Pagination and retries happen in the source. The result is sorted by `ts`,
        deduplicated (the last record of a timestamp wins) and restricted to the range.

        # Arguments
            symbol: The base asset, e.g. `"FTT"`.
            ts_start: Inclusive start, milliseconds or anything `pandas.Timestamp`
                understands (read as UTC).
            ts_end: Exclusive end.
            interval: The bar size.
            quote: The quote currency, e.g. `"USDT"`.
            source: Where to fetch from. Defaults to the remote venue.

        # Returns
            `List[cryptonet.Candle]`
        """
        ts_start, ts_end = to_timestamp_ms(ts_start), to_timestamp_ms(ts_end)
        if ts_start >= ts_end:
            raise InvalidRange(ts_start, ts_end)
        interval = Interval(interval)
        source = source or self._default_source()
        candles = source.candles(symbol, quote, interval, ts_start, ts_end)
        candles = [c for c in candles if ts_start <= c.ts < ts_end]
        return dedup_last_wins(candles, key=lambda c: c.ts)

    def fetch_trades(
        self,
        symbol: str,
        ts_start: Timestamp,
        ts_end: Timestamp,
        quote: str = "BUSD",
        source: Optional[CandleSource] = None,
    ) -> List[TradeRecord]:
        """Fetches the taker-attributed trades of one symbol in `[ts_start, ts_end)`.

        Trades are sorted by timestamp, the order of trades sharing a timestamp is
        kept.
        """
        ts_start, ts_end = to_timestamp_ms(ts_start), to_timestamp_ms(ts_end)
        if ts_start >= ts_end:
            raise InvalidRange(ts_start, ts_end)
        source = source or self._default_source()
        trades = source.trades(symbol, quote, ts_start, ts_end)
        trades = [t for t in trades if ts_start <= t.ts < ts_end]
        return sorted(trades, key=lambda t: t.ts)

    def persist_candles(
        self,
        candles: Iterable[ValidCandle],
        store_path: Optional[ValidPath] = None,
        interval: Optional[Interval] = Interval.HOUR,
    ) -> int:
        """Merges candles into a CSV store.

        Re-persisting the same candles leaves the store byte-identical. On a
        duplicated `(symbol, quote, ts)` the incoming candle wins.

        # Arguments
            candles: `cryptonet.Candle` objects or mappings with the candle fields.
            store_path: The CSV file, defaults to `<data_dir>/candles_<interval>.csv`.
            interval: Checks the alignment of the incoming and stored timestamps,
                `None` to skip.

        # Returns
            The number of distinct candles written from this batch.
        """
        store_path = Path(
            store_path or self.client_config.candle_store(interval or Interval.HOUR)
        )
        candles = validate_candles(candles, interval)
        candles = dedup_last_wins(candles, key=lambda c: c.key)
        with _store_lock(store_path):
            incoming = _candles_to_frame(candles)
            if store_path.exists():
                existing = read_candle_store(store_path, interval)
                merged = pd.concat([existing, incoming], ignore_index=True)
            else:
                store_path.parent.mkdir(parents=True, exist_ok=True)
                merged = incoming
            merged = merged.drop_duplicates(
                subset=["symbol", "quote", "ts"], keep="last"
            )
            merged = merged.sort_values(["symbol", "quote", "ts"], kind="mergesort")
            _write_atomically(merged[CANDLE_COLUMNS], store_path)
        return len(candles)

    def persist_trades(
        self, trades: Iterable[ValidTrade], store_path: ValidPath
    ) -> int:
        """Merges a batch of trades into a trade store.

        For every `(symbol, quote)` in the batch, the stored trades inside the
        batch's time span are replaced by the batch, which makes re-persisting
        idempotent without collapsing distinct trades that look alike.
        """
        store_path = Path(store_path)
        trades = validate_trades(trades)
        with _store_lock(store_path):
            incoming = _trades_to_frame(trades)
            if store_path.exists():
                existing = read_trade_store(store_path)
                keep = np.ones(len(existing), dtype=bool)
                for (symbol, quote), batch in incoming.groupby(["symbol", "quote"]):
                    keep &= ~(
                        (existing["symbol"] == symbol).to_numpy()
                        & (existing["quote"] == quote).to_numpy()
                        & (existing["ts"] >= batch["ts"].min()).to_numpy()
                        & (existing["ts"] <= batch["ts"].max()).to_numpy()
                    )
                merged = pd.concat([existing[keep], incoming], ignore_index=True)
            else:
                store_path.parent.mkdir(parents=True, exist_ok=True)
                merged = incoming
            merged = merged.sort_values(["symbol", "quote", "ts"], kind="mergesort")
            _write_atomically(merged[TRADE_COLUMNS], store_path)
        return len(trades)

    def load_candles(
        self,
        store_path: Optional[ValidPath] = None,
        symbols: Union[str, List[str], None] = None,
        ts_start: Optional[Timestamp] = None,
        ts_end: Optional[Timestamp] = None,
        interval: Interval = Interval.HOUR,
    ) -> List[Candle]:
        store_path = Path(store_path or self.client_config.candle_store(interval))
        frame = read_candle_store(store_path, Interval(interval))
        if symbols is not None:
            frame = frame[frame["symbol"].isin(to_list(symbols))]
        if ts_start is not None:
            frame = frame[frame["ts"] >= to_timestamp_ms(ts_start)]
        if ts_end is not None:
            frame = frame[frame["ts"] < to_timestamp_ms(ts_end)]
        return [
            Candle.model_validate(row) for row in frame.to_dict(orient="records")
        ]

    def load_trades(
        self,
        store_path: ValidPath,
        symbol: Optional[str] = None,
        quote: Optional[str] = None,
        ts_start: Optional[Timestamp] = None,
        ts_end: Optional[Timestamp] = None,
    ) -> List[TradeRecord]:
        frame = read_trade_store(store_path)
        if symbol is not None:
            frame = frame[frame["symbol"] == symbol]
        if quote is not None:
            frame = frame[frame["quote"] == quote]
        if ts_start is not None:
            frame = frame[frame["ts"] >= to_timestamp_ms(ts_start)]
        if ts_end is not None:
            frame = frame[frame["ts"] < to_timestamp_ms(ts_end)]
        return frame_to_trades(frame)

    def fetch_and_persist(
        self,
        symbols: Union[str, List[str]],
        ts_start: Timestamp,
        ts_end: Timestamp,
        interval: Interval = Interval.HOUR,
        quote: str = "USDT",
        store_path: Optional[ValidPath] = None,
        source: Optional[CandleSource] = None,
    ) -> Dict[str, int]:
        """Fetches candles for several symbols and merges them into the store.

        Resumes after the last stored bar of each symbol, so an interrupted
        download can be restarted with the same arguments. Symbols are fetched
        concurrently when `workers > 1`, writes to the store are serialized.

        # Returns
            A `dict` mapping each symbol to the number of candles written.
        """
        ts_start, ts_end = to_timestamp_ms(ts_start), to_timestamp_ms(ts_end)
        if ts_start >= ts_end:
            raise InvalidRange(ts_start, ts_end)
        interval = Interval(interval)
        store_path = Path(store_path or self.client_config.candle_store(interval))
        last_stored = {}
        if store_path.exists():
            stored = read_candle_store(store_path, interval)
            stored = stored[(stored["quote"] == quote) & (stored["ts"] < ts_end)]
            last_stored = stored.groupby("symbol")["ts"].max().to_dict()

        def fetch_one(symbol: str) -> int:
            start = ts_start
            if symbol in last_stored and last_stored[symbol] >= ts_start:
                start = int(last_stored[symbol]) + interval.ms
            if start >= ts_end:
                return 0
            candles = self.fetch_candles(
                symbol, start, ts_end, interval, quote, source=source
            )
            return self.persist_candles(candles, store_path, interval)

        symbols = to_list(symbols)
        return dict(zip(symbols, self.client_config.map(fetch_one, symbols)))

    def download_archive(
        self,
        symbol: str,
        quote: str,
        kind: str,
        months: Union[str, List[str]],
        interval: Interval = Interval.HOUR,
        destination: Optional[ValidPath] = None,
    ) -> ArchiveSource:
        """Downloads monthly files from the venue's public data archive.

        # Arguments
            kind: `"klines"` or `"aggTrades"`.
            months: One or more months, formatted `"YYYY-MM"`.
            destination: Directory receiving the CSV files, defaults to the cache.

        # Returns
            A `cryptonet.ArchiveSource` reading the downloaded directory.
        """
        paths = []
        for month in to_list(months):
            paths += download_archive(
                symbol,
                quote,
                kind,
                month,
                Interval(interval),
                root=self.client_config.archive_url,
                destination=destination,
            )
        root = Path(destination) if destination is not None else paths[0].parent
        return ArchiveSource(root)

    def load_panel(
        self,
        candle_store: Optional[ValidPath],
        symbols: Union[str, List[str]],
        ts_start: Timestamp,
        ts_end: Timestamp,
        interval: Interval = Interval.HOUR,
        quote: Optional[str] = None,
    ) -> PricePanel:
        """Builds an aligned panel of closing prices on the full grid of the range.

        Missing bars are forward-filled from the last observed close and marked
        `False` in the mask. Cells before a symbol's first observation stay `nan`
        and masked. Symbols without any bar in the range are dropped with a warning.

        # Arguments
            candle_store: The candle CSV store, defaults to
                `<data_dir>/candles_<interval>.csv`.
            symbols: The symbols, in the order of the panel's rows.
            ts_start: Inclusive start of the grid (rounded up to the interval).
            ts_end: Exclusive end of the grid.
            interval: The bar size.
            quote: Restricts the candles to one quote currency. Without it, a symbol
                stored in several quote currencies over the range raises
                `MixedQuotes`.

        # Returns
            A `cryptonet.PricePanel`
        """
        symbols = to_list(symbols)
        if not symbols:
            raise EmptyPanel("no symbol was requested")
        ts_start, ts_end = to_timestamp_ms(ts_start), to_timestamp_ms(ts_end)
        interval = Interval(interval)
        grid = np.arange(ceil_to_interval(ts_start, interval.ms), ts_end, interval.ms)
        if len(grid) == 0:
            raise InvalidRange(ts_start, ts_end)

        store_path = Path(candle_store or self.client_config.candle_store(interval))
        frame = read_candle_store(store_path, interval)
        selected = frame["symbol"].isin(symbols) & frame["ts"].isin(grid)
        if quote is not None:
            selected &= frame["quote"] == quote
        frame = frame[selected]
        quotes_per_symbol = frame.groupby("symbol")["quote"].unique()
        for symbol in symbols:
            if symbol in quotes_per_symbol and len(quotes_per_symbol[symbol]) > 1:
                raise MixedQuotes(symbol, quotes_per_symbol[symbol])

        present = [s for s in symbols if s in set(frame["symbol"])]
        if not present:
            raise EmptyPanel()
        missing = [s for s in symbols if s not in present]
        if missing:
            warnings.warn(f"No candle in range for {missing}, they are dropped.")

        closes = frame.pivot(index="symbol", columns="ts", values="close").reindex(
            index=present, columns=grid
        )
        mask = closes.notna().to_numpy()
        prices = closes.ffill(axis=1).to_numpy(dtype=float)
        quotes = sorted(set(frame["quote"]))
        return PricePanel(
            symbols=tuple(present),
            timestamps=grid,
            prices=prices,
            mask=mask,
            quote=quotes[0] if len(quotes) == 1 else "",
        )
