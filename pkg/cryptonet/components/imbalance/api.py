from collections import defaultdict
from decimal import Decimal
from typing import Iterable, List, Optional

from cryptonet.client_config import CryptonetCaller
from cryptonet.components.imbalance.models import (
    Bucket,
    ImbalancePeak,
    ImbalanceSeries,
    PeakDirection,
)
from cryptonet.components.market_data.models import Side, TradeRecord
from cryptonet.exceptions import EmptyInput, InvalidParameter, MixedSymbols
from cryptonet.utils import Timestamp, floor_to_interval, to_timestamp_ms

ZERO = Decimal(0)


def _from_totals(symbol, quote, bucket: Bucket, totals, dense: bool) -> ImbalanceSeries:
    timestamps = sorted(totals)
    if dense and timestamps:
        timestamps = list(range(timestamps[0], timestamps[-1] + 1, bucket.ms))
    return ImbalanceSeries(
        symbol=symbol,
        quote=quote,
        bucket=bucket,
        timestamps=tuple(timestamps),
        buy_total=tuple(totals[t][0] if t in totals else ZERO for t in timestamps),
        sell_total=tuple(totals[t][1] if t in totals else ZERO for t in timestamps),
    )


def compute_imbalance(
    trades: Iterable[TradeRecord],
    bucket: Bucket = Bucket.MINUTE,
    dense: bool = False,
    allow_empty: bool = False,
) -> ImbalanceSeries:
    """Aggregates trades into sell minus buy notional per bucket.

    A trade belongs to the bucket `floor(ts / bucket_ms)`, a trade exactly on a
    boundary opens the later bucket. Sums are exact, so the input order does not
    matter.

    # Arguments
        trades: Trades of a single symbol and quote.
        bucket: `"minute"` or `"hour"`.
        dense: Also emit zero buckets between the first and the last trade.
        allow_empty: Return an empty series instead of raising `EmptyInput`.

    # Returns
        A `cryptonet.ImbalanceSeries`
    """
    bucket = Bucket(bucket)
    trades = list(trades)
    if not trades:
        if allow_empty:
            return ImbalanceSeries("", "", bucket, (), (), ())
        raise EmptyInput("trades")
    pairs = {(t.symbol, t.quote) for t in trades}
    if len(pairs) > 1:
        raise MixedSymbols(pairs)
    ((symbol, quote),) = pairs

    totals = defaultdict(lambda: [ZERO, ZERO])
    for trade in trades:
        bucket_start = floor_to_interval(trade.ts, bucket.ms)
        side = 1 if trade.side == Side.SELL else 0
        totals[bucket_start][side] += trade.price * trade.amount
    return _from_totals(symbol, quote, bucket, totals, dense)


def merge_imbalance(*series: ImbalanceSeries) -> ImbalanceSeries:
    """Adds up series computed on separate shards of the same tape."""
    series = [s for s in series if len(s)]
    if not series:
        raise EmptyInput("imbalance series", can_be_allowed=False)
    pairs = {(s.symbol, s.quote) for s in series}
    if len(pairs) > 1:
        raise MixedSymbols(pairs)
    buckets = {s.bucket for s in series}
    if len(buckets) > 1:
        raise InvalidParameter(
            "bucket", sorted(b.value for b in buckets), "all series must share it"
        )
    totals = defaultdict(lambda: [ZERO, ZERO])
    for s in series:
        for ts, buy, sell in zip(s.timestamps, s.buy_total, s.sell_total):
            totals[ts][0] += buy
            totals[ts][1] += sell
    ((symbol, quote),) = pairs
    return _from_totals(symbol, quote, buckets.pop(), totals, dense=False)


def peak_report(
    series: ImbalanceSeries,
    k: int = 1,
    direction: PeakDirection = PeakDirection.ABS,
    ts_start: Optional[Timestamp] = None,
    ts_end: Optional[Timestamp] = None,
) -> List[ImbalancePeak]:
    """The `k` most extreme buckets, largest first, ties to the earlier bucket.

    # Arguments
        series: The `cryptonet.ImbalanceSeries`.
        k: How many buckets to return, at least 1.
        direction: `"abs"` ranks by absolute value, `"sell"` keeps only net
            selling buckets, `"buy"` only net buying buckets.
        ts_start: Only buckets starting at or after this time.
        ts_end: Only buckets starting strictly before this time.

    # Returns
        `List[cryptonet.ImbalancePeak]`, possibly shorter than `k`.
    """
    if k < 1:
        raise InvalidParameter("k", k, "must be >= 1")
    direction = PeakDirection(direction)
    start = None if ts_start is None else to_timestamp_ms(ts_start)
    end = None if ts_end is None else to_timestamp_ms(ts_end)
    peaks = []
    for ts, buy, sell in zip(series.timestamps, series.buy_total, series.sell_total):
        if (start is not None and ts < start) or (end is not None and ts >= end):
            continue
        value = sell - buy
        if direction == PeakDirection.SELL and value <= 0:
            continue
        if direction == PeakDirection.BUY and value >= 0:
            continue
        peaks.append(ImbalancePeak(ts=ts, value=value, buy_total=buy, sell_total=sell))
    peaks.sort(key=lambda p: (-abs(p.value), p.ts))
    return peaks[:k]


class ImbalanceAPI(CryptonetCaller):
    def compute(
        self,
        trades: Iterable[TradeRecord],
        bucket: Bucket = Bucket.MINUTE,
        dense: bool = False,
        allow_empty: bool = False,
    ) -> ImbalanceSeries:
        return compute_imbalance(trades, bucket, dense=dense, allow_empty=allow_empty)

    def merge(self, *series: ImbalanceSeries) -> ImbalanceSeries:
        return merge_imbalance(*series)

    def peak_report(
        self,
        series: ImbalanceSeries,
        k: int = 1,
        direction: PeakDirection = PeakDirection.ABS,
        ts_start: Optional[Timestamp] = None,
        ts_end: Optional[Timestamp] = None,
    ) -> List[ImbalancePeak]:
        return peak_report(series, k, direction, ts_start, ts_end)
