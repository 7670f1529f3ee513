import random
import shutil
from decimal import Decimal

import numpy as np
import pandas as pd
import pytest

from cryptonet.client_config import ClientConfig
from cryptonet.components.market_data import sources
from cryptonet.components.market_data.api import read_candle_store
from cryptonet.components.market_data.models import Candle, Interval, Side
from cryptonet.components.market_data.sources import ArchiveSource, BinanceSource
from cryptonet.exceptions import (
    EmptyPanel,
    InvalidRange,
    IoError,
    MixedQuotes,
    NetworkError,
    SchemaError,
    SymbolUnknown,
    ValidationError,
)
from cryptonet.test_utils import (
    START,
    candles_from_prices,
    get_all_fixtures,
    random_candles,
    random_trades,
)
from cryptonet.utils import HOUR_MS, MINUTE_MS


def candle(symbol: str, bar: int, close: float) -> Candle:
    return Candle(
        symbol=symbol,
        quote="USDT",
        ts=START + bar * HOUR_MS,
        open=close,
        high=close,
        low=close,
        close=close,
        volume=1.0,
    )


def fake_response(mocker, status_code=200, payload=None):
    response = mocker.Mock(status_code=status_code, text=str(payload))
    response.json.return_value = payload
    return response


def kline(ts: int, close: str = "1.05"):
    return [ts, "1.0", "1.1", "0.9", close, "10.5", ts + HOUR_MS - 1, "0", 3, "0", "0"]


def binance(mocker, responses, **config) -> BinanceSource:
    session = mocker.Mock()
    session.get.side_effect = responses
    config.setdefault("rate_limit_ms", 0)
    return BinanceSource(ClientConfig(**config), session=session)


def test_fetch_rejects_empty_range(client, mocker):
    source = mocker.Mock()
    with pytest.raises(InvalidRange):
        client.fetch("FTT", START, START, source=source)
    source.candles.assert_not_called()


def test_fetch_three_bars_from_archive(client, tmp_path):
    prices = np.array([[10.0, 11.0, 12.0, 13.0, 14.0]])
    archive = tmp_path / "archive"
    client.market_data.persist_candles(
        candles_from_prices(prices, ["FTT"]), archive / "candles.csv"
    )

    candles = client.fetch(
        "FTT", START + HOUR_MS, START + 4 * HOUR_MS, source=ArchiveSource(archive)
    )
    assert [c.ts for c in candles] == [START + k * HOUR_MS for k in (1, 2, 3)]
    assert [c.close for c in candles] == [11.0, 12.0, 13.0]


@pytest.mark.parametrize("csv_file", get_all_fixtures("candles"))
def test_archive_duplicates_later_row_wins(client, tmp_path, csv_file):
    shutil.copy(csv_file, tmp_path / "candles.csv")
    raw = pd.read_csv(csv_file, float_precision="round_trip")

    for symbol in raw["symbol"].unique():
        expected = {}
        for row in raw[raw["symbol"] == symbol].itertuples():
            expected[row.ts] = row.close
        candles = client.fetch(
            symbol,
            int(raw["ts"].min()),
            int(raw["ts"].max()) + HOUR_MS,
            source=ArchiveSource(tmp_path),
        )
        assert [(c.ts, c.close) for c in candles] == sorted(expected.items())
        assert all(np.diff([c.ts for c in candles]) > 0)


def test_archive_reads_venue_klines(client, tmp_path):
    lines = [",".join(map(str, kline(START + k * HOUR_MS))) for k in range(3)]
    (tmp_path / "FTTUSDT-1h-2022-11.csv").write_text("\n".join(lines) + "\n")

    candles = client.fetch(
        "FTT", START, START + 3 * HOUR_MS, source=ArchiveSource(tmp_path)
    )
    assert len(candles) == 3
    assert candles[0].close == 1.05
    assert candles[0].volume == 10.5


def test_load_panel_contiguous(client):
    client.market_data.persist_candles([candle("FTT", k, 10.0 + k) for k in range(5)])
    panel = client.load_panel(None, ["FTT"], START, START + 5 * HOUR_MS)
    assert panel.shape == (1, 5)
    assert panel.mask.all()
    assert panel.quote == "USDT"


def test_load_panel_forward_fill(client):
    client.market_data.persist_candles(
        [candle("FTT", k, 10.0 + k) for k in range(5) if k != 2]
    )
    panel = client.load_panel(None, ["FTT"], START, START + 5 * HOUR_MS)
    assert panel.prices[0][2] == panel.prices[0][1] == 11.0
    assert panel.mask[0].tolist() == [True, True, False, True, True]


def test_load_panel_disjoint_histories(client):
    client.market_data.persist_candles(
        [
            candle("A", 0, 5.0),
            candle("A", 1, 6.0),
            candle("B", 2, 7.0),
            candle("B", 3, 8.0),
        ]
    )
    panel = client.load_panel(None, ["A", "B"], START, START + 4 * HOUR_MS)
    assert panel.mask.tolist() == [
        [True, True, False, False],
        [False, False, True, True],
    ]
    assert panel.prices[0].tolist() == [5.0, 6.0, 6.0, 6.0]
    assert np.isnan(panel.prices[1][:2]).all()
    assert panel.prices[1][2:].tolist() == [7.0, 8.0]


def test_load_panel_rounds_start_up_to_the_grid(client):
    client.market_data.persist_candles([candle("FTT", k, 10.0) for k in range(4)])
    panel = client.load_panel(None, ["FTT"], START + 1, START + 4 * HOUR_MS)
    assert panel.timestamps[0] == START + HOUR_MS
    assert panel.shape == (1, 3)


def test_load_panel_drops_unknown_symbols(client):
    client.market_data.persist_candles([candle("FTT", k, 10.0) for k in range(3)])
    with pytest.warns(UserWarning, match="LUNA"):
        panel = client.load_panel(None, ["LUNA", "FTT"], START, START + 3 * HOUR_MS)
    assert panel.symbols == ("FTT",)


def test_load_panel_without_data(client):
    client.market_data.persist_candles([candle("FTT", k, 10.0) for k in range(3)])
    with pytest.raises(EmptyPanel):
        client.load_panel(None, ["FTT"], START + 10 * HOUR_MS, START + 20 * HOUR_MS)
    with pytest.raises(EmptyPanel):
        client.load_panel(None, [], START, START + 3 * HOUR_MS)


def test_load_panel_missing_store(client):
    with pytest.raises(IoError):
        client.load_panel(None, ["FTT"], START, START + 3 * HOUR_MS)


def test_load_panel_refuses_a_symbol_in_two_quotes(client):
    busd = [
        candle("FTT", k, close).model_copy(update={"quote": "BUSD"})
        for k, close in enumerate([100.0, 101.0, 102.0, 103.0])
    ]
    client.market_data.persist_candles(busd + [candle("FTT", 2, 5.0)])

    with pytest.raises(MixedQuotes) as err:
        client.load_panel(None, ["FTT"], START, START + 4 * HOUR_MS)
    assert err.value.quotes == ["BUSD", "USDT"]
    assert err.value.exit_code == 3

    panel = client.load_panel(None, ["FTT"], START, START + 4 * HOUR_MS, quote="BUSD")
    assert panel.prices.tolist() == [[100.0, 101.0, 102.0, 103.0]]
    assert panel.quote == "BUSD"


def test_load_panel_symbols_quoted_differently(client):
    client.market_data.persist_candles(
        [candle("A", k, 5.0) for k in range(3)]
        + [candle("B", k, 7.0).model_copy(update={"quote": "BUSD"}) for k in range(3)]
    )
    panel = client.load_panel(None, ["A", "B"], START, START + 3 * HOUR_MS)
    assert panel.symbols == ("A", "B")
    assert panel.quote == ""


def test_each_interval_has_its_own_store(client):
    client.market_data.persist_candles([candle("FTT", k, 10.0 + k) for k in range(3)])
    minutes = [
        candle("FTT", 1, 50.0).model_copy(update={"ts": START + HOUR_MS + m})
        for m in (0, MINUTE_MS)
    ]
    client.market_data.persist_candles(minutes, interval=Interval.MINUTE)

    config = client.client_config
    assert config.candle_store(Interval.MINUTE).name == "candles_1m.csv"
    assert len(read_candle_store(config.candle_store())) == 3
    assert len(read_candle_store(config.candle_store(Interval.MINUTE))) == 2

    panel = client.load_panel(None, ["FTT"], START, START + 3 * HOUR_MS)
    assert panel.prices.tolist() == [[10.0, 11.0, 12.0]]
    assert panel.mask.all()

    panel = client.load_panel(
        None,
        ["FTT"],
        START + HOUR_MS,
        START + HOUR_MS + 2 * MINUTE_MS,
        interval=Interval.MINUTE,
    )
    assert panel.prices.tolist() == [[50.0, 50.0]]


def test_persist_refuses_a_store_of_finer_bars(client):
    minute_store = client.client_config.candle_store(Interval.MINUTE)
    minutes = [
        candle("FTT", 0, 50.0).model_copy(update={"ts": START + m})
        for m in (0, MINUTE_MS)
    ]
    client.market_data.persist_candles(minutes, interval=Interval.MINUTE)
    with pytest.raises(ValidationError) as err:
        client.market_data.persist_candles([candle("FTT", 1, 10.0)], minute_store)
    assert err.value.row == 1
    assert "not aligned to 1h" in str(err.value)


def test_persist_twice_is_byte_identical(client):
    candles = [candle("FTT", k, 10.0 + k) for k in range(3)]
    store = client.client_config.candle_store()
    assert client.market_data.persist_candles(candles) == 3
    first = store.read_bytes()
    client.market_data.persist_candles(candles)
    assert store.read_bytes() == first
    assert len(read_candle_store(store)) == 3


def test_persist_names_the_invalid_row(client):
    rows = [candle("FTT", k, 10.0).model_dump() for k in range(3)]
    rows[1].update(low=12.0, high=11.0)
    with pytest.raises(ValidationError) as err:
        client.market_data.persist_candles(rows)
    assert err.value.row == 1
    assert "row 1" in str(err.value)
    assert not client.client_config.candle_store().exists()


def test_persist_rejects_misaligned_timestamps(client):
    misaligned = candle("FTT", 0, 10.0).model_copy(update={"ts": START + 1})
    with pytest.raises(ValidationError):
        client.market_data.persist_candles([misaligned])


def test_interleaved_batches_give_the_union(client):
    candles = random_candles(2, 10, seed=1)
    first = [c for c in candles if c.ts < START + 6 * HOUR_MS]
    second = [c for c in candles if c.ts >= START + 3 * HOUR_MS]
    client.market_data.persist_candles(second)
    client.market_data.persist_candles(first)

    stored = client.market_data.load_candles()
    assert stored == sorted(set(first) | set(second), key=lambda c: c.key)


def test_persist_then_load_round_trip(client):
    candles = random_candles(3, 20, seed=2)
    shuffled = candles + candles[:7]
    random.Random(0).shuffle(shuffled)
    client.market_data.persist_candles(shuffled)
    assert client.market_data.load_candles() == sorted(candles, key=lambda c: c.key)


def test_later_candle_wins_on_persist(client):
    client.market_data.persist_candles([candle("FTT", 0, 10.0)])
    client.market_data.persist_candles([candle("FTT", 0, 12.0)])
    assert [c.close for c in client.market_data.load_candles()] == [12.0]


def test_corrupted_store_row(client):
    client.market_data.persist_candles([candle("FTT", k, 10.0) for k in range(3)])
    store = client.client_config.candle_store()
    lines = store.read_text().splitlines()
    lines[2] = lines[2].replace(",10.0,10.0,10.0,10.0,", ",10.0,9.0,11.0,10.0,")
    store.write_text("\n".join(lines) + "\n")

    with pytest.raises(ValidationError) as err:
        read_candle_store(store)
    assert err.value.row == 1
    assert "low > high" in str(err.value)


def test_wrong_header(client):
    store = client.client_config.candle_store()
    store.parent.mkdir(parents=True)
    store.write_text("symbol,ts,close\nFTT,1667260800000,1.0\n")
    with pytest.raises(SchemaError):
        read_candle_store(store)


def test_binance_candles_pagination(mocker):
    mocker.patch.object(sources, "KLINES_LIMIT", 2)
    source = binance(
        mocker,
        [
            fake_response(mocker, payload=[kline(START), kline(START + HOUR_MS)]),
            fake_response(mocker, payload=[kline(START + 2 * HOUR_MS)]),
        ],
    )
    candles = source.candles("FTT", "USDT", Interval.HOUR, START, START + 5 * HOUR_MS)

    assert [c.ts for c in candles] == [START + k * HOUR_MS for k in range(3)]
    second_call = source.session.get.call_args_list[1]
    assert second_call.kwargs["params"]["startTime"] == START + 2 * HOUR_MS
    assert second_call.kwargs["params"]["symbol"] == "FTTUSDT"


def test_binance_unknown_symbol(mocker):
    source = binance(
        mocker,
        [fake_response(mocker, 400, {"code": -1121, "msg": "Invalid symbol."})],
    )
    with pytest.raises(SymbolUnknown):
        source.candles("NOPE", "USDT", Interval.HOUR, START, START + HOUR_MS)


def test_binance_retries_then_fails(mocker):
    sleep = mocker.patch.object(sources.time, "sleep")
    source = binance(
        mocker,
        [fake_response(mocker, 503, {"msg": "busy"}) for _ in range(3)],
        max_retries=2,
    )
    with pytest.raises(NetworkError) as err:
        source.candles("FTT", "USDT", Interval.HOUR, START, START + HOUR_MS)
    assert source.session.get.call_count == 3
    assert "3 attempt" in str(err.value)
    sleep.assert_any_call(source.client_config.backoff(0))


def test_binance_recovers_after_transient_error(mocker):
    mocker.patch.object(sources.time, "sleep")
    source = binance(
        mocker,
        [
            fake_response(mocker, 429, {"msg": "slow down"}),
            fake_response(mocker, payload=[kline(START)]),
        ],
    )
    candles = source.candles("FTT", "USDT", Interval.HOUR, START, START + HOUR_MS)
    assert len(candles) == 1


def test_binance_malformed_klines(mocker):
    source = binance(mocker, [fake_response(mocker, payload={"unexpected": 1})])
    with pytest.raises(SchemaError) as err:
        source.candles("FTT", "USDT", Interval.HOUR, START, START + HOUR_MS)
    assert err.value.payload_file is not None


def test_binance_trade_sides(mocker):
    rows = [
        {"a": 7, "p": "22.10", "q": "3.5", "T": START + 10, "m": True},
        {"a": 8, "p": "22.20", "q": "1.25", "T": START + 20, "m": False},
    ]
    source = binance(
        mocker,
        [fake_response(mocker, payload=rows), fake_response(mocker, payload=[])],
    )
    trades = source.trades("FTT", "BUSD", START, START + HOUR_MS)

    assert [t.side for t in trades] == [Side.SELL, Side.BUY]
    assert trades[0].price == Decimal("22.10")
    assert trades[0].notional == Decimal("77.350")
    assert source.session.get.call_args_list[1].kwargs["params"]["fromId"] == 9


def test_persist_trades_round_trip(client):
    trades = random_trades(50, seed=4)
    store = client.client_config.trade_store("FTT", "BUSD")
    client.market_data.persist_trades(trades, store)
    first = store.read_bytes()
    client.market_data.persist_trades(trades, store)
    assert store.read_bytes() == first

    loaded = client.market_data.load_trades(store, "FTT", "BUSD")
    assert loaded == trades


def test_persist_trades_replaces_the_batch_span(client):
    trades = random_trades(40, seed=5)
    store = client.client_config.trade_store("FTT", "BUSD")
    client.market_data.persist_trades(trades, store)
    client.market_data.persist_trades(trades[10:20], store)
    assert client.market_data.load_trades(store) == trades


def test_fetch_and_persist_resumes(client, tmp_path, mocker):
    archive = tmp_path / "archive"
    client.market_data.persist_candles(
        random_candles(2, 6, seed=6), archive / "candles.csv"
    )
    source = ArchiveSource(archive)
    spy = mocker.spy(source, "candles")
    store = tmp_path / "store.csv"

    counts = client.market_data.fetch_and_persist(
        ["S00", "S01"], START, START + 6 * HOUR_MS, store_path=store, source=source
    )
    assert counts == {"S00": 6, "S01": 6}
    assert spy.call_count == 2

    counts = client.market_data.fetch_and_persist(
        ["S00", "S01"], START, START + 6 * HOUR_MS, store_path=store, source=source
    )
    assert counts == {"S00": 0, "S01": 0}
    assert spy.call_count == 2
