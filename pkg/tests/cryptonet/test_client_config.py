import json
import time
from pathlib import Path

import pytest

from cryptonet import exceptions
from cryptonet.client_config import ClientConfig, Query
from cryptonet.components.market_data.sources import BinanceSource
from cryptonet.exceptions import SchemaError


def test_environment_variables(monkeypatch, tmp_path):
    monkeypatch.setenv("CRYPTONET_DATA_DIR", str(tmp_path))
    monkeypatch.setenv("CRYPTONET_RATE_LIMIT_MS", "250")
    config = ClientConfig()
    assert config.candle_store() == tmp_path / "candles_1h.csv"
    assert config.trade_store("FTT", "BUSD") == tmp_path / "trades_FTTBUSD.csv"
    assert config.rate_limit_ms == 250


def test_defaults(monkeypatch):
    monkeypatch.delenv("CRYPTONET_DATA_DIR", raising=False)
    monkeypatch.delenv("CRYPTONET_RATE_LIMIT_MS", raising=False)
    config = ClientConfig()
    assert Path(config.data_dir) == Path("data")
    assert config.rate_limit_ms == 100
    assert config.workers == 1


def test_backoff_is_bounded():
    config = ClientConfig(backoff_s=1, max_backoff_s=5)
    assert [config.backoff(a) for a in range(5)] == [1, 2, 4, 5, 5]


@pytest.mark.parametrize("workers", [1, 4])
def test_map_keeps_order(workers):
    def slow_square(x):
        time.sleep(0.001 * (10 - x))
        return x * x

    config = ClientConfig(workers=workers)
    assert config.map(slow_square, range(10)) == [x * x for x in range(10)]


def test_query():
    query = Query(symbol="FTTBUSD")
    query.add_simple_arg("startTime", None)
    query.add_simple_arg("limit", 1000)
    query.add_flag("dummy", False)
    query.add_flag("verbose", True)
    assert query == {"symbol": "FTTBUSD", "limit": 1000, "verbose": "true"}
    assert (query + {"limit": 10})["limit"] == 10
    assert query["limit"] == 1000


def test_pretty_exception_message_and_report(mocker):
    response = mocker.Mock(status_code=200, text="not json at all")
    response.json.side_effect = ValueError("no JSON")
    session = mocker.Mock()
    session.get.return_value = response
    source = BinanceSource(ClientConfig(rate_limit_ms=0), session=session)

    with pytest.raises(SchemaError) as err:
        source.get("/api/v3/klines", Query(symbol="FTTUSDT"), "FTT")
    error_message = str(err.value)
    assert "malformed" in error_message

    # the dump of the response is somewhere on disk
    for word in error_message.split():
        if ".json" in word:
            break
    else:
        raise IndexError

    assert Path(word).read_text() == '"not json at all"'
    assert err.value.payload_file == word


def test_payload_dump_is_closed(mocker):
    fdopen = mocker.spy(exceptions.os, "fdopen")
    err = SchemaError("binance", "bad kline", {"code": 0})
    assert fdopen.call_count == 1
    assert fdopen.spy_return.closed
    assert json.loads(Path(err.payload_file).read_text()) == {"code": 0}
