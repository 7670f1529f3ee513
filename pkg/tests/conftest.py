import pytest

from cryptonet import CryptonetClient
from cryptonet.test_utils import START, random_candles, symbols
from cryptonet.utils import HOUR_MS

N_ASSETS = 5
N_HOURS = 72


@pytest.fixture
def client(tmp_path):
    return CryptonetClient(data_dir=tmp_path / "data", rate_limit_ms=0)


@pytest.fixture
def candle_store(client):
    """Five random walks over 72 hourly bars, persisted in the client's store."""
    client.market_data.persist_candles(random_candles(N_ASSETS, N_HOURS, seed=3))
    return client.client_config.candle_store()


@pytest.fixture
def run_kwargs(candle_store, tmp_path):
    return dict(
        candle_store=candle_store,
        symbols=symbols(N_ASSETS),
        ts_start=START,
        ts_end=START + N_HOURS * HOUR_MS,
        focus=["S00"],
        output_dir=tmp_path / "out",
    )
