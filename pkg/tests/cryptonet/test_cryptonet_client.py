from cryptonet import CryptonetClient, cryptonet
from cryptonet.client_config import ClientConfig


def test_sub_components_share_the_config(tmp_path):
    client = CryptonetClient(data_dir=tmp_path, workers=3)
    for component in (
        client.market_data,
        client.returns,
        client.ewcorr,
        client.tmfg,
        client.centrality,
        client.imbalance,
        client.report,
    ):
        assert component.client_config is client.client_config
    assert client.client_config.candle_store() == tmp_path / "candles_1h.csv"
    assert client.client_config.workers == 3


def test_given_config_wins():
    config = ClientConfig(workers=2, progress=True)
    client = CryptonetClient(workers=8, client_config=config)
    assert client.client_config is config


def test_aliases():
    assert cryptonet.load_panel == cryptonet.market_data.load_panel
    assert cryptonet.rolling_corr == cryptonet.ewcorr.rolling_corr
    assert cryptonet.build_tmfg == cryptonet.tmfg.build
    assert cryptonet.compute_imbalance == cryptonet.imbalance.compute
    assert cryptonet.run == cryptonet.report.run_pipeline
