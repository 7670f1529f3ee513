from typing import Optional

from cryptonet.client_config import ClientConfig, CryptonetCaller
from cryptonet.components.centrality.api import CentralityAPI
from cryptonet.components.ewcorr.api import EwcorrAPI
from cryptonet.components.imbalance.api import ImbalanceAPI
from cryptonet.components.market_data.api import MarketDataAPI
from cryptonet.components.report.api import ReportAPI
from cryptonet.components.returns.api import ReturnsAPI
from cryptonet.components.tmfg.api import TmfgAPI
from cryptonet.utils import ValidPath


class CryptonetClient(CryptonetCaller):
    """Entry point to every analysis of the package.

    Note that
    ```python
    from cryptonet import cryptonet
    panel = cryptonet.load_panel(None, ["FTT", "BNB"], "2022-01-01", "2022-12-01")
    ```
    is equivalent to
    ```python
    from cryptonet import CryptonetClient
    cryptonet = CryptonetClient()
    panel = cryptonet.market_data.load_panel(...)
    ```

    # Arguments
        data_dir: Where the candle and trade stores live
            (default `$CRYPTONET_DATA_DIR` or `./data`).
        rate_limit_ms: Minimum delay between two requests to the remote source
            (default `$CRYPTONET_RATE_LIMIT_MS` or 100).
        workers: Number of threads used for symbols and windows (default 1).
        progress: Show progress bars.
        client_config: A ready-made `ClientConfig`, the other arguments are then
            ignored.
    """

    def __init__(
        self,
        data_dir: Optional[ValidPath] = None,
        rate_limit_ms: Optional[int] = None,
        workers: Optional[int] = None,
        progress: Optional[bool] = None,
        client_config: Optional[ClientConfig] = None,
    ):
        if client_config is None:
            options = dict(
                data_dir=data_dir,
                rate_limit_ms=rate_limit_ms,
                workers=workers,
                progress=progress,
            )
            client_config = ClientConfig(
                **{k: v for k, v in options.items() if v is not None}
            )
        super().__init__(client_config)

        self.market_data = MarketDataAPI(self.client_config)
        self.returns = ReturnsAPI(self.client_config)
        self.ewcorr = EwcorrAPI(self.client_config)
        self.tmfg = TmfgAPI(self.client_config)
        self.centrality = CentralityAPI(self.client_config)
        self.imbalance = ImbalanceAPI(self.client_config)
        self.report = ReportAPI(self.client_config)

        # aliases
        self.fetch = self.market_data.fetch_candles
        self.fetch_trades = self.market_data.fetch_trades
        self.load_panel = self.market_data.load_panel
        self.to_returns = self.returns.to_returns
        self.rescale = self.returns.rescale
        self.buy_and_hold = self.returns.buy_and_hold
        self.rolling_corr = self.ewcorr.rolling_corr
        self.average_series = self.ewcorr.average_series
        self.build_tmfg = self.tmfg.build
        self.eigenvector_centrality = self.centrality.eigenvector_centrality
        self.compute_imbalance = self.imbalance.compute
        self.run = self.report.run_pipeline
        self.annotate = self.report.annotate
