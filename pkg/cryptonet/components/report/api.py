import contextlib
from importlib import metadata
from pathlib import Path
from typing import Dict, List, Optional

import networkx
import numpy as np
import pandas as pd
import pydantic

from cryptonet.client_config import CryptonetCaller
from cryptonet.components.centrality.api import CentralityAPI
from cryptonet.components.centrality.models import write_vectors
from cryptonet.components.ewcorr.api import EwcorrAPI
from cryptonet.components.ewcorr.models import write_matrices
from cryptonet.components.imbalance.api import compute_imbalance
from cryptonet.components.market_data.api import MarketDataAPI
from cryptonet.components.market_data.models import PricePanel
from cryptonet.components.report.models import EventTimeline, RunConfig, RunManifest
from cryptonet.components.returns.api import ReturnsAPI
from cryptonet.components.tmfg.api import TmfgAPI
from cryptonet.components.tmfg.models import write_graphs
from cryptonet.exceptions import CryptonetException, SchemaError, StageError
from cryptonet.utils import (
    HOUR_MS,
    ValidPath,
    print_debug,
    read_csv,
    sha256_file,
    write_csv,
)

TS_COLUMNS = ["ts", "window_end_ts", "bucket_start_ts"]
MANIFEST_FILE = "manifest.json"


@contextlib.contextmanager
def _stage(name: str):
    print_debug(f"stage {name}")
    try:
        yield
    except StageError:
        raise
    except CryptonetException as err:
        raise StageError(name, err) from err


def panel_to_frame(panel: PricePanel) -> pd.DataFrame:
    frame = pd.DataFrame(panel.prices.T, columns=list(panel.symbols))
    frame.insert(0, "ts", panel.timestamps)
    return frame


def _versions() -> Dict[str, str]:
    try:
        cryptonet_version = metadata.version("cryptonet")
    except metadata.PackageNotFoundError:
        cryptonet_version = "unknown"
    return {
        "cryptonet": cryptonet_version,
        "networkx": networkx.__version__,
        "numpy": np.__version__,
        "pandas": pd.__version__,
        "pydantic": pydantic.VERSION,
    }


def _infer_bucket_ms(timestamps: np.ndarray) -> int:
    steps = np.diff(np.unique(timestamps))
    steps = steps[steps > 0]
    return int(steps.min()) if len(steps) else HOUR_MS


class ReportAPI(CryptonetCaller):
    def load_timeline(self, path: Optional[ValidPath] = None) -> EventTimeline:
        """Loads an event timeline, the FTX collapse timeline by default."""
        if path is None:
            return EventTimeline.ftx()
        return EventTimeline.load(path)

    def run_pipeline(self, config: RunConfig) -> RunManifest:
        """Runs every analysis on the configured panel and writes plot-ready files.

        Stages run in dependency order: candles are loaded into a panel, turned into
        returns, rolling correlations and their averages, non-overlapping centrality
        with percentile bands, trade imbalance (when a trade store is given),
        buy-and-hold returns and rescaled prices. `manifest.json` lists the hash of
        every input and output.

        Any failure halts the run with a `StageError` naming the stage, and the
        window when it happened inside a window.

        # Arguments
            config: A `cryptonet.RunConfig`.

        # Returns
            A `cryptonet.RunManifest`
        """
        market_data = MarketDataAPI(self.client_config)
        returns_api = ReturnsAPI(self.client_config)
        ewcorr = EwcorrAPI(self.client_config)
        centrality = CentralityAPI(self.client_config)
        tmfg = TmfgAPI(self.client_config)

        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        written: List[Path] = []

        with _stage("market-data"):
            panel = market_data.load_panel(
                config.candle_store,
                config.symbols,
                config.ts_start,
                config.ts_end,
                config.interval,
                config.quote,
            )

        with _stage("returns-transform"):
            rescaled = returns_api.rescale(panel)
            frame = panel_to_frame(rescaled)
            written.append(write_csv(frame, out / "rescaled_prices.csv"))
            returns = returns_api.to_returns(panel, config.return_kind)

        with _stage("ewcorr"):
            mats = ewcorr.rolling_corr(
                returns, config.window, config.step, config.effective_theta
            )
            focus = [s for s in config.focus if s in panel.symbols] or None
            series = ewcorr.average_series(mats, focus)
            written.append(series.to_csv(out / "average_correlation.csv"))
            if config.write_correlations:
                written.append(write_matrices(mats, out / "correlations.csv"))

        with _stage("centrality"):
            vectors = centrality.centrality_over_windows(
                returns,
                config.effective_centrality_window,
                config.effective_theta,
                config.transform,
                config.binary_adjacency,
            )
            written.append(write_vectors(vectors, out / "centrality.csv"))
            bands = centrality.percentile_bands(vectors, config.focus)
            written.append(bands.to_csv(out / "centrality_bands.csv"))

        if config.write_graphs:
            with _stage("tmfg"):
                graphs = tmfg.build_from_correlations(mats, config.transform)
                reports = [tmfg.verify(g) for g in graphs]
                written.extend(write_graphs(graphs, out / "tmfg_edges.csv", reports))

        if config.trade_store is not None:
            with _stage("flow-imbalance"):
                trades = market_data.load_trades(
                    config.trade_store, ts_start=config.ts_start, ts_end=config.ts_end
                )
                imbalance = compute_imbalance(
                    trades,
                    config.bucket,
                    dense=config.dense_imbalance,
                    allow_empty=True,
                )
                written.append(imbalance.to_csv(out / "imbalance.csv"))

        with _stage("bhr"):
            bhr_start = config.bhr_start
            bhr_end = config.bhr_end
            if bhr_start is None:
                bhr_start = int(panel.timestamps[0])
            if bhr_end is None:
                bhr_end = int(panel.timestamps[-1])
            report = returns_api.buy_and_hold(panel, bhr_start, bhr_end)
            written.append(report.to_csv(out / "bhr.csv"))
            written.append(report.write_summary(out / "bhr_summary.json"))

        inputs = [config.candle_store]
        if config.trade_store is not None:
            inputs.append(config.trade_store)
        manifest = RunManifest(
            config=config.echo(),
            inputs={str(p): sha256_file(p) for p in inputs},
            outputs={p.name: sha256_file(p) for p in sorted(written)},
            versions=_versions(),
        )
        manifest.write(out / MANIFEST_FILE)
        return manifest

    def annotate(
        self,
        csv_path: ValidPath,
        timeline: Optional[EventTimeline] = None,
        output_path: Optional[ValidPath] = None,
        bucket_ms: Optional[int] = None,
        ts_column: Optional[str] = None,
    ) -> pd.DataFrame:
        """Adds an `event` column with the labels of the events falling inside each
        row's bucket `[ts, ts + bucket_ms)`, joined by `;` in time order.

        # Arguments
            csv_path: Any CSV with a timestamp column (`ts`, `window_end_ts` or
                `bucket_start_ts` unless `ts_column` is given).
            timeline: Defaults to the FTX collapse timeline.
            output_path: Where to write the annotated CSV, defaults to
                `<name>_annotated.csv` next to the input.
            bucket_ms: The bucket width, inferred from the smallest gap between
                timestamps (one hour if there is a single row).
            ts_column: The name of the timestamp column.

        # Returns
            The annotated `pandas.DataFrame`.
        """
        csv_path = Path(csv_path)
        timeline = timeline or EventTimeline.ftx()
        frame = read_csv(csv_path)
        if ts_column is None:
            candidates = [c for c in TS_COLUMNS if c in frame.columns]
            if not candidates:
                raise SchemaError(
                    str(csv_path),
                    f"none of the timestamp columns {TS_COLUMNS}, use `ts_column`",
                )
            ts_column = candidates[0]
        timestamps = frame[ts_column].to_numpy(dtype=np.int64)
        if bucket_ms is None:
            bucket_ms = _infer_bucket_ms(timestamps)
        frame["event"] = [
            ";".join(timeline.labels_between(int(ts), int(ts) + bucket_ms))
            for ts in timestamps
        ]
        if output_path is None:
            output_path = csv_path.with_name(f"{csv_path.stem}_annotated.csv")
        write_csv(frame, output_path)
        return frame
