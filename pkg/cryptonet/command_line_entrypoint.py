import functools
import json
from pathlib import Path
from typing import List, Optional

import typer

from cryptonet.client import CryptonetClient
from cryptonet.components.centrality.models import write_vectors
from cryptonet.components.ewcorr.models import write_matrices
from cryptonet.components.imbalance.models import Bucket, PeakDirection, peaks_to_frame
from cryptonet.components.market_data.models import Interval
from cryptonet.components.market_data.sources import ArchiveSource
from cryptonet.components.report.api import panel_to_frame
from cryptonet.components.report.models import EventTimeline, RunConfig
from cryptonet.components.returns.models import ReturnKind
from cryptonet.components.tmfg.models import SimilarityTransform, write_graphs
from cryptonet.exceptions import CryptonetException
from cryptonet.utils import format_timestamp, write_csv

app = typer.Typer(help="Correlation networks and trade flows of crypto markets.")

SYMBOLS = typer.Option(..., "--symbols", help="Comma-separated, e.g. FTT,BNB,BTC")
TS_FROM = typer.Option(..., "--from", help="Inclusive start, a date or ms (UTC)")
TS_TO = typer.Option(..., "--to", help="Exclusive end, a date or ms (UTC)")
INTERVAL = typer.Option(Interval.HOUR, "--interval")
QUOTE = typer.Option(None, "--quote", help="Quote currency, e.g. USDT")
WINDOW = typer.Option(24, "--window", help="Observations per window")
STEP = typer.Option(1, "--step", help="Observations between two windows")
THETA = typer.Option(None, "--theta", help="Weight decay, default window/3")
TRANSFORM = typer.Option(SimilarityTransform.SQUARE, "--transform")
KIND = typer.Option(ReturnKind.LOG, "--kind", help="Returns fed to correlations")
FOCUS = typer.Option("", "--focus", help="Comma-separated symbols to follow")
OUT = typer.Option(Path("output"), "--out", help="Output directory")
DATA_DIR = typer.Option(
    None, "--data-dir", envvar="CRYPTONET_DATA_DIR", help="Candle and trade stores"
)
RATE_LIMIT = typer.Option(
    None, "--rate-limit-ms", envvar="CRYPTONET_RATE_LIMIT_MS"
)
WORKERS = typer.Option(1, "--workers", help="Threads for symbols and windows")
PROGRESS = typer.Option(False, "--progress/--no-progress")


def handle_errors(command):
    """Turns library errors into a message on stderr and the matching exit code."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except CryptonetException as err:
            typer.echo(str(err), err=True)
            raise typer.Exit(code=err.exit_code)

    return wrapper


def split(values: str) -> List[str]:
    return [v.strip() for v in values.split(",") if v.strip()]


def make_client(
    data_dir: Optional[Path] = None,
    rate_limit_ms: Optional[int] = None,
    workers: int = 1,
    progress: bool = False,
) -> CryptonetClient:
    return CryptonetClient(
        data_dir=data_dir,
        rate_limit_ms=rate_limit_ms,
        workers=workers,
        progress=progress,
    )


def load_returns(client, symbols, ts_from, ts_to, interval, quote, kind):
    panel = client.load_panel(None, split(symbols), ts_from, ts_to, interval, quote)
    return client.to_returns(panel, kind)


@app.command()
@handle_errors
def fetch(
    symbols: str = SYMBOLS,
    ts_from: str = TS_FROM,
    ts_to: str = TS_TO,
    interval: Interval = INTERVAL,
    quote: str = typer.Option("USDT", "--quote"),
    trades: bool = typer.Option(False, "--trades", help="Fetch the trade tape"),
    archive: Optional[Path] = typer.Option(
        None, "--archive", help="Read from local files instead of the remote source"
    ),
    data_dir: Optional[Path] = DATA_DIR,
    rate_limit_ms: Optional[int] = RATE_LIMIT,
    workers: int = WORKERS,
    progress: bool = PROGRESS,
):
    """Downloads candles (or trades) and merges them into the local stores."""
    client = make_client(data_dir, rate_limit_ms, workers, progress)
    source = ArchiveSource(archive) if archive is not None else None
    if trades:
        for symbol in split(symbols):
            records = client.fetch_trades(symbol, ts_from, ts_to, quote, source)
            store = client.client_config.trade_store(symbol, quote)
            count = client.market_data.persist_trades(records, store)
            typer.echo(f"{symbol}/{quote}: {count} trades written to {store}")
        return
    counts = client.market_data.fetch_and_persist(
        split(symbols), ts_from, ts_to, interval, quote, source=source
    )
    for symbol, count in counts.items():
        typer.echo(f"{symbol}/{quote}: {count} candles written")


@app.command()
@handle_errors
def panel(
    symbols: str = SYMBOLS,
    ts_from: str = TS_FROM,
    ts_to: str = TS_TO,
    interval: Interval = INTERVAL,
    quote: Optional[str] = QUOTE,
    out: Path = OUT,
    data_dir: Optional[Path] = DATA_DIR,
):
    """Writes the aligned closing prices and their rescaled version."""
    client = make_client(data_dir)
    prices = client.load_panel(None, split(symbols), ts_from, ts_to, interval, quote)
    write_csv(panel_to_frame(prices), out / "prices.csv")
    write_csv(panel_to_frame(client.rescale(prices)), out / "rescaled_prices.csv")
    typer.echo(f"{len(prices.symbols)} symbols x {len(prices.timestamps)} bars")


@app.command()
@handle_errors
def corr(
    symbols: str = SYMBOLS,
    ts_from: str = TS_FROM,
    ts_to: str = TS_TO,
    interval: Interval = INTERVAL,
    quote: Optional[str] = QUOTE,
    window: int = WINDOW,
    step: int = STEP,
    theta: Optional[float] = THETA,
    kind: ReturnKind = KIND,
    focus: str = FOCUS,
    out: Path = OUT,
    data_dir: Optional[Path] = DATA_DIR,
    workers: int = WORKERS,
    progress: bool = PROGRESS,
):
    """Rolling weighted correlations and average-correlation series."""
    client = make_client(data_dir, workers=workers, progress=progress)
    returns = load_returns(client, symbols, ts_from, ts_to, interval, quote, kind)
    mats = client.rolling_corr(returns, window, step, theta)
    write_matrices(mats, out / "correlations.csv")
    series = client.average_series(mats, split(focus) or None)
    series.to_csv(out / "average_correlation.csv")
    peak = series.peak()
    if peak is not None:
        peak_time = format_timestamp(peak)
        typer.echo(f"{len(mats)} windows, market mean peaks at {peak_time}")


@app.command()
@handle_errors
def tmfg(
    symbols: str = SYMBOLS,
    ts_from: str = TS_FROM,
    ts_to: str = TS_TO,
    interval: Interval = INTERVAL,
    quote: Optional[str] = QUOTE,
    window: int = WINDOW,
    step: int = STEP,
    theta: Optional[float] = THETA,
    kind: ReturnKind = KIND,
    transform: SimilarityTransform = TRANSFORM,
    out: Path = OUT,
    data_dir: Optional[Path] = DATA_DIR,
    workers: int = WORKERS,
):
    """Builds and verifies one TMFG per rolling window."""
    client = make_client(data_dir, workers=workers)
    returns = load_returns(client, symbols, ts_from, ts_to, interval, quote, kind)
    mats = client.rolling_corr(returns, window, step, theta)
    graphs = client.tmfg.build_from_correlations(mats, transform)
    reports = [client.tmfg.verify(g) for g in graphs]
    write_graphs(graphs, out / "tmfg_edges.csv", reports)
    failed = sum(not r.passed for r in reports)
    typer.echo(f"{len(graphs)} graphs, {failed} failed verification")


@app.command()
@handle_errors
def centrality(
    symbols: str = SYMBOLS,
    ts_from: str = TS_FROM,
    ts_to: str = TS_TO,
    interval: Interval = INTERVAL,
    quote: Optional[str] = QUOTE,
    window: int = WINDOW,
    theta: Optional[float] = THETA,
    kind: ReturnKind = KIND,
    transform: SimilarityTransform = TRANSFORM,
    binary: bool = typer.Option(False, "--binary", help="Unweighted adjacency"),
    focus: str = FOCUS,
    out: Path = OUT,
    data_dir: Optional[Path] = DATA_DIR,
    workers: int = WORKERS,
    progress: bool = PROGRESS,
):
    """Eigenvector centrality over non-overlapping windows, with percentile bands."""
    client = make_client(data_dir, workers=workers, progress=progress)
    returns = load_returns(client, symbols, ts_from, ts_to, interval, quote, kind)
    vectors = client.centrality.centrality_over_windows(
        returns, window, theta, transform, binary
    )
    write_vectors(vectors, out / "centrality.csv")
    bands = client.centrality.percentile_bands(vectors, split(focus))
    bands.to_csv(out / "centrality_bands.csv")
    typer.echo(f"{len(vectors)} windows")


@app.command()
@handle_errors
def imbalance(
    symbol: str = typer.Option(..., "--symbol"),
    quote: str = typer.Option("BUSD", "--quote"),
    ts_from: Optional[str] = typer.Option(None, "--from"),
    ts_to: Optional[str] = typer.Option(None, "--to"),
    bucket: Bucket = typer.Option(Bucket.MINUTE, "--bucket"),
    trades: Optional[Path] = typer.Option(None, "--trades", help="Trade CSV store"),
    dense: bool = typer.Option(False, "--dense", help="Emit empty buckets as 0"),
    allow_empty: bool = typer.Option(False, "--allow-empty"),
    top: int = typer.Option(5, "--top", help="Number of peaks to print"),
    direction: PeakDirection = typer.Option(PeakDirection.ABS, "--direction"),
    before: Optional[str] = typer.Option(None, "--before", help="Peaks before"),
    out: Path = OUT,
    data_dir: Optional[Path] = DATA_DIR,
):
    """Signed trade-flow imbalance per bucket, positive meaning net selling."""
    client = make_client(data_dir)
    store = trades or client.client_config.trade_store(symbol, quote)
    records = client.market_data.load_trades(
        store, symbol, quote, ts_start=ts_from, ts_end=ts_to
    )
    series = client.compute_imbalance(records, bucket, dense, allow_empty)
    series.to_csv(out / "imbalance.csv")
    peaks = client.imbalance.peak_report(series, top, direction, ts_end=before)
    if peaks:
        frame = peaks_to_frame(peaks)
        frame.insert(1, "time", [format_timestamp(p.ts) for p in peaks])
        typer.echo(frame.to_string(index=False))


@app.command()
@handle_errors
def bhr(
    symbols: str = SYMBOLS,
    ts_from: str = TS_FROM,
    ts_to: str = TS_TO,
    start: Optional[str] = typer.Option(None, "--start", help="Buying date"),
    end: Optional[str] = typer.Option(None, "--end", help="Selling date"),
    interval: Interval = INTERVAL,
    quote: Optional[str] = QUOTE,
    top: int = typer.Option(10, "--top"),
    out: Path = OUT,
    data_dir: Optional[Path] = DATA_DIR,
):
    """Buy-and-hold returns, with their median and quartiles."""
    client = make_client(data_dir)
    prices = client.load_panel(None, split(symbols), ts_from, ts_to, interval, quote)
    report = client.buy_and_hold(
        prices,
        start if start is not None else int(prices.timestamps[0]),
        end if end is not None else int(prices.timestamps[-1]),
    )
    report.to_csv(out / "bhr.csv")
    report.write_summary(out / "bhr_summary.json")
    worst, best = report.extremes(top)
    typer.echo("worst: " + ", ".join(f"{e.symbol} {e.bhr:+.3f}" for e in worst))
    typer.echo("best: " + ", ".join(f"{e.symbol} {e.bhr:+.3f}" for e in best))
    typer.echo(json.dumps(report.summary()))


@app.command()
@handle_errors
def run(
    config: Optional[Path] = typer.Option(None, "--config", help="RunConfig JSON"),
    symbols: Optional[str] = typer.Option(None, "--symbols"),
    ts_from: Optional[str] = typer.Option(None, "--from"),
    ts_to: Optional[str] = typer.Option(None, "--to"),
    candles: Optional[Path] = typer.Option(None, "--candles"),
    trades: Optional[Path] = typer.Option(None, "--trades"),
    interval: Optional[Interval] = typer.Option(None, "--interval"),
    quote: Optional[str] = QUOTE,
    window: Optional[int] = typer.Option(None, "--window"),
    step: Optional[int] = typer.Option(None, "--step"),
    theta: Optional[float] = typer.Option(None, "--theta"),
    transform: Optional[SimilarityTransform] = typer.Option(None, "--transform"),
    bucket: Optional[Bucket] = typer.Option(None, "--bucket"),
    focus: Optional[str] = typer.Option(None, "--focus"),
    out: Optional[Path] = typer.Option(None, "--out"),
    data_dir: Optional[Path] = DATA_DIR,
    workers: int = WORKERS,
    progress: bool = PROGRESS,
):
    """Runs the whole pipeline and writes a manifest of every output."""
    client = make_client(data_dir, workers=workers, progress=progress)
    options = dict(
        symbols=split(symbols) if symbols is not None else None,
        ts_start=ts_from,
        ts_end=ts_to,
        candle_store=candles,
        trade_store=trades,
        interval=interval,
        quote=quote,
        window=window,
        step=step,
        theta=theta,
        transform=transform,
        bucket=bucket,
        focus=split(focus) if focus is not None else None,
        output_dir=out,
    )
    if config is not None:
        run_config = RunConfig.load(config, **options)
    else:
        options = {k: v for k, v in options.items() if v is not None}
        store = client.client_config.candle_store(interval or Interval.HOUR)
        options.setdefault("candle_store", store)
        run_config = RunConfig.create("command line", **options)
    manifest = client.run(run_config)
    typer.echo(f"{len(manifest.outputs)} files written to {run_config.output_dir}")


@app.command()
@handle_errors
def annotate(
    csv_path: Path = typer.Argument(..., help="Any CSV with a timestamp column"),
    timeline: Optional[Path] = typer.Option(None, "--timeline"),
    out: Optional[Path] = typer.Option(None, "--out", help="Annotated CSV path"),
    bucket_ms: Optional[int] = typer.Option(None, "--bucket-ms"),
    ts_column: Optional[str] = typer.Option(None, "--ts-column"),
):
    """Adds an `event` column with the timeline labels falling in each row."""
    events = EventTimeline.load(timeline) if timeline else EventTimeline.ftx()
    frame = CryptonetClient().annotate(csv_path, events, out, bucket_ms, ts_column)
    typer.echo(f"{(frame['event'] != '').sum()} rows annotated")


def main():
    app()
