import shutil
import tempfile
from pathlib import Path
from typing import List, Optional

import pandas as pd
import requests
from tqdm import tqdm

from cryptonet.client_config import DEFAULT_ARCHIVE_URL
from cryptonet.components.market_data.models import Interval, Side
from cryptonet.exceptions import NetworkError
from cryptonet.utils import print_debug

CACHE_DIR = Path.home() / ".cache" / "cryptonet"

TEMPLATE_KLINES = (
    "{root}/data/spot/monthly/klines/{pair}/{interval}/{pair}-{interval}-{month}.zip"
)
TEMPLATE_AGG_TRADES = (
    "{root}/data/spot/monthly/aggTrades/{pair}/{pair}-aggTrades-{month}.zip"
)

KLINE_COLUMNS = [
    "open_time",
    "open",
    "high",
    "low",
    "close",
    "volume",
    "close_time",
    "quote_volume",
    "count",
    "taker_buy_volume",
    "taker_buy_quote_volume",
    "ignore",
]
AGG_TRADE_COLUMNS = [
    "agg_trade_id",
    "price",
    "quantity",
    "first_trade_id",
    "last_trade_id",
    "transact_time",
    "is_buyer_maker",
    "is_best_match",
]

# the archive switched from milliseconds to microseconds in 2025
MICROSECONDS_THRESHOLD = 10**14


def get_archive_dir() -> Path:
    return CACHE_DIR / "archive"


def get_archive_url(
    symbol: str,
    quote: str,
    kind: str,
    month: str,
    interval: Interval = Interval.HOUR,
    root: str = DEFAULT_ARCHIVE_URL,
) -> str:
    pair = f"{symbol}{quote}".upper()
    if kind == "klines":
        return TEMPLATE_KLINES.format(
            root=root, pair=pair, interval=interval.value, month=month
        )
    elif kind == "aggTrades":
        return TEMPLATE_AGG_TRADES.format(root=root, pair=pair, month=month)
    else:
        raise ValueError(f"Unknown archive kind `{kind}`, use 'klines' or 'aggTrades'")


def download_archive(
    symbol: str,
    quote: str,
    kind: str,
    month: str,
    interval: Interval = Interval.HOUR,
    root: str = DEFAULT_ARCHIVE_URL,
    destination: Optional[Path] = None,
) -> List[Path]:
    """Downloads one monthly archive file and unpacks it.

    Returns the paths of the extracted CSV files. Already extracted files are
    not downloaded again.
    """
    if destination is None:
        destination = get_archive_dir()
    destination = Path(destination)
    url = get_archive_url(symbol, quote, kind, month, interval, root)
    expected = destination / Path(url).with_suffix(".csv").name
    if expected.exists():
        return [expected]

    destination.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp_dir:
        tmp_dir = Path(tmp_dir)
        downloaded_file_path = tmp_dir / Path(url).name
        download_from_url(url, downloaded_file_path)
        extract_dir = tmp_dir / "extracted"
        shutil.unpack_archive(str(downloaded_file_path), str(extract_dir))
        extracted = []
        for csv_file in sorted(extract_dir.glob("*.csv")):
            target = destination / csv_file.name
            shutil.move(str(csv_file), str(target))
            extracted.append(target)
    return extracted


def download_from_url(url, dst):
    try:
        _download_from_url(url, dst)
    except Exception as e:
        raise NetworkError(url, 1, str(e)) from e


def _download_from_url(url, dst):
    print_debug("download", {"url": url, "destination": dst})
    # Streaming, so we can iterate over the response.
    response = requests.get(url, stream=True)
    response.raise_for_status()
    total_size_in_bytes = int(response.headers.get("content-length", 0))
    block_size = 1024
    progress_bar = tqdm(total=total_size_in_bytes, unit="iB", unit_scale=True)
    with open(dst, "wb") as file:
        for data in response.iter_content(block_size):
            progress_bar.update(len(data))
            file.write(data)
    progress_bar.close()
    if total_size_in_bytes != 0 and progress_bar.n != total_size_in_bytes:
        raise ConnectionError(
            f"Total size should be {total_size_in_bytes}, downloaded {progress_bar.n}"
        )


def _read_headerless(path: Path, columns: List[str]) -> pd.DataFrame:
    frame = pd.read_csv(path, header=None, dtype=str)
    # recent archive files come with a header line
    if len(frame) and not str(frame.iloc[0, 0]).strip().isdigit():
        frame = frame.iloc[1:]
    frame = frame.iloc[:, : len(columns)]
    frame.columns = columns[: frame.shape[1]]
    return frame.reset_index(drop=True)


def _to_milliseconds(column: pd.Series) -> pd.Series:
    values = column.astype("int64")
    return values.where(values < MICROSECONDS_THRESHOLD, values // 1000)


def read_venue_klines(path: Path, symbol: str, quote: str) -> pd.DataFrame:
    """Reads a venue kline file into the canonical candle columns."""
    frame = _read_headerless(path, KLINE_COLUMNS)
    result = pd.DataFrame(
        {
            "symbol": symbol,
            "quote": quote,
            "ts": _to_milliseconds(frame["open_time"]),
        }
    )
    for column in ("open", "high", "low", "close", "volume"):
        result[column] = pd.to_numeric(frame[column], errors="coerce")
    return result


def read_venue_agg_trades(path: Path, symbol: str, quote: str) -> pd.DataFrame:
    """Reads a venue aggregated-trade file into the canonical trade columns.

    Prices and amounts stay strings so that they can be turned into exact decimals.
    """
    frame = _read_headerless(path, AGG_TRADE_COLUMNS)
    is_buyer_maker = frame["is_buyer_maker"].str.strip().str.lower() == "true"
    return pd.DataFrame(
        {
            "symbol": symbol,
            "quote": quote,
            "ts": _to_milliseconds(frame["transact_time"]),
            "price": frame["price"].str.strip(),
            "amount": frame["quantity"].str.strip(),
            "side": is_buyer_maker.map(lambda m: Side.from_buyer_maker(m).value),
        }
    )
