import hashlib
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

PROJECT_ROOT = Path(__file__).parents[1]

MINUTE_MS = 60_000
HOUR_MS = 3_600_000
DAY_MS = 86_400_000

ValidPath = Union[str, Path]
Timestamp = Union[int, str, datetime, pd.Timestamp]


def debug_enabled() -> bool:
    return os.environ.get("CRYPTONET_DEBUG", "0") == "1"


def print_debug(title: str, details: Optional[Dict[str, Any]] = None):
    if not debug_enabled():
        return
    print("------------------------------")
    print(title)
    for key, value in (details or {}).items():
        print(f"{key}: {value}")
    print("------------------------------")


def to_list(x) -> list:
    if isinstance(x, list):
        return x
    elif x is None:
        return []
    elif isinstance(x, (tuple, set)):
        return list(x)
    else:
        return [x]


def to_timestamp_ms(value: Timestamp) -> int:
    """Converts an int (milliseconds), a datetime or a date string to UTC milliseconds.

    Naive datetimes and strings without offset are read as UTC.
    """
    if isinstance(value, (int, np.integer)):
        return int(value)
    timestamp = pd.Timestamp(value)
    if timestamp.tzinfo is None:
        timestamp = timestamp.tz_localize("UTC")
    return int(timestamp.tz_convert("UTC").value // 1_000_000)


def format_timestamp(ts: int) -> str:
    return datetime.fromtimestamp(ts / 1000, tz=timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%SZ"
    )


def floor_to_interval(ts: int, interval_ms: int) -> int:
    return (ts // interval_ms) * interval_ms


def ceil_to_interval(ts: int, interval_ms: int) -> int:
    return -((-ts) // interval_ms) * interval_ms


def percentiles(values: Iterable[float], qs: Sequence[float]) -> List[float]:
    """Linear interpolation between order statistics."""
    array = np.asarray(list(values), dtype=float)
    if array.size == 0:
        return [float("nan")] * len(qs)
    return [float(x) for x in np.percentile(array, qs, method="linear")]


def sha256_file(path: ValidPath) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def write_csv(frame: pd.DataFrame, path: ValidPath) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    return path


def read_csv(path: ValidPath, **kwargs) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip", **kwargs)
