from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import pydantic

from cryptonet.components.centrality.models import BAND_PERCENTILES
from cryptonet.components.ewcorr.api import DEFAULT_STEP, DEFAULT_WINDOW, default_theta
from cryptonet.components.imbalance.models import Bucket
from cryptonet.components.market_data.models import Interval
from cryptonet.components.returns.models import SUMMARY_PERCENTILES, ReturnKind
from cryptonet.components.tmfg.models import SimilarityTransform
from cryptonet.exceptions import InvalidConfig
from cryptonet.utils import ValidPath, format_timestamp, to_timestamp_ms

TIMELINE_FILE = Path(__file__).parent / "ftx_timeline.json"


def _parse_timestamp(value: Any) -> int:
    try:
        return to_timestamp_ms(value)
    except (ValueError, TypeError) as err:
        raise ValueError(f"`{value}` is not a timestamp") from err


def _problems(err: pydantic.ValidationError) -> List[str]:
    problems = []
    for error in err.errors():
        location = ".".join(str(x) for x in error["loc"]) or "config"
        problems.append(f"{location}: {error['msg']}")
    return problems


class TimelineEvent(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    label: str = pydantic.Field(pattern=r"^[a-h]$")
    ts: int
    description: str = ""

    @pydantic.field_validator("ts", mode="before")
    @classmethod
    def parse_ts(cls, value):
        return _parse_timestamp(value)


class EventTimeline(pydantic.BaseModel):
    """Dated events with single-letter labels, used to annotate series.

    The timeline of the FTX collapse ships with the package, see `EventTimeline.ftx()`.
    """

    model_config = pydantic.ConfigDict(frozen=True)

    entries: List[TimelineEvent]

    @pydantic.model_validator(mode="after")
    def check_entries(self) -> "EventTimeline":
        labels = [e.label for e in self.entries]
        if len(set(labels)) != len(labels):
            raise ValueError(f"labels must be unique, got {labels}")
        for previous, current in zip(self.entries, self.entries[1:]):
            if current.ts <= previous.ts:
                raise ValueError(
                    f"timestamps must be strictly increasing, event "
                    f"`{current.label}` is not after `{previous.label}`"
                )
        return self

    @classmethod
    def load(cls, path: ValidPath) -> "EventTimeline":
        path = Path(path)
        try:
            return cls.model_validate_json(path.read_text())
        except pydantic.ValidationError as err:
            raise InvalidConfig(str(path), _problems(err)) from err

    @classmethod
    def ftx(cls) -> "EventTimeline":
        return cls.load(TIMELINE_FILE)

    def labels_between(self, ts_start: int, ts_end: int) -> List[str]:
        return [e.label for e in self.entries if ts_start <= e.ts < ts_end]


class RunConfig(pydantic.BaseModel):
    """Every parameter of a pipeline run. The config is echoed in the manifest.

    Timestamps accept milliseconds or dates (`"2022-01-01"`, read as UTC).
    """

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid")

    candle_store: Path
    trade_store: Optional[Path] = None
    symbols: List[str] = pydantic.Field(min_length=1)
    quote: Optional[str] = None
    ts_start: int
    ts_end: int
    interval: Interval = Interval.HOUR
    return_kind: ReturnKind = ReturnKind.LOG
    window: int = pydantic.Field(DEFAULT_WINDOW, ge=2)
    step: int = pydantic.Field(DEFAULT_STEP, ge=1)
    centrality_window: Optional[int] = pydantic.Field(None, ge=2)
    theta: Optional[float] = pydantic.Field(None, gt=0)
    transform: SimilarityTransform = SimilarityTransform.SQUARE
    binary_adjacency: bool = False
    bucket: Bucket = Bucket.MINUTE
    dense_imbalance: bool = False
    focus: List[str] = []
    bhr_start: Optional[int] = None
    bhr_end: Optional[int] = None
    band_percentiles: Tuple[float, ...] = BAND_PERCENTILES
    summary_percentiles: Tuple[float, ...] = SUMMARY_PERCENTILES
    output_dir: Path = Path("output")
    write_correlations: bool = False
    write_graphs: bool = False

    @pydantic.field_validator(
        "ts_start", "ts_end", "bhr_start", "bhr_end", mode="before"
    )
    @classmethod
    def parse_timestamps(cls, value):
        return None if value is None else _parse_timestamp(value)

    @pydantic.field_validator("candle_store", "trade_store")
    @classmethod
    def check_exists(cls, value: Optional[Path]):
        if value is not None and not value.exists():
            raise ValueError(f"`{value}` does not exist")
        return value

    @pydantic.field_validator("band_percentiles")
    @classmethod
    def check_bands(cls, value):
        if tuple(value) != BAND_PERCENTILES:
            raise ValueError(f"only {BAND_PERCENTILES} are supported")
        return value

    @pydantic.field_validator("summary_percentiles")
    @classmethod
    def check_summary(cls, value):
        if tuple(value) != SUMMARY_PERCENTILES:
            raise ValueError(f"only {SUMMARY_PERCENTILES} are supported")
        return value

    @pydantic.model_validator(mode="after")
    def check_range(self) -> "RunConfig":
        if self.ts_start >= self.ts_end:
            raise ValueError("ts_start must be strictly before ts_end")
        return self

    @classmethod
    def create(cls, source: str = "arguments", **kwargs) -> "RunConfig":
        try:
            return cls(**kwargs)
        except pydantic.ValidationError as err:
            raise InvalidConfig(source, _problems(err)) from err

    @classmethod
    def load(cls, path: ValidPath, **overrides) -> "RunConfig":
        path = Path(path)
        try:
            values = json.loads(path.read_text())
        except (OSError, ValueError) as err:
            raise InvalidConfig(str(path), [str(err)]) from err
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.create(str(path), **values)

    @property
    def effective_theta(self) -> float:
        return default_theta(self.window) if self.theta is None else self.theta

    @property
    def effective_centrality_window(self) -> int:
        return self.centrality_window or self.window

    def echo(self) -> Dict[str, Any]:
        result = self.model_dump(mode="json")
        result["theta"] = self.effective_theta
        result["centrality_window"] = self.effective_centrality_window
        result["range"] = [format_timestamp(t) for t in (self.ts_start, self.ts_end)]
        return result


class RunManifest(pydantic.BaseModel):
    """Hashes of every input and output of a run. No wall-clock time is recorded,
    so two runs on identical inputs write identical manifests."""

    config: Dict[str, Any]
    inputs: Dict[str, str]
    outputs: Dict[str, str]
    versions: Dict[str, str]

    def write(self, path: ValidPath) -> Path:
        path = Path(path)
        path.write_text(
            json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"
        )
        return path
