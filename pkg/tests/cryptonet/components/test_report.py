import json

import pandas as pd
import pytest

from cryptonet import CryptonetClient
from cryptonet.components.report.models import EventTimeline, RunConfig
from cryptonet.exceptions import (
    FocusMissing,
    InvalidConfig,
    SchemaError,
    StageError,
    ValidationError,
)
from cryptonet.test_utils import START, random_trades
from cryptonet.utils import HOUR_MS, read_csv, to_timestamp_ms, write_csv

CORE_OUTPUTS = [
    "average_correlation.csv",
    "bhr.csv",
    "bhr_summary.json",
    "centrality.csv",
    "centrality_bands.csv",
    "rescaled_prices.csv",
]


def test_run_writes_every_output(client, run_kwargs):
    manifest = client.run(RunConfig.create(**run_kwargs))
    out = run_kwargs["output_dir"]

    assert sorted(manifest.outputs) == CORE_OUTPUTS
    assert sorted(p.name for p in out.iterdir()) == sorted(
        CORE_OUTPUTS + ["manifest.json"]
    )
    assert list(manifest.inputs) == [str(run_kwargs["candle_store"])]
    assert manifest.config["theta"] == 8.0
    assert manifest.config["centrality_window"] == 24
    assert set(manifest.versions) >= {"cryptonet", "numpy", "pandas", "networkx"}

    on_disk = json.loads((out / "manifest.json").read_text())
    assert on_disk["outputs"] == manifest.outputs

    centrality = read_csv(out / "centrality.csv")
    assert centrality.window_end_ts.nunique() == 2
    bands = read_csv(out / "centrality_bands.csv")
    assert len(bands) == 2
    correlation = read_csv(out / "average_correlation.csv")
    assert list(correlation.columns) == ["ts", "market_mean", "S00"]
    assert len(correlation) == 71 - 23


def test_rerun_is_byte_identical(client, run_kwargs):
    config = RunConfig.create(**run_kwargs)
    out = run_kwargs["output_dir"]
    client.run(config)
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    client.run(config)
    second = {p.name: p.read_bytes() for p in out.iterdir()}
    assert first == second


def test_optional_outputs(client, run_kwargs, tmp_path):
    trade_store = tmp_path / "trades.csv"
    client.market_data.persist_trades(random_trades(200, seed=1), trade_store)
    config = RunConfig.create(
        **run_kwargs,
        trade_store=trade_store,
        write_graphs=True,
        write_correlations=True,
        bucket="hour",
    )
    manifest = client.run(config)

    extra = {"correlations.csv", "imbalance.csv", "tmfg_edges.csv", "tmfg_edges.json"}
    assert set(manifest.outputs) == set(CORE_OUTPUTS) | extra
    assert str(trade_store) in manifest.inputs

    imbalance = read_csv(run_kwargs["output_dir"] / "imbalance.csv")
    assert imbalance.bucket_start_ts.tolist() == [START + k * HOUR_MS for k in range(3)]
    edges = read_csv(run_kwargs["output_dir"] / "tmfg_edges.csv")
    assert len(edges) == (71 - 23) * (3 * 5 - 6)


def test_corrupted_store_halts_at_market_data(client, run_kwargs):
    store = run_kwargs["candle_store"]
    frame = read_csv(store, dtype={"symbol": str, "quote": str})
    frame.loc[1, "low"] = frame.loc[1, "high"] + 1
    write_csv(frame, store)

    with pytest.raises(StageError) as err:
        client.run(RunConfig.create(**run_kwargs))
    assert err.value.stage == "market-data"
    assert isinstance(err.value.cause, ValidationError)
    assert err.value.cause.row == 1
    assert err.value.exit_code == 3


def test_missing_focus_halts_at_centrality(client, run_kwargs):
    run_kwargs["focus"] = ["FTT"]
    with pytest.raises(StageError) as err:
        client.run(RunConfig.create(**run_kwargs))
    assert err.value.stage == "centrality"
    assert isinstance(err.value.cause, FocusMissing)
    assert err.value.exit_code == 3


@pytest.mark.parametrize(
    "changes",
    [
        dict(ts_end=START),
        dict(window=1),
        dict(symbols=[]),
        dict(theta=-1.0),
        dict(transform="cube"),
        dict(unknown_key=True),
        dict(band_percentiles=(10, 90)),
        dict(ts_start="yesterday-ish"),
    ],
)
def test_invalid_config(run_kwargs, changes):
    run_kwargs.update(changes)
    with pytest.raises(InvalidConfig) as err:
        RunConfig.create(**run_kwargs)
    assert err.value.exit_code == 2


def test_missing_candle_store(run_kwargs, tmp_path):
    run_kwargs["candle_store"] = tmp_path / "nowhere.csv"
    with pytest.raises(InvalidConfig, match="does not exist"):
        RunConfig.create(**run_kwargs)


def test_load_config_with_overrides(run_kwargs, tmp_path):
    path = tmp_path / "run.json"
    values = dict(run_kwargs, ts_start="2022-11-01", window=12)
    path.write_text(json.dumps(values, default=str))

    config = RunConfig.load(path, window=48, theta=None)
    assert config.window == 48
    assert config.ts_start == START
    assert config.theta is None
    assert config.effective_theta == 16.0


def test_load_invalid_json(tmp_path):
    path = tmp_path / "run.json"
    path.write_text("{not json")
    with pytest.raises(InvalidConfig):
        RunConfig.load(path)


def hourly_csv(path, first, n_rows, step=HOUR_MS, column="ts"):
    start = to_timestamp_ms(first)
    frame = pd.DataFrame(
        {column: [start + k * step for k in range(n_rows)], "value": range(n_rows)}
    )
    write_csv(frame, path)
    return path


def test_annotate_event_inside_an_hour(tmp_path):
    path = hourly_csv(tmp_path / "series.csv", "2022-11-06T13:00:00", 5)
    frame = CryptonetClient().annotate(path)

    assert frame.event.fillna("").tolist() == ["", "", "c", "", ""]
    written = read_csv(tmp_path / "series_annotated.csv", keep_default_na=False)
    assert written.event.tolist() == ["", "", "c", "", ""]


def test_annotate_several_events_in_a_bucket(tmp_path):
    day = 24 * HOUR_MS
    path = hourly_csv(
        tmp_path / "daily.csv", "2022-11-07", 3, step=day, column="window_end_ts"
    )
    frame = CryptonetClient().report.annotate(path, output_path=tmp_path / "a.csv")
    assert frame.event.tolist() == ["d", "e;f", "g"]


def test_annotate_with_own_timeline(tmp_path):
    timeline = EventTimeline(
        entries=[
            {"label": "a", "ts": START + 10},
            {"label": "b", "ts": START + 20},
        ]
    )
    path = hourly_csv(tmp_path / "series.csv", START, 1, column="bucket_start_ts")
    frame = CryptonetClient().annotate(path, timeline=timeline)
    assert frame.event.tolist() == ["a;b"]

    frame = CryptonetClient().annotate(path, timeline=timeline, bucket_ms=15)
    assert frame.event.tolist() == ["a"]


def test_annotate_without_events(tmp_path):
    path = hourly_csv(tmp_path / "series.csv", "2021-01-01", 3)
    frame = CryptonetClient().annotate(path)
    assert frame.event.tolist() == ["", "", ""]


def test_annotate_without_timestamps(tmp_path):
    path = tmp_path / "plain.csv"
    path.write_text("x,y\n1,2\n")
    with pytest.raises(SchemaError):
        CryptonetClient().annotate(path)


def test_bundled_timeline():
    timeline = CryptonetClient().report.load_timeline()
    assert [e.label for e in timeline.entries] == list("abcdefgh")
    assert timeline.entries[2].ts == to_timestamp_ms("2022-11-06T15:47:00")


@pytest.mark.parametrize(
    "entries",
    [
        [{"label": "a", "ts": 2}, {"label": "a", "ts": 3}],
        [{"label": "a", "ts": 3}, {"label": "b", "ts": 2}],
        [{"label": "A", "ts": 1}],
        [{"label": "i", "ts": 1}],
        [{"label": "a", "ts": "not a date"}],
    ],
)
def test_invalid_timeline(tmp_path, entries):
    path = tmp_path / "timeline.json"
    path.write_text(json.dumps({"entries": entries}))
    with pytest.raises(InvalidConfig):
        CryptonetClient().report.load_timeline(path)
