import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from htmfp.testbed import PATTERNS, FAULT_TYPES, FaultSpec, ScenarioConfig, run_scenario
from htmfp.traceio import (GroundTruth, TraceFormatError, format_scenario, iso, loaded,
                           parse_iso, parse_scenario, ranges_for, read_scenario, read_trace,
                           read_truth, truth_of, write_trace, write_truth)


def faulty_trace():
    cfg = ScenarioConfig(seed=4, start_tick=600, duration=400, preroll=60, name="leak",
                         fault=FaultSpec("memory_leak", "constant", start=90, magnitude=8.0))
    return run_scenario(cfg)


def test_iso_round_trip():
    for ts in (1609718400.0, 1609718400.0 + 60 * 12345):
        assert parse_iso(iso(ts)) == ts
    assert iso(1609718400.0) == "2021-01-04T00:00:00Z"
    assert parse_iso("2021-01-04T00:00:00") == parse_iso("2021-01-04T00:00:00+00:00")


def test_trace_round_trip(tmp_path):
    trace = faulty_trace()
    data, truth = write_trace(trace, tmp_path)
    back = read_trace(data)
    assert back.name == "leak"
    assert back.columns == trace.columns
    assert np.array_equal(back.values, trace.values)
    assert np.array_equal(back.timestamps, trace.timestamps)
    assert back.truth == truth_of(trace)
    assert back.truth.failure == trace.failure is not None
    assert back.truth == loaded(trace).truth


def test_truth_round_trip(tmp_path):
    truth = GroundTruth(360, {"type": "packet_loss", "pattern": "random", "target": "bono"},
                        [390, 401, 433], None)
    path = tmp_path / "t.csv"
    write_truth(truth, path)
    assert read_truth(path) == truth
    assert path.read_text().splitlines()[0] == "tick,event,detail"


def test_clean_truth_round_trip(tmp_path):
    path = tmp_path / "c.csv"
    write_truth(GroundTruth(120), path)
    back = read_truth(path)
    assert back == GroundTruth(120) and not back.faulty


def test_unknown_truth_event(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("tick,event,detail\n3,reboot,\n")
    with pytest.raises(TraceFormatError):
        read_truth(path)


def test_malformed_trace_files(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("time,a.cpu\n")
    with pytest.raises(TraceFormatError):
        read_trace(bad)
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("timestamp,bono.cpu\n2021-01-04T00:00:00Z,1.0,2.0\n")
    with pytest.raises(TraceFormatError):
        read_trace(ragged)


def test_ranges_for_known_and_unknown_columns():
    r = ranges_for(["bono.cpu", "bono.mem", "bono.net", "bono.requests", "bono.success"])
    assert r["bono.cpu"] == (0.0, 100.0)
    with pytest.raises(TraceFormatError):
        ranges_for(["bono.disk"])


scenarios = st.builds(
    ScenarioConfig,
    seed=st.integers(0, 10**6), workload_seed=st.integers(0, 10**6),
    start_tick=st.integers(0, 10**6), duration=st.integers(10, 5000), preroll=st.just(5),
    resources=st.integers(3, 6), kpis_per_resource=st.integers(5, 25),
    fault=st.none() | st.builds(FaultSpec, type=st.sampled_from(["cpu_hog", "memory_leak"]),
                                pattern=st.sampled_from(PATTERNS), start=st.integers(0, 100),
                                magnitude=st.none() | st.floats(0, 50, allow_nan=False),
                                period=st.integers(1, 60), ratio=st.floats(0.05, 0.95)),
    name=st.from_regex(r"[a-z][a-z0-9_]{0,10}", fullmatch=True))


@given(scenarios)
@settings(max_examples=100, deadline=None)
def test_scenario_format_is_idempotent(cfg):
    text = format_scenario(cfg)
    parsed = parse_scenario(text)
    assert format_scenario(parsed) == text
    # explicit targets and magnitudes survive unchanged, defaults become explicit
    assert parsed.start_tick == cfg.start_tick and parsed.duration == cfg.duration
    if cfg.fault is not None:
        assert parsed.fault.resource == cfg.fault.resource
        assert parsed.fault.effect == cfg.fault.effect


def test_every_fault_type_formats():
    for ftype in FAULT_TYPES:
        cfg = ScenarioConfig(fault=FaultSpec(ftype, "constant", 0))
        assert format_scenario(parse_scenario(format_scenario(cfg))) == format_scenario(cfg)


def test_scenario_file(tmp_path):
    path = tmp_path / "demo.scenario"
    path.write_text("# demo\nseed = 3\nduration = 90   # rows\nfault.type = cpu_hog\n"
                    "fault.pattern = exponential\nfault.start = 10\n")
    cfg = read_scenario(path)
    assert cfg.name == "demo" and cfg.seed == 3 and cfg.duration == 90
    assert cfg.fault.type == "cpu_hog" and cfg.fault.effect == 8.0


@pytest.mark.parametrize("text", ["seed 3", "colour = red", "fault.type = cpu_hog",
                                  "start = 2020-01-01T00:00:00Z",
                                  "fault.type = cpu_hog\nfault.pattern = random\nfault.start = 0\n"
                                  "fault.colour = red"])
def test_bad_scenarios(text):
    with pytest.raises(TraceFormatError):
        parse_scenario(text)


def test_bundled_scenario_matches_campaign_defaults():
    from pathlib import Path

    from htmfp.testbed import DEFAULT_MAGNITUDE, campaign_scenarios

    path = Path(__file__).parents[1] / "scenarios" / "cpu_hog_constant.scenario"
    cfg = read_scenario(path)
    assert format_scenario(cfg) == format_scenario(campaign_scenarios(0)[2])
    assert cfg.fault.effect == DEFAULT_MAGNITUDE["cpu_hog"]
    for ftype, value in DEFAULT_MAGNITUDE.items():
        assert f"{ftype} " in path.read_text() and f"{value}" in path.read_text()
