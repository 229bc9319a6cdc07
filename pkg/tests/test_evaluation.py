import re

import pytest
from hypothesis import given, settings, strategies as st

from htmfp import evaluation as ev
from htmfp.global_prediction import SINGLE, VOTE
from htmfp.testbed import FailureEvent
from htmfp.traceio import GroundTruth

FAULTY = GroundTruth(360, {"type": "cpu_hog", "pattern": "constant", "target": "sprout"},
                     [390], FailureEvent(500, "qos"))
CLEAN = GroundTruth(360)


def test_enumerate_configs():
    configs = ev.enumerate_configs()
    assert len(configs) == len(set(configs)) == 72
    assert sum(c.strategy == SINGLE for c in configs) == 48
    assert sum(c.strategy == VOTE for c in configs) == 24
    assert ev.SweepConfig(VOTE, 0.9, 1, 1) in configs
    assert ev.SweepConfig(SINGLE, 0.95, 2, 2) in configs
    assert {c.k for c in configs if c.strategy == SINGLE} == set(range(1, 7))
    assert {c.k for c in configs if c.strategy == VOTE} == {1, 2, 3}


def test_sweep_config_validation():
    with pytest.raises(ValueError):
        ev.SweepConfig("any", 0.9, 1, 1)
    with pytest.raises(ValueError):
        ev.SweepConfig(VOTE, 0.9, 0, 1)


def test_metric_examples():
    p, r, f = ev.metrics(11, 6, 1)
    assert (round(p, 3), round(r, 3), round(f, 3)) == (0.647, 0.917, 0.759)
    assert ev.metrics(0, 0, 12) == (0.0, 0.0, 0.0)
    assert ev.metrics(12, 0, 0) == (1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        ev.metrics(-1, 0, 0)


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_f_measure_between_precision_and_recall(tp, fp, fn):
    p, r, f = ev.metrics(tp, fp, fn)
    if p > 0 and r > 0:
        assert min(p, r) - 1e-12 <= f <= max(p, r) + 1e-12
    else:
        assert f == 0.0


def test_lead_time_examples():
    assert ev.lead_time(100, 154) == 54
    assert ev.lead_time(153, 154) == 1
    assert ev.lead_time(100, 154, tick_minutes=5.0) == 270
    with pytest.raises(ValueError):
        ev.lead_time(154, 154)


def test_evaluate_run_uses_first_prediction_before_failure():
    o = ev.evaluate_run([600, 420, 450], FAULTY, "r")
    assert o.predicted and o.first_prediction == 420 and o.lead_min == 80


def test_prediction_at_failure_tick_is_a_miss():
    o = ev.evaluate_run([500, 501], FAULTY)
    assert not o.predicted and o.lead_min is None and o.failure_tick == 500


def test_clean_runs():
    assert not ev.evaluate_run([], CLEAN).predicted
    o = ev.evaluate_run([400], CLEAN)
    assert o.predicted and o.lead_min is None and not o.faulty


def test_faulty_run_without_failure_is_a_data_error():
    broken = GroundTruth(0, {"type": "cpu_hog"}, [], None)
    with pytest.raises(ev.GroundTruthError):
        ev.evaluate_run([1], broken)


def outcomes_for(tp, fn, fp, tn, fault="cpu_hog"):
    out = [ev.RunOutcome(f"f{i}", fault, True, 10, 20, 10.0) for i in range(tp)]
    out += [ev.RunOutcome(f"m{i}", fault, False, None, 20, None) for i in range(fn)]
    out += [ev.RunOutcome(f"c{i}", "", True, 5, None, None) for i in range(fp)]
    out += [ev.RunOutcome(f"q{i}", "", False, None, None, None) for i in range(tn)]
    return out


def test_run_level_scoring():
    rep = ev.score(ev.SweepConfig(VOTE, 0.9, 1, 1), outcomes_for(11, 1, 6, 6))
    assert (rep.tp, rep.fp, rep.fn) == (11, 6, 1)
    assert rep.f_measure == pytest.approx(0.7586, abs=5e-4)
    assert rep.median_lead == 10.0


def test_report_row_format():
    rep = ev.score(ev.SweepConfig(SINGLE, 0.85, 2, 4), outcomes_for(3, 1, 1, 3))
    assert rep.row() == ["single_resource", "0.85", "2", "4", "3", "1", "1", "0.750000",
                         "0.750000", "0.750000", "10.0"]
    empty = ev.score(ev.SweepConfig(SINGLE, 0.85, 2, 4), outcomes_for(0, 2, 0, 2))
    assert empty.row()[-1] == ""


def test_median_of_reported_range():
    outs = [ev.RunOutcome(str(i), "packet_loss", True, 0, 0, lead) for i, lead in
            enumerate([4.0, 54.0, 159.0])]
    assert ev.per_fault_report(outs)[2].median_lead == 54.0


def test_per_fault_report():
    outs = outcomes_for(3, 1, 2, 0, "cpu_hog") + outcomes_for(1, 1, 0, 0, "excessive_workload")
    rows = {r.fault_type: r for r in ev.per_fault_report(outs)}
    assert [r for r in rows] == list(ev.FAULT_ORDER)
    assert rows["cpu_hog"].recall == 0.75 and rows["cpu_hog"].count == 4
    assert rows["memory_leak"].count == 0 and rows["memory_leak"].recall == 0.0
    assert rows["memory_leak"].median_lead is None
    text = ev.format_fault_table(list(rows.values()))
    assert re.search(r"CPU Hog\s+0\.75\s+10 min\s+0\.74\s+134 min", text)
    assert re.search(r"Excessive Workload\s+0\.50\s+10 min\s+0\.52\s+15 min", text)


def test_reference_rows():
    assert ev.REFERENCE_FAULT_TABLE["cpu_hog"] == (0.74, 134.0)
    assert ev.REFERENCE_FAULT_TABLE["excessive_workload"] == (0.52, 15.0)


def test_report_csv_round_trip(tmp_path):
    configs = ev.enumerate_configs()
    reports = [ev.score(c, outcomes_for(i % 5, 1, i % 3, 2)) for i, c in enumerate(configs)]
    text = ev.report_csv(reports)
    assert text.splitlines()[0] == ",".join(ev.REPORT_COLUMNS)
    assert len(text.splitlines()) == 73
    path = tmp_path / "r.csv"
    path.write_text(text)
    assert ev.report_csv(ev.read_report_csv(path)) == text


def test_outcomes_csv_round_trip(tmp_path):
    c1, c2 = ev.SweepConfig(VOTE, 0.9, 1, 2), ev.SweepConfig(SINGLE, 0.8, 1, 3)
    result = ev.SweepResult([], {c1: outcomes_for(2, 1, 1, 1), c2: outcomes_for(1, 0, 0, 2)})
    path = tmp_path / "o.csv"
    path.write_text(ev.outcomes_csv(result))
    back = ev.read_outcomes_csv(path)
    assert back[c1] == result.outcomes[c1]
    assert back[c2] == result.outcomes[c2]


def test_epsilon_aggregates():
    configs = ev.enumerate_configs()
    reports = [ev.score(c, outcomes_for(2, 2, 1, 3)) for c in configs]
    agg = ev.epsilon_aggregates(reports)
    assert len(agg) == 8
    assert {a["configs"] for a in agg if a["strategy"] == SINGLE} == {12}
    assert {a["configs"] for a in agg if a["strategy"] == VOTE} == {6}
    assert agg[0]["precision"] == pytest.approx(2 / 3)


def test_flag_counts_csv(tmp_path):
    path = tmp_path / "f.csv"
    path.write_text(ev.flag_counts_csv({0.9: 3, 0.8: 10}))
    assert ev.read_flag_counts_csv(path) == {0.8: 10, 0.9: 3}
