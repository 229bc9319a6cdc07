import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from htmfp.anomaly import (AnomalyDetector, DetectorParams, LikelihoodConfig, TimestampError,
                           anomaly_likelihood, gaussian_tail, is_anomalous, raw_anomaly_score)
from htmfp.encoders import KpiEncoder, ScalarEncoderConfig
from htmfp.sdr import SDR, SDRError
from htmfp.testbed import EPOCH


def oracle_likelihood(window, short, floor):
    sigma = max(statistics.stdev(window), floor)
    z = (statistics.fmean(short) - statistics.fmean(window)) / sigma
    return statistics.NormalDist().cdf(z)


# -- raw score -----------------------------------------------------------
def test_raw_score_examples():
    a = SDR(40, range(10))
    assert raw_anomaly_score(a, a) == 0.0
    assert raw_anomaly_score(SDR(40, range(20, 30)), a) == 1.0
    assert raw_anomaly_score(SDR(40, range(5, 15)), a) == 0.5


def test_raw_score_errors():
    with pytest.raises(SDRError):
        raw_anomaly_score(SDR(10, [1]), SDR(10, []))
    with pytest.raises(SDRError):
        raw_anomaly_score(SDR(10, [1]), SDR(11, [1]))


# -- likelihood ----------------------------------------------------------
def test_likelihood_tenths_example():
    # frozen from the statistics oracle: last 8 of 0.0..0.9, short window = last 2
    values = [0.1 * i for i in range(10)][-8:]
    got = anomaly_likelihood(values, values[-2:])
    assert got == pytest.approx(oracle_likelihood(values, values[-2:], 1e-6), abs=1e-9)
    assert got == pytest.approx(0.8896643190, abs=1e-9)


@pytest.mark.parametrize("value", [0.0, 0.1, 0.3, 0.7, 1.0, 1 / 3])
def test_constant_window_gives_one_half(value):
    window = [value] * 288
    assert anomaly_likelihood(window, window[-10:]) == 0.5
    assert anomaly_likelihood(window, window[-10:], sigma_floor=0.05) == 0.5


def test_five_sigma_spike():
    rng = np.random.default_rng(0)
    window = list(rng.normal(0.1, 0.01, 278)) + [0.9] * 10
    sigma = statistics.stdev(window)
    assert statistics.fmean(window[-10:]) - statistics.fmean(window) >= 5 * sigma
    assert anomaly_likelihood(window, window[-10:]) > 0.999


def test_sigma_floor_bounds_the_spread():
    window = [0.0] * 287 + [0.1]
    loose = anomaly_likelihood(window, window[-10:], sigma_floor=1e-6)
    floored = anomaly_likelihood(window, window[-10:], sigma_floor=0.05)
    assert floored < loose
    assert floored == pytest.approx(oracle_likelihood(window, window[-10:], 0.05), abs=1e-12)


@given(st.lists(st.floats(0, 1), min_size=2, max_size=300), st.integers(1, 20))
@settings(max_examples=200, deadline=None)
def test_likelihood_in_unit_interval(window, short):
    lk = anomaly_likelihood(window, window[-short:])
    assert 0.0 <= lk <= 1.0 and math.isfinite(lk)


def test_gaussian_tail():
    assert gaussian_tail(0.0) == 0.5
    assert gaussian_tail(5.0) < 3e-7
    assert gaussian_tail(-1.0) == pytest.approx(statistics.NormalDist().cdf(1.0), abs=1e-15)


def test_threshold_rules():
    assert is_anomalous(0.95, 0.9)
    assert not is_anomalous(0.5, 0.9)
    assert is_anomalous(0.9, 0.9)
    assert is_anomalous(0.05, 0.95, rule="literal")
    assert not is_anomalous(0.5, 0.9, rule="literal")


@pytest.mark.parametrize("kwargs", [dict(short_window=288), dict(epsilon=1.0),
                                    dict(sigma_floor=0.0), dict(rule="lower")])
def test_likelihood_config_validation(kwargs):
    with pytest.raises(ValueError):
        LikelihoodConfig(**kwargs)


# -- detector --------------------------------------------------------------
def detector(lo=0.0, hi=100.0, seed=0, **lk) -> AnomalyDetector:
    params = DetectorParams(likelihood=LikelihoodConfig(**lk)) if lk else None
    return AnomalyDetector("k", KpiEncoder(ScalarEncoderConfig(lo, hi)), params, seed=seed)


def test_first_tick():
    v = detector().step(EPOCH, 5.0)
    assert v.raw_score == 1.0
    assert not v.flag


def test_timestamps_must_increase():
    det = detector()
    det.step(EPOCH + 60, 1.0)
    with pytest.raises(TimestampError):
        det.step(EPOCH + 60, 1.0)


def test_warm_up_suppresses_flags():
    det = detector(window=20, short_window=5, epsilon=0.5)
    rng = np.random.default_rng(0)
    flags = [det.step(EPOCH + 60 * t, float(rng.uniform(0, 100))).flag for t in range(40)]
    assert not any(flags[:20])
    assert det.warmed_up


def test_window_never_exceeds_w():
    det = detector(window=30, short_window=5)
    for t in range(100):
        det.step(EPOCH + 60 * t, float(t % 7))
        assert len(det.scores) <= 30


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_constant_stream_never_flags(seed):
    det = detector(seed=seed)
    flags = [det.step(EPOCH + 60 * t, 42.0).flag for t in range(288 + 1000)]
    assert sum(flags[288:]) == 0


def test_step_change_on_daily_sinusoid_is_flagged():
    det = detector(-100.0, 100.0, epsilon=0.9)
    amp, day = 10.0, 1440
    for t in range(3 * day):
        det.step(EPOCH + 60 * t, amp * math.sin(2 * math.pi * t / day))
    flags = [det.step(EPOCH + 60 * t, 5 * amp + amp * math.sin(2 * math.pi * t / day)).flag
             for t in range(3 * day, 3 * day + 10)]
    assert any(flags)


def test_scores_stay_bounded_on_noise():
    det = detector()
    rng = np.random.default_rng(5)
    for t in range(600):
        v = det.step(EPOCH + 60 * t, float(rng.normal(50, 20)))
        assert 0.0 <= v.raw_score <= 1.0
        assert 0.0 <= v.likelihood <= 1.0


def test_state_round_trip_resumes_identically():
    det = detector(seed=4)
    rng = np.random.default_rng(1)
    values = rng.normal(50, 10, 500)
    for t in range(300):
        det.step(EPOCH + 60 * t, float(values[t]))
    clone = AnomalyDetector.from_state(det.state_dict())
    for t in range(300, 500):
        a = det.step(EPOCH + 60 * t, float(values[t]))
        b = clone.step(EPOCH + 60 * t, float(values[t]))
        assert a == b
