from datetime import datetime, timezone

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from htmfp.encoders import (DateTimeEncoderConfig, EncoderConfigError, KpiEncoder,
                            ScalarEncoderConfig, encode_datetime, encode_day_of_week,
                            encode_scalar, encode_time_of_day, scalar_bucket)
from htmfp.sdr import SDR, SDRError, concat, overlap


def ts(*args) -> float:
    return datetime(*args, tzinfo=timezone.utc).timestamp()


# -- SDR -----------------------------------------------------------------
def test_sdr_normalises_indices():
    s = SDR(10, [3, 1, 3])
    assert s.active.tolist() == [1, 3]
    assert len(s) == 2
    assert s.sparsity == pytest.approx(0.2)


@pytest.mark.parametrize("size,active", [(0, []), (5, [5]), (5, [-1])])
def test_sdr_rejects_bad_input(size, active):
    with pytest.raises(SDRError):
        SDR(size, active)


def test_sdr_dense_round_trip():
    s = SDR(12, [0, 4, 11])
    assert SDR.from_dense(s.dense()) == s


def test_concat_offsets_parts():
    joined = concat([SDR(4, [1]), SDR(3, [0, 2])])
    assert joined.size == 7
    assert joined.active.tolist() == [1, 4, 6]


def test_overlap_size_mismatch():
    with pytest.raises(SDRError):
        overlap(SDR(4, [1]), SDR(5, [1]))


# -- scalar encoder ----------------------------------------------------------
def test_scalar_defaults_give_150_bits():
    cfg = ScalarEncoderConfig(0.0, 100.0)
    assert cfg.size == 150
    assert len(encode_scalar(37.0, cfg)) == 21


def test_scalar_bucket_formula():
    cfg = ScalarEncoderConfig(0.0, 100.0)
    assert scalar_bucket(0.0, cfg) == 0
    assert scalar_bucket(100.0, cfg) == 129
    assert scalar_bucket(50.0, cfg) == int(np.floor(0.5 * 129))
    sdr = encode_scalar(50.0, cfg)
    assert sdr.active.tolist() == list(range(64, 85))


def test_scalar_clamps_out_of_range():
    cfg = ScalarEncoderConfig(0.0, 10.0)
    assert encode_scalar(-5.0, cfg) == encode_scalar(0.0, cfg)
    assert encode_scalar(1e9, cfg) == encode_scalar(10.0, cfg)


@pytest.mark.parametrize("kwargs", [dict(min=1.0, max=1.0), dict(min=0.0, max=1.0, w=4),
                                    dict(min=0.0, max=float("inf")), dict(min=0, max=1, buckets=0)])
def test_scalar_config_validation(kwargs):
    with pytest.raises(EncoderConfigError):
        ScalarEncoderConfig(**kwargs)


def test_scalar_rejects_nan():
    with pytest.raises(ValueError):
        encode_scalar(float("nan"), ScalarEncoderConfig(0.0, 1.0))


@given(st.floats(-50, 150, allow_nan=False), st.floats(-50, 150, allow_nan=False))
@settings(max_examples=200, deadline=None)
def test_scalar_fixed_sparsity_and_locality(a, b):
    cfg = ScalarEncoderConfig(0.0, 100.0)
    ea, eb = encode_scalar(a, cfg), encode_scalar(b, cfg)
    assert len(ea) == len(eb) == cfg.w
    assert ea.active[-1] - ea.active[0] == cfg.w - 1
    # nearby values share bits, far apart values share none
    gap = abs(scalar_bucket(a, cfg) - scalar_bucket(b, cfg))
    assert overlap(ea, eb) == max(0, cfg.w - gap)


# -- date-time encoder -------------------------------------------------------
def test_datetime_layout():
    cfg = DateTimeEncoderConfig()
    assert cfg.size == 48 + 49
    sdr = encode_datetime(ts(2021, 1, 4, 9, 15))
    assert len(sdr) == 11 + 7


def test_time_of_day_wraps_around_midnight():
    cfg = DateTimeEncoderConfig()
    late = encode_time_of_day(ts(2021, 1, 4, 23, 45), cfg)
    early = encode_time_of_day(ts(2021, 1, 5, 0, 5), cfg)
    assert overlap(late, early) == cfg.tod_w - 1
    assert 0 in late.active and 47 in early.active


def test_time_of_day_changes_every_half_hour():
    cfg = DateTimeEncoderConfig()
    a = encode_time_of_day(ts(2021, 1, 4, 10, 0), cfg)
    b = encode_time_of_day(ts(2021, 1, 4, 10, 29), cfg)
    c = encode_time_of_day(ts(2021, 1, 4, 10, 30), cfg)
    assert a == b
    assert overlap(a, c) == cfg.tod_w - 1


def test_day_of_week_blocks_are_disjoint():
    cfg = DateTimeEncoderConfig()
    days = [encode_day_of_week(ts(2021, 1, 4 + d, 12), cfg) for d in range(7)]
    assert days[0].active.tolist() == list(range(7))  # Monday first
    for i in range(7):
        for j in range(i + 1, 7):
            assert overlap(days[i], days[j]) == 0


def test_kpi_encoder_size_and_sparsity():
    enc = KpiEncoder(ScalarEncoderConfig(0.0, 100.0))
    assert enc.size == 247
    sdr = enc.encode(ts(2021, 1, 6, 8), 42.0)
    assert sdr.size == 247
    assert len(sdr) == 21 + 18


@given(st.integers(0, 10**9), st.floats(-1e3, 1e3, allow_nan=False))
@settings(max_examples=100, deadline=None)
def test_kpi_encoding_is_deterministic(seconds, value):
    enc = KpiEncoder(ScalarEncoderConfig(-10.0, 10.0))
    assert enc.encode(seconds, value) == enc.encode(seconds, value)
    assert len(enc.encode(seconds, value)) == 39
