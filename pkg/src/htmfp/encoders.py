"""Scalar and date-time encoders producing fixed-sparsity SDRs."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sdr import SDR, concat


class EncoderConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScalarEncoderConfig:
    min: float
    max: float
    buckets: int = 130
    w: int = 21

    def __post_init__(self):
        if not (math.isfinite(self.min) and math.isfinite(self.max)) or self.min >= self.max:
            raise EncoderConfigError(f"need finite min < max, got [{self.min}, {self.max}]")
        if self.w < 1 or self.w % 2 == 0:
            raise EncoderConfigError(f"w must be an odd positive integer, got {self.w}")
        if self.buckets < 1:
            raise EncoderConfigError(f"buckets must be positive, got {self.buckets}")

    @property
    def size(self) -> int:
        return self.buckets + self.w - 1


@dataclass(frozen=True)
class DateTimeEncoderConfig:
    """Circular time-of-day field followed by a day-of-week field.

    ``tod_buckets`` splits the day into equal slots (48 -> 30 minutes each);
    the time-of-day field wraps, so the last slot of a day sits next to the
    first.  Each weekday owns a disjoint block of ``dow_w`` bits.
    """

    tod_buckets: int = 48
    tod_w: int = 11
    dow_w: int = 7

    def __post_init__(self):
        if self.tod_buckets < 1 or self.tod_w < 1 or self.dow_w < 1:
            raise EncoderConfigError("date-time encoder sizes must be positive")
        if self.tod_w > self.tod_buckets:
            raise EncoderConfigError("tod_w cannot exceed tod_buckets")

    @property
    def tod_size(self) -> int:
        return self.tod_buckets

    @property
    def dow_size(self) -> int:
        return 7 * self.dow_w

    @property
    def size(self) -> int:
        return self.tod_size + self.dow_size

    @property
    def w(self) -> int:
        return self.tod_w + self.dow_w


def scalar_bucket(value: float, cfg: ScalarEncoderConfig) -> int:
    if not math.isfinite(value):
        raise ValueError(f"cannot encode non-finite value {value!r}")
    v = min(max(value, cfg.min), cfg.max)
    return int(math.floor((v - cfg.min) / (cfg.max - cfg.min) * (cfg.buckets - 1)))


def encode_scalar(value: float, cfg: ScalarEncoderConfig) -> SDR:
    start = scalar_bucket(value, cfg)
    return SDR(cfg.size, np.arange(start, start + cfg.w, dtype=np.int64), validate=False)


def time_fields(timestamp: float) -> tuple[int, int]:
    """Return (seconds into the UTC day, weekday with Monday = 0)."""
    days, seconds = divmod(int(math.floor(timestamp)), 86400)
    # 1970-01-01 was a Thursday
    return seconds, (days + 3) % 7


def encode_time_of_day(timestamp: float, cfg: DateTimeEncoderConfig) -> SDR:
    seconds, _ = time_fields(timestamp)
    bucket = seconds * cfg.tod_buckets // 86400
    idx = (bucket - cfg.tod_w // 2 + np.arange(cfg.tod_w)) % cfg.tod_buckets
    return SDR(cfg.tod_size, np.sort(idx).astype(np.int64), validate=False)


def encode_day_of_week(timestamp: float, cfg: DateTimeEncoderConfig) -> SDR:
    _, weekday = time_fields(timestamp)
    start = weekday * cfg.dow_w
    return SDR(cfg.dow_size, np.arange(start, start + cfg.dow_w, dtype=np.int64), validate=False)


def encode_datetime(timestamp: float, cfg: DateTimeEncoderConfig | None = None) -> SDR:
    cfg = cfg or DateTimeEncoderConfig()
    return concat([encode_time_of_day(timestamp, cfg), encode_day_of_week(timestamp, cfg)])


@dataclass(frozen=True)
class KpiEncoder:
    """Encoder for one KPI stream: scalar value followed by its timestamp."""

    scalar: ScalarEncoderConfig
    datetime: DateTimeEncoderConfig = DateTimeEncoderConfig()

    @property
    def size(self) -> int:
        return self.scalar.size + self.datetime.size

    def encode(self, timestamp: float, value: float) -> SDR:
        return concat([encode_scalar(value, self.scalar), encode_datetime(timestamp, self.datetime)])
