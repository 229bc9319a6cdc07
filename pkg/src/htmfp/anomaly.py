"""Per-KPI anomaly detection on top of an HTM region.

Each tick the detector compares the column activation it just observed with
the prediction made on the previous tick (the raw score), keeps a rolling
window of raw scores, and turns the gap between the short-term and long-term
mean into a likelihood through the Gaussian tail.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .encoders import DateTimeEncoderConfig, KpiEncoder, ScalarEncoderConfig
from .sdr import SDR, SDRError, overlap
from .spatial_pooler import SpatialPooler, SpatialPoolerParams
from .temporal_memory import TemporalMemory, TemporalMemoryParams


class TimestampError(ValueError):
    pass


@dataclass(frozen=True)
class LikelihoodConfig:
    window: int = 288
    short_window: int = 10
    epsilon: float = 0.9
    sigma_floor: float = 0.05
    # "literal" flags when likelihood <= 1 - epsilon instead of likelihood >= epsilon
    rule: str = "upper"

    def __post_init__(self):
        if not 1 <= self.short_window < self.window:
            raise ValueError("need 1 <= short_window < window")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.sigma_floor <= 0:
            raise ValueError("sigma_floor must be positive")
        if self.rule not in ("upper", "literal"):
            raise ValueError(f"unknown threshold rule {self.rule!r}")


@dataclass(frozen=True)
class AnomalyVerdict:
    timestamp: float
    kpi: str
    raw_score: float
    likelihood: float
    flag: bool


def raw_anomaly_score(prediction: SDR, actual: SDR) -> float:
    """One minus the fraction of active bits that were predicted."""
    if prediction.size != actual.size:
        raise SDRError(f"size mismatch: {prediction.size} vs {actual.size}")
    if len(actual) == 0:
        raise SDRError("raw score is undefined for an empty actual SDR")
    return 1.0 - overlap(prediction, actual) / len(actual)


def gaussian_tail(z: float) -> float:
    """Q(z) = P(N(0,1) > z)."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def anomaly_likelihood(window, short_window, sigma_floor: float = 1e-6) -> float:
    """Likelihood that the recent scores sit above the long-run score level.

    ``window`` holds the last W raw scores and ``short_window`` the last
    Wshort of them, both ending with the current score.  The spread uses the
    sample variance with a floor so a flat history cannot divide by zero.
    """
    values = np.asarray(window, dtype=np.float64)
    short = np.asarray(short_window, dtype=np.float64)
    if values.size == 0 or short.size == 0:
        raise ValueError("likelihood needs non-empty windows")
    # shift by one sample so identical windows give exactly zero deviation
    shift = values[0]
    d = values - shift
    mean_d = d.mean()
    sigma = math.sqrt(((d - mean_d) ** 2).sum() / (d.size - 1)) if d.size > 1 else 0.0
    sigma = max(sigma, sigma_floor)
    z = ((short - shift).mean() - mean_d) / sigma
    return 1.0 - gaussian_tail(z)


def is_anomalous(likelihood: float, epsilon: float, rule: str = "upper") -> bool:
    if rule == "literal":
        return likelihood <= 1.0 - epsilon
    return likelihood >= epsilon


@dataclass
class DetectorParams:
    sp: SpatialPoolerParams = field(default_factory=SpatialPoolerParams)
    tm: TemporalMemoryParams = field(default_factory=TemporalMemoryParams)
    likelihood: LikelihoodConfig = field(default_factory=LikelihoodConfig)


class AnomalyDetector:
    """Encoder + spatial pooler + temporal memory + likelihood for one KPI."""

    def __init__(self, kpi: str, encoder: KpiEncoder, params: DetectorParams | None = None,
                 seed: int = 0):
        self.kpi = kpi
        self.encoder = encoder
        self.params = params or DetectorParams()
        self.seed = seed
        self.sp = SpatialPooler(encoder.size, self.params.sp, seed=seed)
        self.tm = TemporalMemory(self.params.sp.num_columns, self.params.tm, seed=seed + 1)
        self.prediction = SDR(self.params.sp.num_columns, np.empty(0, np.int64), validate=False)
        self.scores: deque[float] = deque(maxlen=self.params.likelihood.window)
        self.ticks = 0
        self.last_timestamp: float | None = None

    def step(self, timestamp: float, value: float, learn: bool = True) -> AnomalyVerdict:
        if self.last_timestamp is not None and timestamp <= self.last_timestamp:
            raise TimestampError(
                f"{self.kpi}: timestamp {timestamp} does not follow {self.last_timestamp}")
        cfg = self.params.likelihood
        columns = self.sp.compute(self.encoder.encode(timestamp, value), learn)
        score = raw_anomaly_score(self.prediction, columns)
        self.prediction = self.tm.compute(columns, learn)
        self.scores.append(score)
        self.ticks += 1
        self.last_timestamp = timestamp
        window = np.fromiter(self.scores, dtype=np.float64, count=len(self.scores))
        likelihood = anomaly_likelihood(window, window[-cfg.short_window:], cfg.sigma_floor)
        warm = self.ticks > cfg.window
        flag = warm and is_anomalous(likelihood, cfg.epsilon, cfg.rule)
        return AnomalyVerdict(timestamp, self.kpi, score, likelihood, flag)

    @property
    def warmed_up(self) -> bool:
        return self.ticks > self.params.likelihood.window

    # -- persistence -----------------------------------------------------
    def state_dict(self) -> dict:
        lk = self.params.likelihood
        sc = self.encoder.scalar
        dt = self.encoder.datetime
        out = {
            "kpi": np.array(self.kpi),
            "seed": np.int64(self.seed),
            "encoder": np.array([sc.min, sc.max, sc.buckets, sc.w, dt.tod_buckets, dt.tod_w,
                                 dt.dow_w], dtype=np.float64),
            "likelihood": np.array([lk.window, lk.short_window, lk.epsilon, lk.sigma_floor]),
            "rule": np.array(lk.rule),
            "prediction": self.prediction.active,
            "scores": np.array(self.scores, dtype=np.float64),
            "ticks": np.int64(self.ticks),
            "last_timestamp": np.float64(np.nan if self.last_timestamp is None
                                         else self.last_timestamp),
        }
        out.update({"sp." + k: v for k, v in self.sp.state_dict().items()})
        out.update({"tm." + k: v for k, v in self.tm.state_dict().items()})
        return out

    @classmethod
    def from_state(cls, state: dict) -> "AnomalyDetector":
        e = state["encoder"]
        encoder = KpiEncoder(ScalarEncoderConfig(float(e[0]), float(e[1]), int(e[2]), int(e[3])),
                             DateTimeEncoderConfig(int(e[4]), int(e[5]), int(e[6])))
        lk = state["likelihood"]
        det = cls.__new__(cls)
        det.kpi = str(state["kpi"])
        det.seed = int(state["seed"])
        det.encoder = encoder
        det.sp = SpatialPooler.from_state({k[3:]: v for k, v in state.items() if k.startswith("sp.")})
        det.tm = TemporalMemory.from_state({k[3:]: v for k, v in state.items() if k.startswith("tm.")})
        det.params = DetectorParams(
            det.sp.params, det.tm.params,
            LikelihoodConfig(int(lk[0]), int(lk[1]), float(lk[2]), float(lk[3]), str(state["rule"])))
        det.prediction = SDR(det.sp.num_columns, np.array(state["prediction"], dtype=np.int64),
                             validate=False)
        det.scores = deque(np.asarray(state["scores"]).tolist(), maxlen=det.params.likelihood.window)
        det.ticks = int(state["ticks"])
        ts = float(state["last_timestamp"])
        det.last_timestamp = None if math.isnan(ts) else ts
        return det
