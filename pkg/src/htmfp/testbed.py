"""Deterministic synthetic cloud testbed with injectable faults.

Six resources (named after the components of an IMS deployment) serve a
call workload with daily and weekly seasonality.  Each resource exposes five
core KPIs: cpu %, memory %, network throughput, request rate and the success
ratio of the calls it handles.  The system call success rate is the product
of the per-resource success ratios.  Failed calls are retried, so trouble in
one resource raises the load on all of them.

A run fails with a ``crash`` when any resource's memory reaches 100 % and
with a ``qos`` failure when system call success drops below 60 %.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone

import numpy as np

TICK_SECONDS = 60
RESOURCES = ("bono", "sprout", "homestead", "homer", "ralf", "ellis")
CORE_KPIS = ("cpu", "mem", "net", "requests", "success")
FAULT_TYPES = ("cpu_hog", "memory_leak", "packet_loss", "excessive_workload")
PATTERNS = ("constant", "exponential", "random")
QOS_THRESHOLD = 0.60

# Monday 2021-01-04 00:00 UTC; absolute tick 0 of every campaign clock
EPOCH = datetime(2021, 1, 4, tzinfo=timezone.utc).timestamp()

PEAK_RATE = 300.0  # calls/min at the weekday 09:00 peak
RETRY_GAIN = 4.0

# calibration constants: effect of one fault activation
DEFAULT_MAGNITUDE = {
    "cpu_hog": 8.0,             # cpu % added to the target, decaying afterwards
    "memory_leak": 5.0,          # memory % never reclaimed
    "packet_loss": 0.045,        # extra drop probability on the target
    "excessive_workload": 0.15,  # relative growth of the arrival rate
}
DEFAULT_TARGET = {
    "cpu_hog": "sprout",
    "memory_leak": "homestead",
    "packet_loss": "bono",
    "excessive_workload": "",
}
HOG_DECAY_TICKS = 120.0
SURGE_RAMP_TICKS = 20.0
HOG_TIMEOUT_SHARE = 0.5


@dataclass(frozen=True)
class ResourceProfile:
    fanout: float        # requests per call
    idle_cpu: float      # %
    cpu_per_req: float   # % per request/min
    mem_base: float      # %
    mem_load: float      # % at nominal peak load
    net_per_req: float   # kB/s per request/min
    base_error: float    # failure ratio in nominal conditions


def _profiles() -> dict[str, ResourceProfile]:
    spec = {
        # name: fanout, idle, peak cpu %, mem base, mem load, kB per req, error
        "bono": (1.0, 6.0, 52.0, 38.0, 12.0, 2.0, 0.0006),
        "sprout": (2.0, 8.0, 58.0, 42.0, 14.0, 1.2, 0.0008),
        "homestead": (0.6, 5.0, 40.0, 46.0, 10.0, 0.8, 0.0005),
        "homer": (0.3, 4.0, 28.0, 35.0, 8.0, 0.6, 0.0004),
        "ralf": (0.5, 4.0, 34.0, 33.0, 9.0, 0.5, 0.0004),
        "ellis": (0.05, 3.0, 12.0, 30.0, 4.0, 0.9, 0.0003),
    }
    out = {}
    for name, (fan, idle, peak_cpu, mb, ml, kb, err) in spec.items():
        out[name] = ResourceProfile(fan, idle, (peak_cpu - idle) / (PEAK_RATE * fan), mb, ml, kb, err)
    return out


PROFILES = _profiles()


def kpi_ranges(resource: str, kpis_per_resource: int = 5) -> dict[str, tuple[float, float]]:
    """Declared [min, max] range of every KPI a resource exposes."""
    p = PROFILES[resource]
    peak_req = PEAK_RATE * p.fanout
    out = {
        "cpu": (0.0, 100.0),
        "mem": (0.0, 100.0),
        "net": (0.0, 2.0 * peak_req * p.net_per_req),
        "requests": (0.0, 2.0 * peak_req),
        "success": (0.5, 1.0),  # encoder resolution where it matters; lower values clamp
    }
    for k in range(kpis_per_resource - len(CORE_KPIS)):
        out[f"aux{k:02d}"] = (0.0, 100.0)
    return out


def kpi_names(kpis_per_resource: int = 5) -> list[str]:
    return list(kpi_ranges(RESOURCES[0], kpis_per_resource))


# -- workload -------------------------------------------------------------
def _hash_normal(seed: int, ticks: np.ndarray) -> np.ndarray:
    """Standard normals that depend only on (seed, tick): splitmix64 + Box-Muller."""
    def mix(z):
        z = (z + np.uint64(0x9E3779B97F4A7C15))
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))

    with np.errstate(over="ignore"):
        t = np.asarray(ticks, dtype=np.int64).astype(np.uint64)
        base = mix(np.uint64(seed % 2**63) + t * np.uint64(2))
        u1 = (mix(base) >> np.uint64(11)).astype(np.float64) / 2.0**53
        u2 = (mix(base + np.uint64(1)) >> np.uint64(11)).astype(np.float64) / 2.0**53
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)


def diurnal_shape(hour: np.ndarray) -> np.ndarray:
    """Night trough, peaks at 09:00 and 19:00; 1.0 at the morning peak."""
    morning = np.exp(-0.5 * ((hour - 9.0) / 2.2) ** 2)
    evening = 0.9 * np.exp(-0.5 * ((hour - 19.0) / 2.2) ** 2)
    return 0.15 + 0.85 * np.minimum(morning + evening, 1.0)


WEEKDAY_FACTOR = np.array([1.0, 1.0, 1.0, 1.0, 0.97, 0.55, 0.5])


def gen_workload(tick, seed: int, noise: bool = True):
    """Arrival rate (calls/min) at absolute campaign tick(s)."""
    t = np.asarray(tick, dtype=np.int64)
    minutes = t * (TICK_SECONDS // 60)
    hour = (minutes % 1440) / 60.0
    day = (minutes // 1440) % 7  # tick 0 is a Monday
    rate = PEAK_RATE * WEEKDAY_FACTOR[day] * diurnal_shape(hour)
    if noise:
        rng = np.random.default_rng(seed)
        periods = rng.uniform(45.0, 240.0, size=3)
        phases = rng.uniform(0.0, 2 * np.pi, size=3)
        slow = sum(0.03 * np.sin(2 * np.pi * minutes / p + f) for p, f in zip(periods, phases))
        rate = rate * (1.0 + slow) * (1.0 + 0.03 * _hash_normal(seed, t))
    rate = np.maximum(rate, 1.0)
    return float(rate) if np.ndim(rate) == 0 else rate


# -- faults ---------------------------------------------------------------
@dataclass(frozen=True)
class FaultSpec:
    type: str
    pattern: str
    start: int
    target: str = ""
    magnitude: float | None = None
    period: int = 15        # constant gap; first gap of the exponential pattern
    ratio: float = 0.8      # exponential gap shrink factor

    def __post_init__(self):
        if self.type not in FAULT_TYPES:
            raise ValueError(f"unknown fault type {self.type!r}")
        if self.pattern not in PATTERNS:
            raise ValueError(f"unknown activation pattern {self.pattern!r}")
        if self.period < 1:
            raise ValueError("activation periods must be positive")
        if not 0.0 < self.ratio < 1.0:
            raise ValueError("exponential ratio must lie in (0, 1)")

    @property
    def effect(self) -> float:
        return DEFAULT_MAGNITUDE[self.type] if self.magnitude is None else self.magnitude

    @property
    def resource(self) -> str:
        return self.target or DEFAULT_TARGET[self.type]


def activation_schedule(spec: FaultSpec, duration: int, seed: int) -> list[int]:
    """Ticks in [spec.start, duration) at which the fault fires."""
    if spec.pattern == "constant":
        return list(range(spec.start, duration, spec.period))
    if spec.pattern == "exponential":
        ticks = []
        t, gap = spec.start, float(spec.period)
        while t < duration:
            ticks.append(t)
            t += max(1, int(round(gap)))
            gap *= spec.ratio
        return ticks
    count = len(range(spec.start, duration, spec.period))
    span = duration - spec.start
    if span <= 0 or count == 0:
        return []
    rng = np.random.default_rng([seed, 0xFA17])
    return sorted(int(x) for x in spec.start + rng.choice(span, size=min(count, span), replace=False))


# -- simulation -----------------------------------------------------------
@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    workload_seed: int = 0
    start_tick: int = 0         # absolute campaign tick of the first row
    duration: int = 1440        # rows, preroll included
    preroll: int = 0            # leading rows outside the observation window
    resources: int = 6
    kpis_per_resource: int = 5
    fault: FaultSpec | None = None
    name: str = "run"

    def __post_init__(self):
        if not 1 <= self.resources <= len(RESOURCES):
            raise ValueError(f"resources must lie in [1, {len(RESOURCES)}]")
        if self.kpis_per_resource < len(CORE_KPIS):
            raise ValueError(f"need at least {len(CORE_KPIS)} KPIs per resource")
        if self.duration < 1 or not 0 <= self.preroll < self.duration:
            raise ValueError("need duration >= 1 and 0 <= preroll < duration")


@dataclass(frozen=True)
class FailureEvent:
    tick: int
    kind: str       # "crash" or "qos"
    detail: str = ""


@dataclass
class ScenarioTrace:
    name: str
    timestamps: np.ndarray      # seconds since epoch, one per row
    columns: list[str]          # "resource.kpi"
    values: np.ndarray          # (rows, columns)
    observe_start: int = 0
    fault: FaultSpec | None = None
    activations: list[int] = field(default_factory=list)
    failure: FailureEvent | None = None
    ranges: dict[str, tuple[float, float]] = field(default_factory=dict)

    @property
    def resources(self) -> list[str]:
        seen = []
        for c in self.columns:
            r = c.split(".", 1)[0]
            if r not in seen:
                seen.append(r)
        return seen

    @property
    def faulty(self) -> bool:
        return self.fault is not None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]


def failure_oracle(mem, success) -> FailureEvent | None:
    """Failure verdict for one tick from per-resource memory % and success ratios."""
    mem = np.asarray(mem, dtype=np.float64)
    success = np.asarray(success, dtype=np.float64)
    full = np.flatnonzero(mem >= 100.0)
    if full.size:
        return FailureEvent(-1, "crash", str(int(full[0])))
    if float(np.prod(success)) < QOS_THRESHOLD:
        return FailureEvent(-1, "qos")
    return None


def first_failure(trace: ScenarioTrace) -> FailureEvent | None:
    """Scan a KPI matrix with the oracle; ticks before observe_start are included."""
    res = trace.resources
    mem = np.column_stack([trace.column(f"{r}.mem") for r in res])
    succ = np.column_stack([trace.column(f"{r}.success") for r in res])
    for t in range(len(trace.timestamps)):
        ev = failure_oracle(mem[t], succ[t])
        if ev is not None:
            detail = res[int(ev.detail)] if ev.kind == "crash" else ev.detail
            return FailureEvent(t, ev.kind, detail)
    return None


def _cpu_saturation(demand: np.ndarray) -> np.ndarray:
    # requests start timing out well before the core is pegged
    return 1.0 / (1.0 + np.exp((demand / 100.0 - 1.05) / 0.07))


def _memory_pressure(mem: np.ndarray) -> np.ndarray:
    over = np.clip((mem - 90.0) / 10.0, 0.0, 1.0)
    return 1.0 - 0.5 * over ** 2


@dataclass
class ResourceState:
    """Mutable fault effects and slow state for every resource."""

    n: int
    hog: np.ndarray = None
    leak: np.ndarray = None
    drop: np.ndarray = None
    load_ema: np.ndarray = None
    workload_mult: float = 1.0
    workload_target: float = 1.0
    success_prev: float = 1.0

    def __post_init__(self):
        self.hog = np.zeros(self.n)
        self.leak = np.zeros(self.n)
        self.drop = np.zeros(self.n)
        self.load_ema = np.full(self.n, 0.5)


def apply_activation(state: ResourceState, spec: FaultSpec, names: list[str]):
    if spec.type == "excessive_workload":
        state.workload_target *= 1.0 + spec.effect
        return
    i = names.index(spec.resource)
    if spec.type == "cpu_hog":
        state.hog[i] += spec.effect
    elif spec.type == "memory_leak":
        state.leak[i] += spec.effect
    elif spec.type == "packet_loss":
        state.drop[i] = 1.0 - (1.0 - state.drop[i]) * (1.0 - spec.effect)


def step_resources(state: ResourceState, arrivals: float, noise: np.ndarray,
                   profiles: list[ResourceProfile]) -> dict[str, np.ndarray]:
    """Advance one tick; ``noise`` is a (resources, 5) block of standard normals."""
    fan = np.array([p.fanout for p in profiles])
    # extra users join gradually rather than in one burst
    state.workload_mult += (state.workload_target - state.workload_mult) / SURGE_RAMP_TICKS
    calls = arrivals * state.workload_mult * (1.0 + RETRY_GAIN * (1.0 - state.success_prev))
    req = calls * fan * (1.0 + 0.02 * noise[:, 0])
    idle = np.array([p.idle_cpu for p in profiles])
    per_req = np.array([p.cpu_per_req for p in profiles])
    demand = idle + per_req * req + state.hog + 1.0 * noise[:, 1]
    peak_req = PEAK_RATE * fan
    state.load_ema += 0.02 * (req / peak_req - state.load_ema)
    mem_demand = (np.array([p.mem_base for p in profiles])
                  + np.array([p.mem_load for p in profiles]) * state.load_ema
                  + state.leak + 0.3 * noise[:, 2])
    err = np.clip(np.array([p.base_error for p in profiles]) * (1.0 + 0.5 * noise[:, 3]), 0.0, 0.01)
    # a competing cpu-bound process delays worker threads and some transactions time out
    contention = 1.0 - HOG_TIMEOUT_SHARE * np.minimum(state.hog, 100.0) / 100.0
    success = ((1.0 - state.drop) * _cpu_saturation(demand) * _memory_pressure(mem_demand)
               * contention * (1.0 - err))
    net = np.array([p.net_per_req for p in profiles]) * req * (1.0 - state.drop) \
        * (1.0 + 0.03 * noise[:, 4])
    state.hog *= math.exp(-1.0 / HOG_DECAY_TICKS)
    state.success_prev = float(np.prod(success))
    return {
        "cpu": np.clip(demand, 0.0, 100.0),
        "mem": np.clip(mem_demand, 0.0, 100.0),
        "net": np.maximum(net, 0.0),
        "requests": np.maximum(req, 0.0),
        "success": np.clip(success, 0.0, 1.0),
    }


def _aux_kpis(core: dict[str, np.ndarray], count: int, rng_noise: np.ndarray) -> list[np.ndarray]:
    """Extra KPIs for the full-scale mode: noisy mixtures of the core KPIs, in %."""
    out = []
    for k in range(count):
        base = (core["cpu"], core["mem"], 100.0 * core["success"])[k % 3]
        out.append(np.clip(0.5 * base + 10.0 + 2.0 * rng_noise[:, k], 0.0, 100.0))
    return out


def run_scenario(config: ScenarioConfig) -> ScenarioTrace:
    names = list(RESOURCES[: config.resources])
    profiles = [PROFILES[r] for r in names]
    kpis = kpi_names(config.kpis_per_resource)
    n_aux = config.kpis_per_resource - len(CORE_KPIS)
    columns = [f"{r}.{k}" for r in names for k in kpis]
    ranges = {f"{r}.{k}": v for r in names for k, v in kpi_ranges(r, config.kpis_per_resource).items()}

    spec = config.fault
    activations = activation_schedule(spec, config.duration, config.seed) if spec else []
    if spec is not None and spec.type != "excessive_workload" and spec.resource not in names:
        raise ValueError(f"fault target {spec.resource!r} is not among {names}")
    pending = {}
    for t in activations:
        pending[t] = pending.get(t, 0) + 1

    ticks = config.start_tick + np.arange(config.duration)
    arrivals = gen_workload(ticks, config.workload_seed)
    rng = np.random.default_rng(config.seed)
    state = ResourceState(len(names))
    rows = []
    failure = None
    for i in range(config.duration):
        for _ in range(pending.get(i, 0)):
            apply_activation(state, spec, names)
        noise = rng.standard_normal((len(names), len(CORE_KPIS) + n_aux))
        core = step_resources(state, float(arrivals[i]), noise, profiles)
        aux = _aux_kpis(core, n_aux, noise[:, len(CORE_KPIS):])
        block = np.column_stack([core[k] for k in CORE_KPIS] + aux)
        rows.append(block.reshape(-1))
        ev = failure_oracle(core["mem"], core["success"])
        if ev is not None:
            detail = names[int(ev.detail)] if ev.kind == "crash" else ""
            failure = FailureEvent(i, ev.kind, detail)
            break

    n = len(rows)
    return ScenarioTrace(
        name=config.name,
        timestamps=EPOCH + (config.start_tick + np.arange(n)) * float(TICK_SECONDS),
        columns=columns,
        values=np.array(rows),
        observe_start=config.preroll,
        fault=spec,
        activations=[t for t in activations if t < n],
        failure=failure,
        ranges=ranges,
    )


def with_magnitude(spec: FaultSpec, magnitude: float) -> FaultSpec:
    return replace(spec, magnitude=magnitude)


# -- campaign --------------------------------------------------------------
WEEK_TICKS = 7 * 1440
PREROLL = 360         # longer than the likelihood window
FAULT_DELAY = 30           # observed ticks before the first activation
FAULTY_OBSERVED = 330      # cap on observed ticks of a faulty run
CLEAN_OBSERVED = 180
PATTERN_PERIOD = {"constant": 15, "exponential": 30, "random": 15}


def campaign_scenarios(seed: int = 0, kpis_per_resource: int = 5) -> list[ScenarioConfig]:
    """Two failure-free training weeks, then 12 faulty and 12 clean evaluation runs.

    Evaluation runs start on the days after the training fortnight, at a
    seeded time of day between 07:00 and 16:00, each preceded by a short
    preroll that lets the detectors absorb the jump in wall-clock time.
    """
    common = dict(workload_seed=seed, kpis_per_resource=kpis_per_resource)
    out = [
        ScenarioConfig(seed=seed * 1000 + 1, start_tick=0, duration=WEEK_TICKS,
                       name="train_week1", **common),
        ScenarioConfig(seed=seed * 1000 + 2, start_tick=WEEK_TICKS, duration=WEEK_TICKS,
                       name="train_week2", **common),
    ]
    faults = [(t, p) for t in FAULT_TYPES for p in PATTERNS]
    rng = np.random.default_rng([seed, 0xCA3])
    for i in range(2 * len(faults)):
        minute = 7 * 60 + int(rng.integers(0, 9 * 60))
        start = (14 + i % 7) * 1440 + minute - PREROLL
        if i % 2 == 0:
            ftype, pattern = faults[i // 2]
            spec = FaultSpec(ftype, pattern, start=PREROLL + FAULT_DELAY,
                             period=PATTERN_PERIOD[pattern])
            out.append(ScenarioConfig(seed=seed * 1000 + 10 + i, start_tick=start,
                                      duration=PREROLL + FAULTY_OBSERVED, preroll=PREROLL,
                                      fault=spec, name=f"run{i:02d}_{ftype}_{pattern}", **common))
        else:
            out.append(ScenarioConfig(seed=seed * 1000 + 10 + i, start_tick=start,
                                      duration=PREROLL + CLEAN_OBSERVED, preroll=PREROLL,
                                      name=f"run{i:02d}_clean", **common))
    return out
