"""Files exchanged between the simulator, the pipeline and the CLI.

* trace CSV: ``timestamp,<resource.kpi>...`` with ISO-8601 UTC timestamps
* ground truth CSV: ``tick,event,detail`` (tick = 0-based trace row)
* scenario file: ``key = value`` lines, ``#`` starts a comment
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .testbed import (EPOCH, TICK_SECONDS, FailureEvent, FaultSpec, ScenarioConfig,
                      ScenarioTrace, kpi_ranges)


class TraceFormatError(ValueError):
    pass


def iso(ts: float) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_iso(text: str) -> float:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def ranges_for(columns: list[str]) -> dict[str, tuple[float, float]]:
    per_resource: dict[str, int] = {}
    for c in columns:
        r = c.split(".", 1)[0]
        per_resource[r] = per_resource.get(r, 0) + 1
    out = {}
    for c in columns:
        r, k = c.split(".", 1)
        try:
            out[c] = kpi_ranges(r, per_resource[r])[k]
        except KeyError:
            raise TraceFormatError(f"no declared range for KPI column {c!r}") from None
    return out


# -- ground truth --------------------------------------------------------
@dataclass
class GroundTruth:
    observe_start: int = 0
    fault: dict = field(default_factory=dict)   # type / pattern / target, empty when clean
    activations: list[int] = field(default_factory=list)
    failure: FailureEvent | None = None

    @property
    def faulty(self) -> bool:
        return bool(self.fault)

    @property
    def fault_type(self) -> str:
        return self.fault.get("type", "")


def truth_of(trace: ScenarioTrace) -> GroundTruth:
    fault = {}
    if trace.fault is not None:
        fault = {"type": trace.fault.type, "pattern": trace.fault.pattern,
                 "target": trace.fault.resource or "*"}
    return GroundTruth(trace.observe_start, fault, list(trace.activations), trace.failure)


def write_truth(truth: GroundTruth, path: Path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tick", "event", "detail"])
        w.writerow([truth.observe_start, "observe_start", ""])
        if truth.fault:
            w.writerow([truth.observe_start, "fault",
                        ";".join(f"{k}={v}" for k, v in truth.fault.items())])
        for t in truth.activations:
            w.writerow([t, "activation", truth.fault.get("target", "")])
        if truth.failure is not None:
            f = truth.failure
            w.writerow([f.tick, "failure", f"{f.kind}:{f.detail}" if f.detail else f.kind])


def read_truth(path: Path) -> GroundTruth:
    truth = GroundTruth()
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        tick, event, detail = int(row["tick"]), row["event"], row["detail"] or ""
        if event == "observe_start":
            truth.observe_start = tick
        elif event == "fault":
            truth.fault = dict(kv.split("=", 1) for kv in detail.split(";") if kv)
        elif event == "activation":
            truth.activations.append(tick)
        elif event == "failure":
            kind, _, where = detail.partition(":")
            truth.failure = FailureEvent(tick, kind, where)
        else:
            raise TraceFormatError(f"{path}: unknown event {event!r}")
    return truth


# -- traces --------------------------------------------------------------
def write_trace(trace: ScenarioTrace, directory: Path) -> tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    data_path = directory / f"{trace.name}.csv"
    with open(data_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp"] + trace.columns)
        for ts, row in zip(trace.timestamps, trace.values):
            w.writerow([iso(ts)] + [repr(float(v)) for v in row])
    truth_path = directory / f"{trace.name}.truth.csv"
    write_truth(truth_of(trace), truth_path)
    return data_path, truth_path


@dataclass
class LoadedTrace:
    name: str
    timestamps: np.ndarray
    columns: list[str]
    values: np.ndarray
    truth: GroundTruth

    @property
    def resources(self) -> list[str]:
        return list(dict.fromkeys(c.split(".", 1)[0] for c in self.columns))


def read_trace(path: Path) -> LoadedTrace:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "timestamp" or len(header) < 2:
            raise TraceFormatError(f"{path}: expected a 'timestamp,<resource.kpi>...' header")
        stamps, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise TraceFormatError(f"{path}:{lineno}: expected {len(header)} fields")
            stamps.append(parse_iso(row[0]))
            rows.append([float(v) for v in row[1:]])
    truth_path = path.with_name(path.name[:-4] + ".truth.csv")
    truth = read_truth(truth_path) if truth_path.exists() else GroundTruth()
    return LoadedTrace(path.name[:-4], np.array(stamps), header[1:],
                       np.array(rows, dtype=np.float64).reshape(len(rows), len(header) - 1), truth)


# -- scenario files --------------------------------------------------------
_INT_KEYS = {"seed", "workload_seed", "start_tick", "duration", "preroll", "resources",
             "kpis_per_resource"}


def parse_scenario(text: str, name: str = "run") -> ScenarioConfig:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise TraceFormatError(f"line {lineno}: expected 'key = value'")
        values[key.strip()] = value.strip()

    kwargs: dict = {"name": values.pop("name", name)}
    if "start" in values:
        offset = parse_iso(values.pop("start")) - EPOCH
        if offset < 0 or offset % TICK_SECONDS:
            raise TraceFormatError("start must be a whole minute at or after 2021-01-04T00:00:00Z")
        kwargs["start_tick"] = int(offset // TICK_SECONDS)
    fault = {k[6:]: values.pop(k) for k in list(values) if k.startswith("fault.")}
    for key, value in values.items():
        if key not in _INT_KEYS:
            raise TraceFormatError(f"unknown scenario key {key!r}")
        kwargs[key] = int(value)
    if fault:
        try:
            spec = FaultSpec(
                type=fault.pop("type"), pattern=fault.pop("pattern"),
                start=int(fault.pop("start")), target=fault.pop("target", ""),
                magnitude=float(fault["magnitude"]) if "magnitude" in fault else None,
                period=int(fault.pop("period", 15)), ratio=float(fault.pop("ratio", 0.8)))
        except KeyError as exc:
            raise TraceFormatError(f"fault section lacks {exc.args[0]!r}") from None
        fault.pop("magnitude", None)
        if fault:
            raise TraceFormatError(f"unknown fault keys {sorted(fault)}")
        kwargs["fault"] = spec
    return ScenarioConfig(**kwargs)


def format_scenario(cfg: ScenarioConfig) -> str:
    lines = [
        f"name = {cfg.name}",
        f"seed = {cfg.seed}",
        f"workload_seed = {cfg.workload_seed}",
        f"start = {iso(EPOCH + cfg.start_tick * TICK_SECONDS)}",
        f"duration = {cfg.duration}",
        f"preroll = {cfg.preroll}",
        f"resources = {cfg.resources}",
        f"kpis_per_resource = {cfg.kpis_per_resource}",
    ]
    f = cfg.fault
    if f is not None:
        lines += [f"fault.type = {f.type}", f"fault.pattern = {f.pattern}",
                  f"fault.start = {f.start}", f"fault.target = {f.resource}",
                  f"fault.magnitude = {f.effect!r}", f"fault.period = {f.period}",
                  f"fault.ratio = {f.ratio!r}"]
    return "\n".join(lines) + "\n"


def read_scenario(path: Path) -> ScenarioConfig:
    path = Path(path)
    return parse_scenario(path.read_text(), name=path.stem)


def loaded(trace: ScenarioTrace) -> LoadedTrace:
    """In-memory equivalent of writing a trace and reading it back."""
    return LoadedTrace(trace.name, np.asarray(trace.timestamps, dtype=np.float64),
                       list(trace.columns), trace.values, truth_of(trace))
