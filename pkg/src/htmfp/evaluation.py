"""Sweep over predictor configurations and run-level scoring."""
from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .global_prediction import SINGLE, STRATEGIES, VOTE
from .local_prediction import confirm_streaks
from .pipeline import EPSILONS, ModelSet, global_predictions, run_detectors
from .traceio import GroundTruth

N_VALUES = (1, 2)
X_VALUES = tuple(range(1, 7))
Y_VALUES = (1, 2, 3)
REPORT_COLUMNS = ["strategy", "epsilon", "n", "x_or_y", "tp", "fp", "fn", "precision",
                  "recall", "f_measure", "median_lead_min"]
FAULT_ORDER = ("cpu_hog", "memory_leak", "packet_loss", "excessive_workload")
FAULT_LABELS = {"cpu_hog": "CPU Hog", "memory_leak": "Memory Leak", "packet_loss": "Packet Loss",
                "excessive_workload": "Excessive Workload"}
# recall and median lead (min) measured on the physical IMS deployment
REFERENCE_FAULT_TABLE = {
    "cpu_hog": (0.74, 134.0),
    "memory_leak": (0.6, 54.0),
    "packet_loss": (0.65, 51.0),
    "excessive_workload": (0.52, 15.0),
}


class GroundTruthError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class SweepConfig:
    strategy: str
    epsilon: float
    n: int
    k: int  # x for single-resource, y for vote-based

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.n < 1 or self.k < 1:
            raise ValueError("n and x/y must be positive")


def enumerate_configs() -> list[SweepConfig]:
    out = []
    for strategy, ks in ((SINGLE, X_VALUES), (VOTE, Y_VALUES)):
        for eps in EPSILONS:
            for n in N_VALUES:
                out.extend(SweepConfig(strategy, eps, n, k) for k in ks)
    return out


@dataclass(frozen=True)
class RunOutcome:
    run: str
    fault_type: str        # empty for failure-free runs
    predicted: bool
    first_prediction: int | None
    failure_tick: int | None
    lead_min: float | None

    @property
    def faulty(self) -> bool:
        return bool(self.fault_type)


def lead_time(prediction_tick: int, failure_tick: int, tick_minutes: float = 1.0) -> float:
    if prediction_tick >= failure_tick:
        raise ValueError(f"prediction at {prediction_tick} does not precede failure at {failure_tick}")
    return (failure_tick - prediction_tick) * tick_minutes


def evaluate_run(prediction_ticks: Sequence[int], truth: GroundTruth, run: str = "",
                 tick_minutes: float = 1.0) -> RunOutcome:
    ticks = sorted(int(t) for t in prediction_ticks)
    if not truth.faulty:
        return RunOutcome(run, "", bool(ticks), ticks[0] if ticks else None, None, None)
    if truth.failure is None:
        raise GroundTruthError(f"faulty run {run!r} has no failure event")
    fail = truth.failure.tick
    early = [t for t in ticks if t < fail]
    if not early:
        return RunOutcome(run, truth.fault_type, False, None, fail, None)
    return RunOutcome(run, truth.fault_type, True, early[0], fail,
                      lead_time(early[0], fail, tick_minutes))


def metrics(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    if min(tp, fp, fn) < 0:
        raise ValueError("counts must be non-negative")
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


@dataclass(frozen=True)
class ConfigReport:
    config: SweepConfig
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f_measure: float
    median_lead: float | None

    def row(self) -> list[str]:
        c = self.config
        lead = "" if self.median_lead is None else f"{self.median_lead:.1f}"
        return [c.strategy, f"{c.epsilon:.2f}", str(c.n), str(c.k), str(self.tp), str(self.fp),
                str(self.fn), f"{self.precision:.6f}", f"{self.recall:.6f}",
                f"{self.f_measure:.6f}", lead]


def _median(values: list[float]) -> float | None:
    return float(statistics.median(values)) if values else None


def score(config: SweepConfig, outcomes: Iterable[RunOutcome]) -> ConfigReport:
    outcomes = list(outcomes)
    tp = sum(o.faulty and o.predicted for o in outcomes)
    fn = sum(o.faulty and not o.predicted for o in outcomes)
    fp = sum(not o.faulty and o.predicted for o in outcomes)
    leads = [o.lead_min for o in outcomes if o.lead_min is not None]
    return ConfigReport(config, tp, fp, fn, *metrics(tp, fp, fn), _median(leads))


@dataclass(frozen=True)
class FaultRow:
    fault_type: str
    count: int
    predicted: int
    recall: float
    median_lead: float | None


def per_fault_report(outcomes: Iterable[RunOutcome]) -> list[FaultRow]:
    """Recall and median lead per fault type; runs may repeat across configurations."""
    groups: dict[str, list[RunOutcome]] = {t: [] for t in FAULT_ORDER}
    for o in outcomes:
        if o.faulty:
            groups.setdefault(o.fault_type, []).append(o)
    rows = []
    for ftype, group in groups.items():
        hits = [o for o in group if o.predicted]
        rows.append(FaultRow(ftype, len(group), len(hits),
                             len(hits) / len(group) if group else 0.0,
                             _median([o.lead_min for o in hits])))
    return rows


def format_fault_table(rows: list[FaultRow], reference: bool = True) -> str:
    """Plain-text fault table; optionally with the reference deployment's figures alongside."""
    head = f"{'Fault':<20} {'Recall':>7} {'Median Prediction Time':>24}"
    if reference:
        head += f"   {'ref recall':>10} {'ref median':>10}"
    lines = [head]
    for r in rows:
        lead = "-" if r.median_lead is None else f"{r.median_lead:.0f} min"
        line = f"{FAULT_LABELS.get(r.fault_type, r.fault_type):<20} {r.recall:>7.2f} {lead:>24}"
        if reference and r.fault_type in REFERENCE_FAULT_TABLE:
            ref_recall, ref_lead = REFERENCE_FAULT_TABLE[r.fault_type]
            line += f"   {ref_recall:>10.2f} {f'{ref_lead:.0f} min':>10}"
        lines.append(line)
    return "\n".join(lines)


# -- sweep -----------------------------------------------------------------
@dataclass
class SweepResult:
    reports: list[ConfigReport]
    outcomes: dict  # SweepConfig -> list[RunOutcome]
    flag_counts: dict = field(default_factory=dict)  # epsilon -> flagged (tick, KPI) cells

    def best(self) -> ConfigReport:
        return max(self.reports, key=lambda r: (r.f_measure, r.recall, -self.reports.index(r)))

    def all_outcomes(self) -> list[RunOutcome]:
        return [o for c in sorted(self.outcomes) for o in self.outcomes[c]]


def sweep(models: ModelSet, traces: Sequence, configs: Sequence[SweepConfig] | None = None,
          progress: Callable[[str], None] | None = None) -> SweepResult:
    """Score every configuration on every evaluation trace.

    The detectors do not depend on the threshold, so each trace is replayed
    once from the training snapshot and the likelihoods are thresholded per
    epsilon; the SVM, local and global layers are re-run per configuration.
    """
    configs = list(configs or enumerate_configs())
    if not traces:
        raise ValueError("no evaluation traces")
    missing = {c.epsilon for c in configs} - set(models.epsilons)
    if missing:
        raise ValueError(f"models lack thresholds {sorted(missing)}")
    snapshot = models.snapshot()
    outcomes: dict[SweepConfig, list[RunOutcome]] = {c: [] for c in configs}
    flag_counts = {eps: 0 for eps in sorted({c.epsilon for c in configs})}
    resources = models.resources
    for trace in traces:
        if list(trace.columns) != models.columns:
            raise ValueError(f"trace {trace.name} columns differ from the trained models")
        if progress:
            progress(trace.name)
        run = run_detectors(models.fresh_detectors(snapshot), trace.timestamps, trace.values)
        start = trace.truth.observe_start
        for eps in flag_counts:
            flag_counts[eps] += int(run.flags(eps, models.rule)[start:].sum())
        local_cache: dict = {}
        for c in configs:
            key = (c.epsilon, c.n)
            if key not in local_cache:
                local_cache[key] = confirm_streaks(models.outliers(run, c.epsilon), c.n)
            preds = global_predictions(local_cache[key], c.strategy, c.k, start, resources)
            outcomes[c].append(evaluate_run([p.tick for p in preds], trace.truth, trace.name))
    reports = [score(c, outcomes[c]) for c in configs]
    return SweepResult(reports, outcomes, flag_counts)


# -- CSV output ------------------------------------------------------------
def report_csv(reports: Sequence[ConfigReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in sorted(reports, key=lambda r: r.config):
        w.writerow(r.row())
    return buf.getvalue()


def read_report_csv(path: Path) -> list[ConfigReport]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != REPORT_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        out = []
        for row in reader:
            cfg = SweepConfig(row["strategy"], float(row["epsilon"]), int(row["n"]),
                              int(row["x_or_y"]))
            lead = float(row["median_lead_min"]) if row["median_lead_min"] else None
            out.append(ConfigReport(cfg, int(row["tp"]), int(row["fp"]), int(row["fn"]),
                                    float(row["precision"]), float(row["recall"]),
                                    float(row["f_measure"]), lead))
    return out


def outcomes_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["strategy", "epsilon", "n", "x_or_y", "run", "fault_type", "predicted",
                "first_prediction", "failure_tick", "lead_min"])
    for c in sorted(result.outcomes):
        for o in result.outcomes[c]:
            w.writerow([c.strategy, f"{c.epsilon:.2f}", c.n, c.k, o.run, o.fault_type or "none",
                        int(o.predicted), "" if o.first_prediction is None else o.first_prediction,
                        "" if o.failure_tick is None else o.failure_tick,
                        "" if o.lead_min is None else f"{o.lead_min:.1f}"])
    return buf.getvalue()


def read_outcomes_csv(path: Path) -> dict:
    out: dict[SweepConfig, list[RunOutcome]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            cfg = SweepConfig(row["strategy"], float(row["epsilon"]), int(row["n"]),
                              int(row["x_or_y"]))
            opt = lambda s, f: f(s) if s else None  # noqa: E731
            out.setdefault(cfg, []).append(RunOutcome(
                row["run"], "" if row["fault_type"] == "none" else row["fault_type"],
                row["predicted"] == "1", opt(row["first_prediction"], int),
                opt(row["failure_tick"], int), opt(row["lead_min"], float)))
    return out


def fault_csv(rows: list[FaultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["fault_type", "count", "predicted", "recall", "median_lead_min",
                "reference_recall", "reference_median_lead_min"])
    for r in rows:
        ref = REFERENCE_FAULT_TABLE.get(r.fault_type)
        w.writerow([r.fault_type, r.count, r.predicted, f"{r.recall:.6f}",
                    "" if r.median_lead is None else f"{r.median_lead:.1f}",
                    "" if ref is None else f"{ref[0]:.2f}", "" if ref is None else f"{ref[1]:.0f}"])
    return buf.getvalue()


def flag_counts_csv(counts: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epsilon", "flagged"])
    for eps in sorted(counts):
        w.writerow([f"{eps:.2f}", counts[eps]])
    return buf.getvalue()


def read_flag_counts_csv(path: Path) -> dict:
    with open(path, newline="") as fh:
        return {float(row["epsilon"]): int(row["flagged"]) for row in csv.DictReader(fh)}


def epsilon_aggregates(reports: Sequence[ConfigReport]) -> list[dict]:
    """Mean precision/recall/F per (strategy, epsilon) over the n and x|y settings."""
    out = []
    for strategy in STRATEGIES:
        for eps in sorted({r.config.epsilon for r in reports}):
            group = [r for r in reports if r.config.strategy == strategy and r.config.epsilon == eps]
            if not group:
                continue
            out.append({
                "strategy": strategy, "epsilon": eps, "configs": len(group),
                "precision": float(np.mean([r.precision for r in group])),
                "recall": float(np.mean([r.recall for r in group])),
                "f_measure": float(np.mean([r.f_measure for r in group])),
                "best_f_measure": max(r.f_measure for r in group),
            })
    return out


def aggregates_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["strategy", "epsilon", "configs", "mean_precision", "mean_recall",
                "mean_f_measure", "best_f_measure"])
    for r in rows:
        w.writerow([r["strategy"], f"{r['epsilon']:.2f}", r["configs"], f"{r['precision']:.6f}",
                    f"{r['recall']:.6f}", f"{r['f_measure']:.6f}", f"{r['best_f_measure']:.6f}"])
    return buf.getvalue()
