"""Detector bank, training protocol and on-disk model store.

Training: the detectors learn on the first failure-free week, keep learning
through the second, and the anomaly flags of the second week train one
one-class SVM per resource and threshold.  Evaluation runs all start from the
same post-training detector snapshot, with learning left on.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .anomaly import AnomalyDetector, DetectorParams, LikelihoodConfig
from .encoders import KpiEncoder, ScalarEncoderConfig
from .global_prediction import GlobalPrediction, make_predictor
from .local_prediction import OneClassSvmModel, confirm_streaks, model_from_arrays, \
    model_to_arrays, train_ocsvm

EPSILONS = (0.8, 0.85, 0.9, 0.95)
MODEL_FORMAT = 1
FEATURES = ("flags", "likelihood")


class ModelStoreError(RuntimeError):
    pass


@dataclass
class DetectorRun:
    """Per-tick detector outputs for one trace: rows are ticks, columns KPIs."""
    raw: np.ndarray
    likelihood: np.ndarray
    warm: np.ndarray

    def flags(self, epsilon: float, rule: str = "upper") -> np.ndarray:
        if rule == "literal":
            hit = self.likelihood <= 1.0 - epsilon
        else:
            hit = self.likelihood >= epsilon
        return hit & self.warm

    def features(self, epsilon: float, rule: str = "upper", kind: str = "flags") -> np.ndarray:
        """SVM inputs: binary flags, or likelihoods zeroed where the flag is off."""
        flags = self.flags(epsilon, rule)
        if kind == "flags":
            return flags.astype(np.float64)
        if kind == "likelihood":
            return np.where(flags, self.likelihood, 0.0)
        raise ValueError(f"unknown feature kind {kind!r}")


def build_detectors(columns: list[str], ranges: dict, seed: int = 0,
                    params: DetectorParams | None = None) -> list[AnomalyDetector]:
    dets = []
    for i, col in enumerate(columns):
        lo, hi = ranges[col]
        dets.append(AnomalyDetector(col, KpiEncoder(ScalarEncoderConfig(lo, hi)), params,
                                    seed=seed + 7919 * i))
    return dets


def run_detectors(detectors: list[AnomalyDetector], timestamps, values,
                  learn: bool = True) -> DetectorRun:
    values = np.asarray(values, dtype=np.float64)
    ticks, k = values.shape
    if k != len(detectors):
        raise ValueError(f"{k} KPI columns but {len(detectors)} detectors")
    raw = np.zeros((ticks, k))
    lik = np.zeros((ticks, k))
    warm = np.zeros((ticks, k), dtype=bool)
    for j, det in enumerate(detectors):
        for t in range(ticks):
            v = det.step(float(timestamps[t]), float(values[t, j]), learn)
            raw[t, j] = v.raw_score
            lik[t, j] = v.likelihood
            warm[t, j] = det.warmed_up
    return DetectorRun(raw, lik, warm)


def resource_slices(columns: list[str]) -> dict[str, list[int]]:
    out: dict[str, list[int]] = {}
    for i, c in enumerate(columns):
        out.setdefault(c.split(".", 1)[0], []).append(i)
    return out


@dataclass
class ModelSet:
    columns: list[str]
    detectors: list[AnomalyDetector]
    svms: dict = field(default_factory=dict)  # (resource, epsilon) -> OneClassSvmModel
    epsilons: tuple = EPSILONS
    nu: float = 0.05
    gamma: float | None = None
    rule: str = "upper"
    seed: int = 0
    features: str = "flags"

    @property
    def resources(self) -> list[str]:
        return list(resource_slices(self.columns))

    def svm(self, resource: str, epsilon: float) -> OneClassSvmModel:
        key = (resource, _eps_key(epsilon))
        if key not in self.svms:
            raise ModelStoreError(f"no SVM for resource {resource!r} at epsilon {epsilon}")
        return self.svms[key]

    def snapshot(self) -> list[dict]:
        return [d.state_dict() for d in self.detectors]

    def fresh_detectors(self, snapshot: list[dict] | None = None) -> list[AnomalyDetector]:
        return [AnomalyDetector.from_state(s) for s in (snapshot or self.snapshot())]

    def outliers(self, run: DetectorRun, epsilon: float) -> np.ndarray:
        """(ticks, resources) SVM outlier matrix for one threshold."""
        z = run.features(epsilon, self.rule, self.features)
        cols = []
        for resource, idx in resource_slices(self.columns).items():
            cols.append(self.svm(resource, epsilon).is_outlier(z[:, idx]))
        return np.column_stack(cols)

    # -- persistence -------------------------------------------------------
    def save(self, directory: Path):
        directory = Path(directory)
        (directory / "detectors").mkdir(parents=True, exist_ok=True)
        (directory / "svm").mkdir(parents=True, exist_ok=True)
        for det in self.detectors:
            np.savez(directory / "detectors" / f"{det.kpi}.npz", **det.state_dict())
        svm_files = {}
        for (resource, eps), model in sorted(self.svms.items()):
            name = f"{resource}_eps{eps}.npz"
            np.savez(directory / "svm" / name, **model_to_arrays(model))
            svm_files[name] = [resource, eps]
        manifest = {
            "format": MODEL_FORMAT, "columns": self.columns, "epsilons": list(self.epsilons),
            "nu": self.nu, "gamma": self.gamma, "rule": self.rule, "seed": self.seed,
            "features": self.features, "svm": svm_files,
        }
        (directory / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    @classmethod
    def load(cls, directory: Path) -> "ModelSet":
        directory = Path(directory)
        path = directory / "manifest.json"
        if not path.exists():
            raise ModelStoreError(f"{directory}: no manifest.json; run 'train' first")
        manifest = json.loads(path.read_text())
        if manifest.get("format") != MODEL_FORMAT:
            raise ModelStoreError(f"{directory}: unsupported model format {manifest.get('format')}")
        detectors = []
        for col in manifest["columns"]:
            with np.load(directory / "detectors" / f"{col}.npz") as z:
                detectors.append(AnomalyDetector.from_state(dict(z)))
        svms = {}
        for name, (resource, eps) in manifest["svm"].items():
            with np.load(directory / "svm" / name) as z:
                svms[(resource, eps)] = model_from_arrays(dict(z))
        return cls(manifest["columns"], detectors, svms, tuple(manifest["epsilons"]),
                   manifest["nu"], manifest["gamma"], manifest["rule"], manifest["seed"],
                   manifest.get("features", "flags"))


def _eps_key(epsilon: float) -> str:
    return f"{epsilon:.4f}"


def train(week1, week2, ranges: dict, seed: int = 0, epsilons=EPSILONS, nu: float = 0.05,
          gamma: float | None = None, params: DetectorParams | None = None,
          features: str = "flags") -> ModelSet:
    """Train detectors on ``week1`` and SVMs on the flags the detectors raise over ``week2``.

    ``week1``/``week2`` are objects with ``timestamps``, ``columns`` and ``values``.
    """
    if features not in FEATURES:
        raise ValueError(f"unknown feature kind {features!r}")
    if list(week1.columns) != list(week2.columns):
        raise ValueError("training traces disagree on KPI columns")
    if week2.timestamps[0] <= week1.timestamps[-1]:
        raise ValueError("second training trace must follow the first in time")
    columns = list(week1.columns)
    detectors = build_detectors(columns, ranges, seed, params)
    run_detectors(detectors, week1.timestamps, week1.values)
    run = run_detectors(detectors, week2.timestamps, week2.values)
    rule = detectors[0].params.likelihood.rule
    models = ModelSet(columns, detectors, {}, tuple(epsilons), nu, gamma, rule, seed, features)
    for eps in epsilons:
        z = run.features(eps, rule, features)
        for resource, idx in resource_slices(columns).items():
            models.svms[(resource, _eps_key(eps))] = train_ocsvm(z[:, idx], nu=nu, gamma=gamma)
    return models


def global_predictions(local: np.ndarray, strategy: str, k: int, start: int,
                       resources: list[str]) -> list[GlobalPrediction]:
    """Run a global predictor over local verdict rows ``start:``; ticks are trace rows."""
    pred = make_predictor(strategy, resources, k)
    out = []
    for t in range(start, local.shape[0]):
        ev = pred.step(local[t])
        if ev is not None:
            out.append(GlobalPrediction(t, ev.strategy, ev.detail))
    return out


def predict(models: ModelSet, trace, epsilon: float, n: int, strategy: str, k: int,
            snapshot: list[dict] | None = None):
    """Full pipeline over one evaluation trace.

    Returns (detector run, local verdicts, global predictions).  Only ticks
    from the trace's observation start onward can produce global predictions.
    """
    detectors = models.fresh_detectors(snapshot)
    run = run_detectors(detectors, trace.timestamps, trace.values)
    local = confirm_streaks(models.outliers(run, epsilon), n)
    start = trace.truth.observe_start
    return run, local, global_predictions(local, strategy, k, start, models.resources)


def likelihood_config(epsilon: float = 0.9, rule: str = "upper") -> DetectorParams:
    return DetectorParams(likelihood=LikelihoodConfig(epsilon=epsilon, rule=rule))
