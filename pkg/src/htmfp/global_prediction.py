"""System-level failure prediction from per-resource local verdicts.

Two strategies:

* single resource -- fire once some resource has produced ``x`` consecutive
  local failure predictions;
* vote based -- fire once at least half of the resources (rounded up) have
  predicted failure on ``y`` consecutive ticks.

After firing, a predictor holds until a tick on which every local verdict is
false, so one incident yields one prediction event.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

SINGLE = "single_resource"
VOTE = "vote_based"
STRATEGIES = (SINGLE, VOTE)


@dataclass(frozen=True)
class GlobalPrediction:
    tick: int
    strategy: str
    detail: tuple  # triggering resources (single) or the voting set (vote)


class _Predictor:
    strategy = ""

    def __init__(self, resources: Sequence[str], refractory: bool = True):
        if len(resources) < 1:
            raise ValueError("need at least one resource")
        self.resources = list(resources)
        self.refractory = refractory
        self.holding = False
        self.tick = -1

    def _check(self, verdicts) -> np.ndarray:
        v = np.asarray(verdicts, dtype=bool)
        if v.shape != (len(self.resources),):
            raise ValueError(f"expected {len(self.resources)} verdicts, got {v.shape}")
        return v

    def _emit(self, v: np.ndarray, firing: bool, detail: tuple) -> GlobalPrediction | None:
        if self.holding and not v.any():
            self.holding = False
        if firing and not self.holding:
            if self.refractory:
                self.holding = True
            return GlobalPrediction(self.tick, self.strategy, detail)
        return None


class SingleResourcePredictor(_Predictor):
    strategy = SINGLE

    def __init__(self, resources: Sequence[str], x: int, refractory: bool = True):
        if x < 1:
            raise ValueError("x must be at least 1")
        super().__init__(resources, refractory)
        self.x = x
        self.streaks = np.zeros(len(self.resources), dtype=np.int64)

    def step(self, verdicts) -> GlobalPrediction | None:
        v = self._check(verdicts)
        self.tick += 1
        self.streaks = np.where(v, self.streaks + 1, 0)
        hot = np.flatnonzero(self.streaks >= self.x)
        return self._emit(v, hot.size > 0, tuple(self.resources[i] for i in hot))


class VoteBasedPredictor(_Predictor):
    strategy = VOTE

    def __init__(self, resources: Sequence[str], y: int, refractory: bool = True):
        if y < 1:
            raise ValueError("y must be at least 1")
        super().__init__(resources, refractory)
        self.y = y
        self.quorum = math.ceil(len(self.resources) / 2)
        self.majority_streak = 0

    def step(self, verdicts) -> GlobalPrediction | None:
        v = self._check(verdicts)
        self.tick += 1
        majority = int(v.sum()) >= self.quorum
        self.majority_streak = self.majority_streak + 1 if majority else 0
        voters = tuple(self.resources[i] for i in np.flatnonzero(v))
        return self._emit(v, self.majority_streak >= self.y, voters)


def make_predictor(strategy: str, resources: Sequence[str], k: int, refractory: bool = True):
    if strategy == SINGLE:
        return SingleResourcePredictor(resources, k, refractory)
    if strategy == VOTE:
        return VoteBasedPredictor(resources, k, refractory)
    raise ValueError(f"unknown strategy {strategy!r}")


def firing_ticks(verdicts: np.ndarray, strategy: str, k: int, refractory: bool = True) -> np.ndarray:
    """Ticks at which the predictor fires on a (ticks, resources) verdict matrix."""
    verdicts = np.asarray(verdicts, dtype=bool)
    pred = make_predictor(strategy, [str(i) for i in range(verdicts.shape[1])], k, refractory)
    return np.array([t for t in range(verdicts.shape[0]) if pred.step(verdicts[t]) is not None],
                    dtype=np.int64)


def first_firing(verdicts: np.ndarray, strategy: str, k: int) -> int | None:
    """Earliest firing tick; the hold never delays the first event."""
    verdicts = np.asarray(verdicts, dtype=bool)
    if verdicts.shape[0] == 0:
        return None
    if strategy == SINGLE:
        cond = _run_lengths(verdicts).max(axis=1) >= k
    elif strategy == VOTE:
        majority = verdicts.sum(axis=1) >= math.ceil(verdicts.shape[1] / 2)
        cond = _run_lengths(majority[:, None])[:, 0] >= k
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    hits = np.flatnonzero(cond)
    return int(hits[0]) if hits.size else None


def _run_lengths(b: np.ndarray) -> np.ndarray:
    """Length of the run of True ending at each tick, per column."""
    out = np.zeros(b.shape, dtype=np.int64)
    run = np.zeros(b.shape[1], dtype=np.int64)
    for t in range(b.shape[0]):
        run = np.where(b[t], run + 1, 0)
        out[t] = run
    return out
