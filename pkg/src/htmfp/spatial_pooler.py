"""Spatial pooler with global inhibition.

Maps an input SDR to a fixed number of active columns.  Each column sees a
random half of the input bits (its potential pool) through synapses whose
permanences are learned with a Hebbian rule.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sdr import SDR, SDRError


class PoolerConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SpatialPoolerParams:
    num_columns: int = 512
    active_count: int = 10
    potential_fraction: float = 0.5
    connected_threshold: float = 0.5
    permanence_inc: float = 0.05
    permanence_dec: float = 0.008
    duty_cycle_period: int = 1000
    boost_strength: float = 0.2


class SpatialPooler:
    def __init__(self, input_size: int, params: SpatialPoolerParams = SpatialPoolerParams(),
                 seed: int = 0):
        if input_size <= 0:
            raise PoolerConfigError("input_size must be positive")
        if params.num_columns <= 0 or params.active_count <= 0:
            raise PoolerConfigError("num_columns and active_count must be positive")
        if params.active_count >= params.num_columns:
            raise PoolerConfigError("active_count must be smaller than num_columns")
        if not 0.0 < params.potential_fraction <= 1.0:
            raise PoolerConfigError("potential_fraction must lie in (0, 1]")
        if not 0.0 < params.connected_threshold < 1.0:
            raise PoolerConfigError("connected_threshold must lie in (0, 1)")

        self.input_size = int(input_size)
        self.params = params
        self.seed = seed
        rng = np.random.default_rng(seed)
        ncol = params.num_columns
        pool_size = max(1, int(round(params.potential_fraction * input_size)))

        self.potential = np.zeros((ncol, input_size), dtype=bool)
        for c in range(ncol):
            self.potential[c, rng.choice(input_size, size=pool_size, replace=False)] = True
        # roughly half of each pool starts connected
        thr = params.connected_threshold
        perm = rng.uniform(thr - 0.1, thr + 0.1, size=(ncol, input_size))
        self.permanences = np.where(self.potential, np.clip(perm, 0.0, 1.0), 0.0)
        self.boost = np.ones(ncol)
        self.active_duty = np.zeros(ncol)
        self.overlap_duty = np.zeros(ncol)
        self.iteration = 0
        self._refresh_connected()

    @property
    def num_columns(self) -> int:
        return self.params.num_columns

    def _refresh_connected(self, rows=None):
        thr = self.params.connected_threshold
        if rows is None:
            self._connected = ((self.permanences >= thr) & self.potential).astype(np.float64)
        else:
            self._connected[rows] = (self.permanences[rows] >= thr) & self.potential[rows]

    def overlaps(self, input_sdr: SDR) -> np.ndarray:
        """Connected-synapse count on active input bits, per column (unboosted)."""
        if input_sdr.size != self.input_size:
            raise SDRError(f"input size {input_sdr.size} != pooler input size {self.input_size}")
        return self._connected[:, input_sdr.active].sum(axis=1)

    def compute(self, input_sdr: SDR, learn: bool) -> SDR:
        raw = self.overlaps(input_sdr)
        score = raw * self.boost
        # stable sort on the negated score keeps the lower column index on ties
        winners = np.argsort(-score, kind="stable")[: self.params.active_count]
        active = np.sort(winners).astype(np.int64)
        if learn:
            self._learn(input_sdr, active, raw)
        return SDR(self.num_columns, active, validate=False)

    def _learn(self, input_sdr: SDR, active: np.ndarray, raw: np.ndarray):
        p = self.params
        x = np.zeros(self.input_size, dtype=bool)
        x[input_sdr.active] = True
        delta = np.where(x, p.permanence_inc, -p.permanence_dec)
        rows = self.permanences[active] + delta * self.potential[active]
        self.permanences[active] = np.clip(rows, 0.0, 1.0)
        self._refresh_connected(active)

        self.iteration += 1
        period = min(self.iteration, p.duty_cycle_period)
        is_active = np.zeros(self.num_columns)
        is_active[active] = 1.0
        self.active_duty += (is_active - self.active_duty) / period
        self.overlap_duty += ((raw > 0).astype(np.float64) - self.overlap_duty) / period
        if p.boost_strength > 0:
            target = p.active_count / self.num_columns
            self.boost = np.exp(-p.boost_strength * (self.active_duty - target))

    # -- persistence -----------------------------------------------------
    def state_dict(self) -> dict:
        return {
            "input_size": np.int64(self.input_size),
            "seed": np.int64(self.seed),
            "params": np.array([
                self.params.num_columns, self.params.active_count, self.params.potential_fraction,
                self.params.connected_threshold, self.params.permanence_inc,
                self.params.permanence_dec, self.params.duty_cycle_period,
                self.params.boost_strength], dtype=np.float64),
            "potential": self.potential,
            "permanences": self.permanences,
            "boost": self.boost,
            "active_duty": self.active_duty,
            "overlap_duty": self.overlap_duty,
            "iteration": np.int64(self.iteration),
        }

    @classmethod
    def from_state(cls, state: dict) -> "SpatialPooler":
        v = state["params"]
        params = SpatialPoolerParams(int(v[0]), int(v[1]), float(v[2]), float(v[3]), float(v[4]),
                                     float(v[5]), int(v[6]), float(v[7]))
        sp = cls.__new__(cls)
        sp.input_size = int(state["input_size"])
        sp.seed = int(state["seed"])
        sp.params = params
        sp.potential = np.array(state["potential"], dtype=bool)
        sp.permanences = np.array(state["permanences"], dtype=np.float64)
        sp.boost = np.array(state["boost"], dtype=np.float64)
        sp.active_duty = np.array(state["active_duty"], dtype=np.float64)
        sp.overlap_duty = np.array(state["overlap_duty"], dtype=np.float64)
        sp.iteration = int(state["iteration"])
        sp._refresh_connected()
        return sp
