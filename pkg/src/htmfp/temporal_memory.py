"""Sequence memory: cells with distal segments that learn column transitions.

State lives in flat numpy arrays so one compiled kernel can run a whole
step.  Segments are rows of ``syn_pre`` / ``syn_perm``; an empty synapse
slot has presynaptic cell -1.  Random choices (which previous winners a
segment grows synapses to) come from a xorshift generator whose state is
part of the model, so a persisted model resumes the same random stream.
"""
from __future__ import annotations

from dataclasses import dataclass, astuple

import numpy as np
from numba import njit

from .sdr import SDR, SDRError


@dataclass(frozen=True)
class TemporalMemoryParams:
    cells_per_column: int = 8
    activation_threshold: int = 7
    min_threshold: int = 4
    initial_permanence: float = 0.21
    connected_permanence: float = 0.5
    permanence_inc: float = 0.1
    permanence_dec: float = 0.1
    predicted_decrement: float = 0.004
    max_new_synapses: int = 16
    max_synapses_per_segment: int = 32
    max_segments_per_cell: int = 16


@njit(cache=True)
def _rand(rng):
    x = rng[0]
    x ^= x << np.uint64(13)
    x ^= x >> np.uint64(7)
    x ^= x << np.uint64(17)
    rng[0] = x
    return x


@njit(cache=True)
def _adapt(s, syn_pre, syn_perm, prev_active, inc, dec):
    for j in range(syn_pre.shape[1]):
        p = syn_pre[s, j]
        if p < 0:
            continue
        if prev_active[p]:
            v = syn_perm[s, j] + inc
        else:
            v = syn_perm[s, j] - dec
        if v > 1.0:
            v = 1.0
        if v <= 0.0:
            syn_pre[s, j] = -1
            syn_perm[s, j] = 0.0
        else:
            syn_perm[s, j] = v


@njit(cache=True)
def _grow(s, syn_pre, syn_perm, prev_w, n_prev_w, n_desired, rng, init_perm):
    m = syn_pre.shape[1]
    cand = np.empty(n_prev_w, dtype=np.int32)
    nc = 0
    for i in range(n_prev_w):
        w = prev_w[i]
        present = False
        for j in range(m):
            if syn_pre[s, j] == w:
                present = True
                break
        if not present:
            cand[nc] = w
            nc += 1
    n = min(n_desired, nc)
    if n <= 0:
        return
    free = 0
    for j in range(m):
        if syn_pre[s, j] < 0:
            free += 1
    # full segment: drop the weakest synapses to make room
    while free < n:
        weakest = -1
        low = 2.0
        for j in range(m):
            if syn_pre[s, j] >= 0 and syn_perm[s, j] < low:
                low = syn_perm[s, j]
                weakest = j
        syn_pre[s, weakest] = -1
        syn_perm[s, weakest] = 0.0
        free += 1
    slot = 0
    for i in range(n):
        r = i + int(_rand(rng) % np.uint64(nc - i))
        tmp = cand[i]
        cand[i] = cand[r]
        cand[r] = tmp
        while syn_pre[s, slot] >= 0:
            slot += 1
        syn_pre[s, slot] = cand[i]
        syn_perm[s, slot] = init_perm


@njit(cache=True)
def _create_segment(cell, seg_cell, syn_pre, syn_perm, seg_last, seg_nac, seg_nap,
                    cell_segs, cell_nseg, counters, max_per_cell):
    it = counters[1]
    if cell_nseg[cell] >= max_per_cell:
        # recycle the least recently used segment of this cell
        s = cell_segs[cell, 0]
        for i in range(1, cell_nseg[cell]):
            cand = cell_segs[cell, i]
            if seg_last[cand] < seg_last[s]:
                s = cand
    else:
        s = counters[0]
        counters[0] += 1
        seg_cell[s] = cell
        cell_segs[cell, cell_nseg[cell]] = s
        cell_nseg[cell] += 1
    for j in range(syn_pre.shape[1]):
        syn_pre[s, j] = -1
        syn_perm[s, j] = 0.0
    seg_nac[s] = 0
    seg_nap[s] = 0
    seg_last[s] = it
    return s


@njit(cache=True)
def _tm_step(active_cols, learn, k_cells, params, seg_cell, syn_pre, syn_perm, seg_last,
             seg_nac, seg_nap, cell_segs, cell_nseg, counters, active_cells, winners, rng,
             pred_out):
    act_thr = int(params[0])
    min_thr = int(params[1])
    init_perm = params[2]
    connected = params[3]
    inc = params[4]
    dec = params[5]
    pred_dec = params[6]
    max_new = int(params[7])
    max_per_cell = int(params[9])

    n_cells = active_cells.shape[0]
    n_cols = n_cells // k_cells
    it = counters[1]
    prev_active = active_cells.copy()
    n_prev_w = counters[2]
    prev_w = winners[:n_prev_w].copy()
    active_cells[:] = 0
    n_w = 0

    col_active = np.zeros(n_cols, dtype=np.uint8)
    for c in active_cols:
        col_active[c] = 1

    for c in active_cols:
        predicted = False
        for k in range(k_cells):
            cell = c * k_cells + k
            for i in range(cell_nseg[cell]):
                if seg_nac[cell_segs[cell, i]] >= act_thr:
                    predicted = True
        if predicted:
            for k in range(k_cells):
                cell = c * k_cells + k
                cell_predicted = False
                for i in range(cell_nseg[cell]):
                    s = cell_segs[cell, i]
                    if seg_nac[s] >= act_thr:
                        cell_predicted = True
                        if learn:
                            _adapt(s, syn_pre, syn_perm, prev_active, inc, dec)
                            _grow(s, syn_pre, syn_perm, prev_w, n_prev_w,
                                  max_new - seg_nap[s], rng, init_perm)
                            seg_last[s] = it
                if cell_predicted:
                    active_cells[cell] = 1
                    winners[n_w] = cell
                    n_w += 1
        else:
            best = -1
            best_nap = -1
            for k in range(k_cells):
                cell = c * k_cells + k
                active_cells[cell] = 1
                for i in range(cell_nseg[cell]):
                    s = cell_segs[cell, i]
                    if seg_nap[s] >= min_thr and seg_nap[s] > best_nap:
                        best = s
                        best_nap = seg_nap[s]
            if best >= 0:
                winner = seg_cell[best]
                if learn:
                    _adapt(best, syn_pre, syn_perm, prev_active, inc, dec)
                    _grow(best, syn_pre, syn_perm, prev_w, n_prev_w, max_new - best_nap,
                          rng, init_perm)
                    seg_last[best] = it
            else:
                winner = c * k_cells
                for k in range(1, k_cells):
                    if cell_nseg[c * k_cells + k] < cell_nseg[winner]:
                        winner = c * k_cells + k
                if learn and n_prev_w > 0:
                    s = _create_segment(winner, seg_cell, syn_pre, syn_perm, seg_last, seg_nac,
                                        seg_nap, cell_segs, cell_nseg, counters, max_per_cell)
                    _grow(s, syn_pre, syn_perm, prev_w, n_prev_w, min(max_new, n_prev_w),
                          rng, init_perm)
            winners[n_w] = winner
            n_w += 1

    n_seg = counters[0]
    if learn and pred_dec > 0.0:
        for s in range(n_seg):
            if seg_nap[s] >= min_thr and col_active[seg_cell[s] // k_cells] == 0:
                _adapt(s, syn_pre, syn_perm, prev_active, -pred_dec, 0.0)

    m = syn_pre.shape[1]
    pred_out[:] = 0
    for s in range(n_seg):
        nac = 0
        nap = 0
        for j in range(m):
            p = syn_pre[s, j]
            if p >= 0 and active_cells[p]:
                nap += 1
                if syn_perm[s, j] >= connected:
                    nac += 1
        seg_nac[s] = nac
        seg_nap[s] = nap
        if nac >= act_thr:
            pred_out[seg_cell[s] // k_cells] = 1
    counters[1] = it + 1
    counters[2] = n_w


class TemporalMemory:
    def __init__(self, num_columns: int, params: TemporalMemoryParams = TemporalMemoryParams(),
                 seed: int = 0, capacity: int = 1024):
        if num_columns <= 0 or params.cells_per_column <= 0:
            raise ValueError("num_columns and cells_per_column must be positive")
        if params.min_threshold > params.activation_threshold:
            raise ValueError("min_threshold cannot exceed activation_threshold")
        if params.max_new_synapses > params.max_synapses_per_segment:
            raise ValueError("max_new_synapses cannot exceed max_synapses_per_segment")
        self.num_columns = int(num_columns)
        self.params = params
        n_cells = num_columns * params.cells_per_column
        m = params.max_synapses_per_segment
        self.seg_cell = np.zeros(capacity, dtype=np.int32)
        self.syn_pre = np.full((capacity, m), -1, dtype=np.int32)
        self.syn_perm = np.zeros((capacity, m), dtype=np.float64)
        self.seg_last = np.zeros(capacity, dtype=np.int64)
        self.seg_nac = np.zeros(capacity, dtype=np.int32)
        self.seg_nap = np.zeros(capacity, dtype=np.int32)
        self.cell_segs = np.full((n_cells, params.max_segments_per_cell), -1, dtype=np.int32)
        self.cell_nseg = np.zeros(n_cells, dtype=np.int32)
        # segments in use, iteration, winner count
        self.counters = np.zeros(3, dtype=np.int64)
        self.active = np.zeros(n_cells, dtype=np.uint8)
        self.winners = np.zeros(n_cells, dtype=np.int32)
        self.rng = np.array([(seed * 0x9E3779B97F4A7C15 + 1) % 2**64 | 1], dtype=np.uint64)
        self._prediction = np.zeros(num_columns, dtype=np.uint8)
        self._kparams = np.array(astuple(params)[1:], dtype=np.float64)

    @property
    def num_cells(self) -> int:
        return self.num_columns * self.params.cells_per_column

    @property
    def num_segments(self) -> int:
        return int(self.counters[0])

    @property
    def active_cells(self) -> np.ndarray:
        return np.flatnonzero(self.active)

    @property
    def winner_cells(self) -> np.ndarray:
        return np.sort(self.winners[: self.counters[2]])

    @property
    def predictive_cells(self) -> np.ndarray:
        n = self.num_segments
        hot = self.seg_nac[:n] >= self.params.activation_threshold
        return np.unique(self.seg_cell[:n][hot])

    def permanences(self) -> np.ndarray:
        """Permanences of every live synapse."""
        n = self.num_segments
        return self.syn_perm[:n][self.syn_pre[:n] >= 0]

    def prediction(self) -> SDR:
        return SDR(self.num_columns, np.flatnonzero(self._prediction).astype(np.int64),
                   validate=False)

    def _reserve(self, extra: int):
        need = self.num_segments + extra
        cap = self.seg_cell.shape[0]
        if need <= cap:
            return
        new_cap = max(need, 2 * cap)
        grow = new_cap - cap
        m = self.syn_pre.shape[1]
        self.seg_cell = np.concatenate([self.seg_cell, np.zeros(grow, np.int32)])
        self.syn_pre = np.concatenate([self.syn_pre, np.full((grow, m), -1, np.int32)])
        self.syn_perm = np.concatenate([self.syn_perm, np.zeros((grow, m))])
        self.seg_last = np.concatenate([self.seg_last, np.zeros(grow, np.int64)])
        self.seg_nac = np.concatenate([self.seg_nac, np.zeros(grow, np.int32)])
        self.seg_nap = np.concatenate([self.seg_nap, np.zeros(grow, np.int32)])

    def compute(self, active_columns: SDR, learn: bool = True) -> SDR:
        """Feed one step of active columns; return the column prediction for the next step."""
        if active_columns.size != self.num_columns:
            raise SDRError(f"input size {active_columns.size} != {self.num_columns} columns")
        self._reserve(len(active_columns))
        _tm_step(active_columns.active, learn, self.params.cells_per_column, self._kparams,
                 self.seg_cell, self.syn_pre, self.syn_perm, self.seg_last, self.seg_nac,
                 self.seg_nap, self.cell_segs, self.cell_nseg, self.counters, self.active,
                 self.winners, self.rng, self._prediction)
        return self.prediction()

    def reset(self):
        """Forget the current sequence context; learned segments are kept."""
        self.active[:] = 0
        self.counters[2] = 0
        self.seg_nac[:] = 0
        self.seg_nap[:] = 0
        self._prediction[:] = 0

    # -- persistence -----------------------------------------------------
    def state_dict(self) -> dict:
        n = self.num_segments
        return {
            "num_columns": np.int64(self.num_columns),
            "params": np.array(astuple(self.params), dtype=np.float64),
            "seg_cell": self.seg_cell[:n], "syn_pre": self.syn_pre[:n],
            "syn_perm": self.syn_perm[:n], "seg_last": self.seg_last[:n],
            "seg_nac": self.seg_nac[:n], "seg_nap": self.seg_nap[:n],
            "cell_segs": self.cell_segs, "cell_nseg": self.cell_nseg,
            "counters": self.counters, "active": self.active, "winners": self.winners,
            "rng": self.rng, "prediction": self._prediction,
        }

    @classmethod
    def from_state(cls, state: dict) -> "TemporalMemory":
        v = state["params"]
        ints = (0, 1, 2, 8, 9, 10)
        params = TemporalMemoryParams(*[int(x) if i in ints else float(x) for i, x in enumerate(v)])
        tm = cls(int(state["num_columns"]), params, capacity=max(1, len(state["seg_cell"])))
        n = len(state["seg_cell"])
        for name in ("seg_cell", "syn_pre", "syn_perm", "seg_last", "seg_nac", "seg_nap"):
            getattr(tm, name)[:n] = state[name]
        for name in ("cell_segs", "cell_nseg", "counters", "active", "winners", "rng"):
            getattr(tm, name)[...] = state[name]
        tm._prediction[:] = state["prediction"]
        return tm
