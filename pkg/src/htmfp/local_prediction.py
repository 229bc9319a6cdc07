"""Per-resource failure prediction with a one-class SVM.

The SVM is trained on anomaly-flag vectors from failure-free operation only.
Binary flag vectors repeat a lot, so identical training rows are merged and
carried as multiplicities: a row seen ``c`` times gets the box bound
``c / (nu * l)``, which yields the same decision function as the expanded
problem at a fraction of the cost.

Dual problem solved here::

    min_a  1/2 a^T Q a    s.t.  0 <= a_i <= C_i,  sum_i a_i = 1
    f(z) = sum_i a_i k(x_i, z) - rho
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


# free support vectors sit on the boundary up to solver precision
BOUNDARY_TOL = 1e-8


class TrainingDataError(ValueError):
    pass


@dataclass(frozen=True)
class AnomalyFeatureVector:
    resource: str
    timestamp: float
    flags: tuple
    faulty: bool = False


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass
class OneClassSvmModel:
    support_vectors: np.ndarray
    alphas: np.ndarray
    rho: float
    gamma: float
    nu: float
    upper: np.ndarray = field(repr=False)
    # gradient Q a over the training rows, kept for KKT diagnostics
    gradient: np.ndarray = field(repr=False)
    train_rows: np.ndarray = field(repr=False)
    train_counts: np.ndarray = field(repr=False)
    sv_index: np.ndarray = field(repr=False)
    iterations: int = 0

    @property
    def dim(self) -> int:
        return self.support_vectors.shape[1]

    def decision(self, z) -> np.ndarray | float:
        z = np.asarray(z, dtype=np.float64)
        single = z.ndim == 1
        z2 = np.atleast_2d(z)
        if z2.shape[1] != self.dim:
            raise ValueError(f"feature dimension {z2.shape[1]} != model dimension {self.dim}")
        f = rbf_kernel(z2, self.support_vectors, self.gamma) @ self.alphas - self.rho
        return float(f[0]) if single else f

    def is_outlier(self, z) -> np.ndarray | bool:
        f = self.decision(z)
        return f < -BOUNDARY_TOL if np.ndim(f) else bool(f < -BOUNDARY_TOL)

    def kkt_residual(self) -> float:
        """Largest violation of the optimality conditions over the training rows."""
        a = self.train_alphas()
        g = self.gradient
        at_zero = a <= 1e-12
        at_upper = a >= self.upper - 1e-12
        free = ~(at_zero | at_upper)
        viol = np.zeros_like(g)
        viol[at_zero] = np.maximum(0.0, self.rho - g[at_zero])
        viol[at_upper] = np.maximum(0.0, g[at_upper] - self.rho)
        viol[free] = np.abs(g[free] - self.rho)
        return float(viol.max())

    def train_alphas(self) -> np.ndarray:
        a = np.zeros(len(self.train_rows))
        a[self.sv_index] = self.alphas
        return a

    def training_outlier_fraction(self) -> float:
        out = self.is_outlier(self.train_rows)
        return float(self.train_counts[out].sum() / self.train_counts.sum())


def _as_matrix(vectors) -> np.ndarray:
    if len(vectors) and isinstance(vectors[0], AnomalyFeatureVector):
        if any(v.faulty for v in vectors):
            raise TrainingDataError("training vectors must come from failure-free executions")
        dims = {len(v.flags) for v in vectors}
        if len(dims) != 1:
            raise TrainingDataError(f"inconsistent feature dimensions {sorted(dims)}")
        return np.array([v.flags for v in vectors], dtype=np.float64)
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise TrainingDataError("training data must be a 2-D array of feature vectors")
    return x


def solve_dual(q_col, diag: np.ndarray, upper: np.ndarray, tol: float = 1e-9,
               max_iter: int = 1_000_000):
    """SMO with second-order working-set selection for the one-class dual.

    ``q_col(i)`` returns column i of the kernel matrix.  Returns (alphas,
    gradient, iterations).
    """
    n = upper.size
    alpha = np.zeros(n)
    remaining = 1.0
    for i in range(n):
        alpha[i] = min(upper[i], remaining)
        remaining -= alpha[i]
        if remaining <= 0:
            break
    grad = np.zeros(n)
    for i in np.flatnonzero(alpha):
        grad += alpha[i] * q_col(i)

    it = 0
    while it < max_iter:
        up = alpha < upper
        low = alpha > 0
        if not up.any() or not low.any():
            break
        neg = -grad
        i = int(np.argmax(np.where(up, neg, -np.inf)))
        gmax = neg[i]
        gmin = float(np.min(neg[low]))
        if gmax - gmin < tol:
            break
        qi = q_col(i)
        b = gmax + grad
        a = diag[i] + diag - 2.0 * qi
        a = np.where(a > 0, a, 1e-12)
        score = np.where(low & (b > 0), -(b * b) / a, np.inf)
        j = int(np.argmin(score))
        if not np.isfinite(score[j]):
            break
        delta = b[j] / a[j]
        delta = min(delta, upper[i] - alpha[i], alpha[j])
        if delta <= 0:
            break
        qj = q_col(j)
        alpha[i] += delta
        alpha[j] -= delta
        # snap to the box so bound membership stays exact
        if upper[i] - alpha[i] < 1e-15:
            alpha[i] = upper[i]
        if alpha[j] < 1e-15:
            alpha[j] = 0.0
        grad += delta * (qi - qj)
        it += 1
    return alpha, grad, it


def _rho(alpha: np.ndarray, grad: np.ndarray, upper: np.ndarray) -> float:
    at_zero = alpha <= 1e-12
    at_upper = alpha >= upper - 1e-12
    free = ~(at_zero | at_upper)
    if free.any():
        return float(grad[free].mean())
    lo = grad[at_upper].max() if at_upper.any() else -np.inf
    hi = grad[at_zero].min() if at_zero.any() else np.inf
    if np.isfinite(lo) and np.isfinite(hi):
        return float(0.5 * (lo + hi))
    return float(lo if np.isfinite(lo) else hi)


def train_ocsvm(vectors: Sequence, nu: float = 0.05, gamma: float | None = None,
                tol: float = 1e-9, dense_limit: int = 4000) -> OneClassSvmModel:
    """Fit a one-class SVM with an RBF kernel; gamma defaults to 1/dimension."""
    if not 0.0 < nu <= 1.0:
        raise ValueError(f"nu must lie in (0, 1], got {nu}")
    x = _as_matrix(vectors)
    if x.shape[0] < 10:
        raise TrainingDataError(f"need at least 10 training vectors, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise TrainingDataError("training vectors contain non-finite values")
    gamma = 1.0 / x.shape[1] if gamma is None else float(gamma)
    rows, counts = np.unique(x, axis=0, return_counts=True)
    ell = x.shape[0]
    upper = counts / (nu * ell)
    diag = np.ones(len(rows))
    if len(rows) <= dense_limit:
        q = rbf_kernel(rows, rows, gamma)

        def q_col(i):
            return q[:, i]
    else:
        def q_col(i):
            return rbf_kernel(rows, rows[i:i + 1], gamma)[:, 0]
    alpha, grad, it = solve_dual(q_col, diag, upper, tol=tol)
    rho = _rho(alpha, grad, upper)
    sv = np.flatnonzero(alpha > 0)
    return OneClassSvmModel(rows[sv], alpha[sv], rho, gamma, nu, upper, grad, rows, counts, sv, it)


class LocalPredictor:
    """Reports a resource failure once the SVM has flagged n consecutive ticks."""

    def __init__(self, model: OneClassSvmModel, n: int = 1):
        if n < 1:
            raise ValueError("n must be at least 1")
        self.model = model
        self.n = n
        self.streak = 0

    def step(self, features) -> bool:
        if isinstance(features, AnomalyFeatureVector):
            features = features.flags
        return self.observe(bool(self.model.is_outlier(np.asarray(features, dtype=np.float64))))

    def observe(self, outlier: bool) -> bool:
        self.streak = min(self.streak + 1, self.n) if outlier else 0
        return self.streak >= self.n

    def reset(self):
        self.streak = 0


def confirm_streaks(outliers: np.ndarray, n: int) -> np.ndarray:
    """Vectorised local verdicts for a (ticks, resources) outlier matrix."""
    outliers = np.asarray(outliers, dtype=bool)
    out = np.zeros_like(outliers)
    streak = np.zeros(outliers.shape[1:], dtype=np.int64)
    for t in range(outliers.shape[0]):
        streak = np.where(outliers[t], np.minimum(streak + 1, n), 0)
        out[t] = streak >= n
    return out


# -- persistence ---------------------------------------------------------
def model_to_arrays(model: OneClassSvmModel) -> dict:
    return {
        "support_vectors": model.support_vectors, "alphas": model.alphas,
        "rho": np.float64(model.rho), "gamma": np.float64(model.gamma),
        "nu": np.float64(model.nu), "upper": model.upper, "gradient": model.gradient,
        "train_rows": model.train_rows, "train_counts": model.train_counts,
        "sv_index": model.sv_index, "iterations": np.int64(model.iterations),
    }


def model_from_arrays(d: dict) -> OneClassSvmModel:
    return OneClassSvmModel(np.asarray(d["support_vectors"]), np.asarray(d["alphas"]),
                            float(d["rho"]), float(d["gamma"]), float(d["nu"]),
                            np.asarray(d["upper"]), np.asarray(d["gradient"]),
                            np.asarray(d["train_rows"]), np.asarray(d["train_counts"]),
                            np.asarray(d["sv_index"]), int(d["iterations"]))
