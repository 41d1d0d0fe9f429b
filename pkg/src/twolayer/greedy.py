"""
Greedy kernel interpolation in the Newton basis (matrix-free VKOGA style).

For the candidate set ``X`` the fit keeps, for every candidate, the values of
the Newton basis functions selected so far, the squared power function and
the residual. Selecting ``x_n`` adds

    v_n(x) = (k(x, x_n) - sum_{j<n} v_j(x) v_j(x_n)) / sqrt(p(x_n))

after which ``p <- p - v_n^2`` and ``r <- r - c_n v_n`` with
``c_n = r(x_n) / sqrt(p(x_n))``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg
from scipy.spatial import cKDTree

from .cv import NumericalError
from .kernels import KernelSpec, gram_matrix
from .layer import FirstLayer, apply_layer

CRITERIA = ("p_greedy", "f_greedy", "f_over_p_greedy")


@dataclass
class GreedyConfig:
    criterion: str = "f_greedy"
    max_centers: int = 100
    residual_tolerance: float = 0.0
    power_stability_floor: float = 1e-13
    lam: float = 0.0

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise ValueError(f"criterion must be one of {CRITERIA}, got {self.criterion!r}")
        if self.max_centers < 1:
            raise ValueError("max_centers must be at least 1")
        if self.residual_tolerance < 0 or self.power_stability_floor < 0 or self.lam < 0:
            raise ValueError("tolerances and lam must be nonnegative")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class GreedyTrace:
    selected_index: list[int] = field(default_factory=list)
    indicator: list[float] = field(default_factory=list)
    max_residual: list[float] = field(default_factory=list)
    max_power: list[float] = field(default_factory=list)
    stop_reason: str = "max_centers"

    def rows(self):
        return list(zip(range(1, len(self.selected_index) + 1), self.selected_index,
                        self.indicator, self.max_residual, self.max_power))


@dataclass
class GreedyModel:
    """A fitted greedy kernel expansion ``s(x) = sum_i alpha_i k(A x, A x_i)``.

    ``newton_triangle`` is the lower-triangular ``L`` with
    ``K(X_n, X_n) + lam I = L L^T``; ``newton_coefficients`` are the
    expansion coefficients in the Newton basis, ``coefficients = L^-T c``.
    """

    kernel: KernelSpec
    layer: FirstLayer | None
    center_indices: np.ndarray
    centers: np.ndarray
    newton_triangle: np.ndarray
    newton_coefficients: np.ndarray
    coefficients: np.ndarray
    trace: GreedyTrace
    config: GreedyConfig

    @property
    def n_centers(self) -> int:
        return len(self.center_indices)

    def predict(self, X) -> np.ndarray:
        return predict(self, self.kernel, self.layer, X)

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.to_dict(),
            "layer": None if self.layer is None else self.layer.to_dict(),
            "center_indices": [int(i) for i in self.center_indices],
            "centers": self.centers.tolist(),
            "coefficients": self.coefficients.tolist(),
            "newton_coefficients": self.newton_coefficients.tolist(),
            "config": self.config.to_dict(),
            "stop_reason": self.trace.stop_reason,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GreedyModel":
        kernel = KernelSpec.from_dict(d["kernel"])
        layer = None if d.get("layer") is None else FirstLayer.from_dict(d["layer"], provenance="loaded")
        centers = np.asarray(d["centers"], dtype=float)
        config = GreedyConfig(**d["config"])
        K = _kernel(kernel, layer, centers, centers)
        K[np.diag_indices_from(K)] += config.lam
        L = np.linalg.cholesky(K)
        return cls(kernel, layer, np.asarray(d["center_indices"], dtype=int), centers, L,
                   np.asarray(d["newton_coefficients"], dtype=float),
                   np.asarray(d["coefficients"], dtype=float), GreedyTrace(stop_reason=d.get("stop_reason", "")),
                   config)

    def save(self, path, extra: dict | None = None) -> None:
        payload = self.to_dict()
        if extra:
            payload.update(extra)
        Path(path).write_text(json.dumps(payload, indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "GreedyModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _kernel(spec, layer, X, Y):
    if layer is not None:
        X, Y = apply_layer(layer, X), apply_layer(layer, Y)
    return gram_matrix(spec, X, Y)


def fit_greedy(spec: KernelSpec, layer: FirstLayer | None, X, f, config: GreedyConfig) -> GreedyModel:
    """Select centers from ``X`` greedily and build the kernel expansion.

    Parameters
    ----------
    spec : KernelSpec
    layer : FirstLayer or None
        First layer; ``None`` means the plain base kernel.
    X : ndarray, shape (N, d)
        Candidate (training) points.
    f : ndarray, shape (N,)
        Targets.
    config : GreedyConfig

    Returns
    -------
    GreedyModel
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    f = np.asarray(f, dtype=float).ravel()
    N = X.shape[0]
    if N < 1:
        raise ValueError("need at least one candidate point")
    if f.shape[0] != N:
        raise ValueError(f"{N} points but {f.shape[0]} targets")
    if not np.all(np.isfinite(f)):
        raise ValueError("targets must be finite")
    Z = X if layer is None else apply_layer(layer, X)

    n_max = min(config.max_centers, N)
    diag = np.ones(N) + config.lam  # k(x, x) = phi(0) = 1
    p = diag.copy()
    r = f.copy()
    V = np.zeros((N, n_max))
    eligible = np.ones(N, dtype=bool)
    selected: list[int] = []
    newton_c: list[float] = []
    trace = GreedyTrace()

    for n in range(n_max):
        eligible &= p > config.power_stability_floor * diag
        if not eligible.any():
            if n == 0:
                raise NumericalError("no candidate has power above the stability floor")
            trace.stop_reason = "no_eligible_candidate"
            break
        power = np.sqrt(np.maximum(p, 0.0))
        if config.criterion == "p_greedy":
            eta = power
        elif config.criterion == "f_greedy":
            eta = np.abs(r)
        else:
            eta = np.abs(r) / np.where(eligible, power, 1.0)
        eta = np.where(eligible, eta, -np.inf)
        i = int(np.argmax(eta))
        if eta[i] <= config.residual_tolerance:
            trace.stop_reason = "tolerance"
            break

        col = gram_matrix(spec, Z, Z[i:i + 1])[:, 0]
        col[i] += config.lam
        v = (col - V[:, :n] @ V[i, :n]) / power[i]
        c = r[i] / power[i]
        V[:, n] = v
        p -= v * v
        r -= c * v
        if not (np.all(np.isfinite(v)) and np.isfinite(c)):
            raise NumericalError(f"non-finite Newton update at step {n + 1} (candidate {i})")
        eligible[i] = False
        selected.append(i)
        newton_c.append(c)

        trace.selected_index.append(i)
        trace.indicator.append(float(eta[i]))
        trace.max_residual.append(float(np.max(np.abs(r))))
        trace.max_power.append(float(np.sqrt(np.max(np.maximum(p, 0.0)))))
    else:
        trace.stop_reason = "max_centers"

    idx = np.asarray(selected, dtype=int)
    L = np.array(V[idx, :len(idx)])
    L[np.triu_indices_from(L, 1)] = 0.0  # exact zeros above the diagonal
    c = np.asarray(newton_c)
    alpha = linalg.solve_triangular(L.T, c, lower=False) if len(idx) else c
    return GreedyModel(spec, layer, idx, X[idx].copy(), L, c, alpha, trace, config)


def predict(model: GreedyModel, spec: KernelSpec, layer: FirstLayer | None, X_eval) -> np.ndarray:
    """Evaluate ``sum_i alpha_i k(A x, A x_i)``."""
    X_eval = _check_eval(model, X_eval)
    if model.n_centers == 0:
        return np.zeros(X_eval.shape[0])
    return _kernel(spec, layer, X_eval, model.centers) @ model.coefficients


def newton_values(model: GreedyModel, spec, layer, X_eval) -> np.ndarray:
    """Newton basis values ``(M, n)`` at new points: ``L^-1 k(X_n, x)``."""
    X_eval = _check_eval(model, X_eval)
    if model.n_centers == 0:
        return np.zeros((X_eval.shape[0], 0))
    Kx = _kernel(spec, layer, X_eval, model.centers)
    return linalg.solve_triangular(model.newton_triangle, Kx.T, lower=True).T


def predict_newton(model: GreedyModel, spec, layer, X_eval) -> np.ndarray:
    """Same predictor as :func:`predict`, evaluated through the Newton basis."""
    return newton_values(model, spec, layer, X_eval) @ model.newton_coefficients


def staged_predict(model: GreedyModel, spec, layer, X_eval) -> np.ndarray:
    """Predictions ``(M, n)``; column ``j`` uses the first ``j + 1`` centers."""
    return np.cumsum(newton_values(model, spec, layer, X_eval) * model.newton_coefficients, axis=1)


def power_values(model: GreedyModel, spec, layer, X_eval) -> np.ndarray:
    """Power function ``sqrt(k(x, x) - sum_j v_j(x)^2)`` at new points.

    Negative squared values from round-off (``>= -1e-12``) are clamped to 0,
    as are squared values below the rounding level ``4 n eps`` of the sum.
    """
    V = newton_values(model, spec, layer, X_eval)
    p2 = 1.0 - np.einsum("ij,ij->i", V, V)
    if np.any(p2 < -1e-12):
        raise NumericalError(f"squared power function is negative ({p2.min():.3e})")
    p2[p2 <= 4 * max(model.n_centers, 1) * np.finfo(float).eps] = 0.0
    return np.sqrt(p2)


def _check_eval(model, X_eval):
    X_eval = np.atleast_2d(np.asarray(X_eval, dtype=float))
    if X_eval.shape[1] != model.centers.shape[1]:
        raise ValueError(f"evaluation points have {X_eval.shape[1]} columns, model expects {model.centers.shape[1]}")
    return X_eval


def fill_distance(X, centers) -> float:
    """Largest distance from a candidate to its nearest center."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if X.size == 0 or centers.size == 0:
        raise ValueError("candidates and centers must be nonempty")
    if X.shape[1] != centers.shape[1]:
        raise ValueError("dimension mismatch between candidates and centers")
    dist, _ = cKDTree(centers).query(X)
    return float(np.max(dist))
