"""
k-fold cross-validation residuals of kernel interpolants on a mini-batch.

All folds are served from a single inverse ``W = (K + lam I)^-1``: with
``c = W f``, the validation residuals of fold ``V`` solve ``W[V, V] e_V = c_V``
(Rippa's formula ``e_i = c_i / W_ii`` when every fold is a singleton).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .kernels import KernelSpec, _profile, radial_derivative_over_r
from .layer import FirstLayer

_MAX_COND = 1.0 / np.finfo(float).eps


class NumericalError(ArithmeticError):
    """A linear solve or an iteration produced unusable numbers."""

    def __init__(self, message: str, condition: float | None = None):
        super().__init__(message)
        self.condition = condition


@dataclass(frozen=True)
class FoldPlan:
    """Partition of ``range(batch_size)`` into ``k`` validation folds."""

    batch_size: int
    folds: tuple[np.ndarray, ...]

    @property
    def k(self) -> int:
        return len(self.folds)

    def permuted(self, order) -> "FoldPlan":
        return FoldPlan(self.batch_size, tuple(self.folds[i] for i in order))


@dataclass(frozen=True)
class CvLossValue:
    loss: float
    residuals: np.ndarray


def make_folds(n_batch: int, k: int, rng: np.random.Generator) -> FoldPlan:
    """Random partition into ``k`` folds whose sizes differ by at most one."""
    if not 1 < k <= n_batch:
        raise ValueError(f"fold count must satisfy 1 < k <= {n_batch}, got {k}")
    perm = rng.permutation(n_batch)
    folds = tuple(np.sort(f) for f in np.array_split(perm, k))
    return FoldPlan(n_batch, folds)


def _as_layer_matrix(layer, d: int) -> np.ndarray:
    if layer is None:
        return np.eye(d)
    A = layer.matrix if isinstance(layer, FirstLayer) else np.asarray(layer, dtype=float)
    if A.ndim != 2 or A.shape[1] != d:
        raise ValueError(f"layer shape {A.shape} does not act on {d}-dimensional points")
    return A


def _check_inputs(X, f, plan):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    f = np.asarray(f, dtype=float).ravel()
    if X.shape[0] != f.shape[0]:
        raise ValueError(f"{X.shape[0]} points but {f.shape[0]} targets")
    if X.shape[0] != plan.batch_size:
        raise ValueError(f"fold plan is for {plan.batch_size} points, batch has {X.shape[0]}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(f))):
        raise ValueError("batch contains non-finite values")
    return X, f


def _forward(spec, A, X, f, plan, lam):
    diff = X[:, None, :] - X[None, :, :]
    diff_t = diff @ A.T
    r = np.sqrt(np.einsum("ijk,ijk->ij", diff_t, diff_t))
    K = _profile(spec.family, spec.length_scale * r)
    K[np.diag_indices_from(K)] += lam
    try:
        chol = linalg.cho_factor(K, lower=True, check_finite=False)
        W = linalg.cho_solve(chol, np.eye(len(f)), check_finite=False)
    except linalg.LinAlgError:
        cond = np.linalg.cond(K)
        raise NumericalError(
            f"regularized Gram matrix is not positive definite (cond ~ {cond:.3e}, lambda={lam:g})", cond
        ) from None
    W = 0.5 * (W + W.T)
    if not np.all(np.isfinite(W)):
        raise NumericalError("inverse Gram matrix is not finite")
    cond = np.linalg.norm(K, 1) * np.linalg.norm(W, 1)
    if cond > _MAX_COND:
        raise NumericalError(f"regularized Gram matrix is numerically singular (cond ~ {cond:.3e})", cond)
    c = W @ f

    e = np.zeros_like(f)
    groups = []
    # folds of equal size are solved as one stacked system
    for size in sorted({len(v) for v in plan.folds}):
        idx = np.stack([v for v in plan.folds if len(v) == size])
        M = W[idx[:, :, None], idx[:, None, :]]
        ev = np.linalg.solve(M, c[idx][..., None])[..., 0]
        e[idx] = ev
        groups.append((idx, M, ev))
    return diff, diff_t, r, W, c, e, groups


def era_residuals(spec: KernelSpec, layer, X_batch, f_batch, plan: FoldPlan, lam: float = 0.0) -> CvLossValue:
    """Cross-validation residuals ``f_i - s_{-fold(i)}(x_i)`` for every batch point.

    Parameters
    ----------
    spec : KernelSpec
        Base radial kernel.
    layer : FirstLayer, ndarray or None
        First-layer matrix; ``None`` is the identity.
    X_batch, f_batch : ndarray
        Batch inputs ``(n, d)`` and targets ``(n,)``.
    plan : FoldPlan
        Validation folds.
    lam : float
        Tikhonov shift added to the batch Gram matrix.

    Returns
    -------
    CvLossValue
        Signed residuals and their squared 2-norm.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    X, f = _check_inputs(X_batch, f_batch, plan)
    A = _as_layer_matrix(layer, X.shape[1])
    e = _forward(spec, A, X, f, plan, lam)[5]
    return CvLossValue(float(np.dot(e, e)), e)


def cv_loss_grad(spec: KernelSpec, layer, X_batch, f_batch, plan: FoldPlan, lam: float = 0.0):
    """Loss of :func:`era_residuals` and its gradient with respect to the layer matrix.

    The gradient is obtained by reverse-mode differentiation through the fold
    solves, ``c = W f`` and ``W = K^-1``, followed by the chain rule through
    ``K_ij = phi(||A (x_i - x_j)||)``.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    X, f = _check_inputs(X_batch, f_batch, plan)
    A = _as_layer_matrix(layer, X.shape[1])
    diff, diff_t, r, W, c, e, groups = _forward(spec, A, X, f, plan, lam)

    W_bar = np.zeros_like(W)
    c_bar = np.zeros_like(c)
    for idx, M, ev in groups:
        # e_V = M^-1 c_V  =>  c_bar_V = M^-1 (2 e_V),  M_bar = -z e_V^T
        z = np.linalg.solve(M, 2.0 * ev[..., None])[..., 0]
        c_bar[idx] = z
        W_bar[idx[:, :, None], idx[:, None, :]] -= z[:, :, None] * ev[:, None, :]
    W_bar += np.outer(c_bar, f)
    K_bar = -W @ W_bar @ W
    G = 0.5 * (K_bar + K_bar.T)

    C = G * radial_derivative_over_r(spec, r)
    np.fill_diagonal(C, 0.0)
    # sum over ordered pairs of C_ij (A d_ij) d_ij^T; each unordered pair appears twice
    n, d = X.shape
    grad = (C[:, :, None] * diff_t).reshape(n * n, -1).T @ diff.reshape(n * n, d)
    return CvLossValue(float(np.dot(e, e)), e), grad
