"""Mini-batch Adam optimization of the first layer on cross-validation loss."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .cv import NumericalError, cv_loss_grad, make_folds
from .kernels import KernelSpec
from .layer import FirstLayer

log = logging.getLogger(__name__)

INITS = ("identity", "scaled_identity", "loaded")


@dataclass
class OptimConfig:
    learning_rate: float = 5e-3
    batch_size: int = 64
    max_epochs: int = 25
    k_folds: int | None = None  # None -> batch_size (leave-one-out)
    lam: float = 1e-5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    patience: int = 3
    min_rel_improvement: float = 1e-4
    seed: int = 0
    rows: int | None = None  # None -> square layer
    init: str = "identity"
    init_scale: float = 1.0
    restore_best: bool = True  # False -> return the last epoch's layer

    def __post_init__(self):
        if self.k_folds is None:
            self.k_folds = self.batch_size
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if not 1 < self.k_folds <= self.batch_size:
            raise ValueError(f"k_folds must satisfy 1 < k <= batch_size, got {self.k_folds}")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be nonnegative")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, params: np.ndarray) -> "AdamState":
        return cls(np.zeros_like(params), np.zeros_like(params), 0)


def adam_step(params: np.ndarray, grad: np.ndarray, state: AdamState, config: OptimConfig):
    """One bias-corrected Adam update. Returns ``(new_params, new_state)``."""
    grad = np.asarray(grad, dtype=float)
    if grad.shape != params.shape or state.m.shape != params.shape:
        raise ValueError(f"shape mismatch: params {params.shape}, grad {grad.shape}, state {state.m.shape}")
    b1, b2 = config.adam_beta1, config.adam_beta2
    t = state.t + 1
    m = b1 * state.m + (1.0 - b1) * grad
    v = b2 * state.v + (1.0 - b2) * grad * grad
    m_hat = m / (1.0 - b1**t)
    v_hat = v / (1.0 - b2**t)
    new = params - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    return new, AdamState(m, v, t)


@dataclass
class OptimTrace:
    epoch_loss: list[float] = field(default_factory=list)
    epoch_seconds: list[float] = field(default_factory=list)
    stop_reason: str = "max_epochs"
    best_epoch: int | None = None  # 0-based index into epoch_loss

    def rows(self):
        return [(i + 1, loss, sec) for i, (loss, sec) in enumerate(zip(self.epoch_loss, self.epoch_seconds))]


def initial_layer(d: int, config: OptimConfig, initial: FirstLayer | None = None) -> FirstLayer:
    rows = d if config.rows is None else config.rows
    if config.init == "loaded":
        if initial is None:
            raise ValueError("init='loaded' needs an initial layer")
        if initial.cols != d:
            raise ValueError(f"initial layer acts on {initial.cols} dims, data has {d}")
        return initial
    scale = config.init_scale if config.init == "scaled_identity" else 1.0
    return FirstLayer.identity(d, rows, scale)


def optimize_first_layer(spec: KernelSpec, data, config: OptimConfig, initial: FirstLayer | None = None):
    """Fit the first-layer matrix by Adam on mini-batch k-fold CV loss.

    Parameters
    ----------
    spec : KernelSpec
        Base kernel applied after the layer.
    data : Dataset or tuple
        Training data; a :class:`~twolayer.data.Dataset` contributes its
        training rows, a tuple is read as ``(X, y)``.
    config : OptimConfig
    initial : FirstLayer, optional
        Starting matrix for ``config.init == "loaded"``.

    Returns
    -------
    layer : FirstLayer
        Matrix at the end of the epoch with the lowest accumulated loss
        (the final matrix when ``config.restore_best`` is False).
    trace : OptimTrace
    """
    if isinstance(data, tuple):
        X, y = data
    else:
        X, y = data.X_train, data.y_train
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    N, d = X.shape
    if N < config.batch_size:
        raise ValueError(f"training set has {N} rows, fewer than one batch of {config.batch_size}")

    start = initial_layer(d, config, initial)
    trace = OptimTrace()
    if config.max_epochs == 0:
        trace.stop_reason = "no_epochs"
        return start, trace

    rng = np.random.default_rng(config.seed)
    A = np.array(start.matrix)
    state = AdamState.zeros_like(A)
    best_A, best_loss = A.copy(), np.inf
    stale = 0
    n_batches = N // config.batch_size

    for epoch in range(config.max_epochs):
        t0 = time.perf_counter()
        perm = rng.permutation(N)
        epoch_loss = 0.0
        for b in range(n_batches):
            idx = perm[b * config.batch_size:(b + 1) * config.batch_size]
            plan = make_folds(config.batch_size, config.k_folds, rng)
            try:
                value, grad = cv_loss_grad(spec, A, X[idx], y[idx], plan, config.lam)
            except NumericalError as err:
                raise NumericalError(f"epoch {epoch + 1}, batch {b}: {err}", err.condition) from err
            if not (np.isfinite(value.loss) and np.all(np.isfinite(grad))):
                raise NumericalError(f"epoch {epoch + 1}, batch {b}: non-finite loss or gradient")
            A, state = adam_step(A, grad, state, config)
            epoch_loss += value.loss
        trace.epoch_loss.append(epoch_loss)
        trace.epoch_seconds.append(time.perf_counter() - t0)
        log.debug("epoch %d loss %.6g", epoch + 1, epoch_loss)

        if epoch_loss < best_loss * (1.0 - config.min_rel_improvement) or trace.best_epoch is None:
            best_loss, best_A, trace.best_epoch = epoch_loss, A.copy(), epoch
            stale = 0
        else:
            if epoch_loss < best_loss:
                best_loss, best_A, trace.best_epoch = epoch_loss, A.copy(), epoch
            stale += 1
            if stale >= config.patience:
                trace.stop_reason = "early_stopping"
                break

    result = best_A if config.restore_best else A
    if not np.all(np.isfinite(result)):
        raise NumericalError("optimized layer is not finite")
    # untouched matrix keeps the initial provenance
    if np.array_equal(result, start.matrix):
        return start, trace
    return FirstLayer(result, "optimized"), trace
