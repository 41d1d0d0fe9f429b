"""
Radial kernels of Matérn type and the Gaussian kernel.

Every kernel is evaluated through its radial profile ``phi(eps * r)`` with
``phi(0) = 1``. The Matérn members are the half-integer ones with closed form:

    matern0 : exp(-s)
    matern1 : (1 + s) exp(-s)
    matern2 : (3 + 3 s + s^2) exp(-s) / 3
    gaussian: exp(-s^2)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FAMILIES = ("matern0", "matern1", "matern2", "gaussian")

# pairs closer than this (in transformed space) are treated as coincident
COINCIDENT_RADIUS = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    """A base radial kernel with an optional scalar length scale.

    Parameters
    ----------
    family : str
        One of ``matern0``, ``matern1``, ``matern2``, ``gaussian``.
    length_scale : float
        Multiplier ``eps`` applied to distances before the profile is evaluated.
    """

    family: str = "matern0"
    length_scale: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        ls = float(self.length_scale)
        if not np.isfinite(ls) or ls <= 0:
            raise ValueError(f"length_scale must be positive and finite, got {self.length_scale!r}")
        object.__setattr__(self, "length_scale", ls)

    @property
    def smoothness_k(self) -> int | None:
        """Order k of the Matérn member (nu = k + 1/2); None for the Gaussian."""
        if self.family == "gaussian":
            return None
        return int(self.family[-1])

    def with_length_scale(self, length_scale: float) -> "KernelSpec":
        return KernelSpec(self.family, length_scale)

    def to_dict(self) -> dict:
        return {"family": self.family, "length_scale": self.length_scale}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(d["family"], float(d.get("length_scale", 1.0)))


def _check_radius(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValueError("distances must be finite")
    if np.any(r < 0):
        raise ValueError("distances must be nonnegative")
    return r


def _profile(family: str, s: np.ndarray) -> np.ndarray:
    if family == "matern0":
        return np.exp(-s)
    if family == "matern1":
        return (1.0 + s) * np.exp(-s)
    if family == "matern2":
        return (3.0 + 3.0 * s + s * s) * np.exp(-s) / 3.0
    return np.exp(-s * s)


def eval_phi(spec: KernelSpec, r):
    """Evaluate ``phi(eps * r)``.

    Accepts a scalar or an array of nonnegative distances; returns the same shape.
    """
    r = _check_radius(r)
    out = _profile(spec.family, spec.length_scale * r)
    return out if out.ndim else float(out)


def eval_phi_radial_derivative(spec: KernelSpec, r):
    """Derivative ``d/dr phi(eps * r)``, chain factor ``eps`` included.

    For ``matern0`` the one-sided value ``-eps`` is returned at ``r = 0``;
    the smooth members have derivative 0 there.
    """
    r = _check_radius(r)
    eps = spec.length_scale
    s = eps * r
    fam = spec.family
    if fam == "matern0":
        out = -eps * np.exp(-s)
    elif fam == "matern1":
        out = -eps * s * np.exp(-s)
    elif fam == "matern2":
        out = -eps * (s + s * s) * np.exp(-s) / 3.0
    else:
        out = -2.0 * eps * s * np.exp(-s * s)
    return out if out.ndim else float(out)


def radial_derivative_over_r(spec: KernelSpec, r: np.ndarray) -> np.ndarray:
    """``phi'(r) / r`` as used by the gradient of ``phi(||A d||)`` w.r.t. ``A``.

    The smooth members have a finite limit at ``r = 0`` and are evaluated in
    closed form. For ``matern0`` the factor is singular; entries with
    ``r < COINCIDENT_RADIUS`` are set to zero (their contribution ``A d d^T``
    vanishes anyway when ``A d = 0``).
    """
    r = np.asarray(r, dtype=float)
    eps = spec.length_scale
    s = eps * r
    fam = spec.family
    if fam == "matern0":
        out = np.zeros_like(r)
        far = r >= COINCIDENT_RADIUS
        out[far] = -eps * np.exp(-s[far]) / r[far]
        return out
    if fam == "matern1":
        out = -eps * eps * np.exp(-s)
    elif fam == "matern2":
        out = -eps * eps * (1.0 + s) * np.exp(-s) / 3.0
    else:
        out = -2.0 * eps * eps * np.exp(-s * s)
    return np.where(r >= COINCIDENT_RADIUS, out, 0.0)


def pairwise_distances(X: np.ndarray, Y: np.ndarray, budget: int = 1 << 22) -> np.ndarray:
    """Euclidean distances from direct differences (no norm expansion)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise ValueError("points must be finite")
    out = np.empty((X.shape[0], Y.shape[0]))
    # keep the (rows, M, d) difference tensor bounded in memory
    step = max(1, budget // max(1, Y.shape[0] * X.shape[1]))
    for start in range(0, X.shape[0], step):
        diff = X[start:start + step, None, :] - Y[None, :, :]
        out[start:start + step] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return out


def gram_matrix(spec: KernelSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Kernel matrix with entries ``phi(eps * ||x_i - y_j||)``."""
    return _profile(spec.family, spec.length_scale * pairwise_distances(X, Y))
