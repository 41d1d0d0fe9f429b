"""First-layer linear map of a two-layer kernel and its spectral diagnostics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kernels import KernelSpec, gram_matrix

PROVENANCES = ("identity_init", "optimized", "loaded")


@dataclass(frozen=True)
class FirstLayer:
    """A ``b x d`` matrix ``A`` mapping inputs ``x -> A x`` (``b <= d``)."""

    matrix: np.ndarray
    provenance: str = "identity_init"

    def __post_init__(self):
        A = np.array(self.matrix, dtype=float, copy=True)
        if A.ndim != 2:
            raise ValueError(f"layer matrix must be 2-d, got shape {A.shape}")
        b, d = A.shape
        if b < 1 or d < 1 or b > d:
            raise ValueError(f"layer must satisfy 1 <= b <= d, got {b}x{d}")
        if not np.all(np.isfinite(A)):
            raise ValueError("layer matrix has non-finite entries")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        A.setflags(write=False)
        object.__setattr__(self, "matrix", A)

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def identity(cls, d: int, rows: int | None = None, scale: float = 1.0) -> "FirstLayer":
        """Leading ``rows x d`` slice of ``scale * I_d``."""
        rows = d if rows is None else rows
        return cls(scale * np.eye(d)[:rows], "identity_init")

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "data": [float(v) for v in self.matrix.ravel()],
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict, provenance: str | None = None) -> "FirstLayer":
        data = np.asarray(d["data"], dtype=float)
        rows, cols = int(d["rows"]), int(d["cols"])
        if data.size != rows * cols:
            raise ValueError(f"layer data has {data.size} entries, expected {rows}x{cols}")
        return cls(data.reshape(rows, cols), provenance or d.get("provenance", "loaded"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "FirstLayer":
        """Read a layer JSON file; the provenance becomes ``loaded``."""
        return cls.from_dict(json.loads(Path(path).read_text()), provenance="loaded")


def apply_layer(layer: FirstLayer, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != layer.cols:
        raise ValueError(f"points have {X.shape[1]} columns, layer expects {layer.cols}")
    return X @ layer.matrix.T


def two_layer_gram(spec: KernelSpec, layer: FirstLayer | None, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Gram matrix of ``k(A x, A y)``; ``layer=None`` means the identity."""
    if layer is None:
        return gram_matrix(spec, X, Y)
    return gram_matrix(spec, apply_layer(layer, X), apply_layer(layer, Y))


@dataclass
class SpectralReport:
    """SVD of a layer matrix with the cumulative power of its singular values.

    ``right_singular_vectors`` holds the full ``d x d`` basis so that subspaces
    beyond the rank can still be formed; its first ``min(b, d)`` columns pair
    with ``singular_values``. ``eigenvalues`` is only set for square layers.
    """

    singular_values: np.ndarray
    left_singular_vectors: np.ndarray
    right_singular_vectors: np.ndarray
    cumulative_power: np.ndarray | None
    degenerate: bool = False
    eigenvalues: np.ndarray | None = field(default=None)

    def to_rows(self) -> list[tuple[int, float, float | None]]:
        cp = self.cumulative_power
        return [
            (i + 1, float(s), None if cp is None else float(cp[i]))
            for i, s in enumerate(self.singular_values)
        ]


def cumulative_power(singular_values: np.ndarray) -> np.ndarray | None:
    """Normalized partial sums of singular-value magnitudes, or None if all are zero."""
    s = np.abs(np.asarray(singular_values, dtype=float))
    total = s.sum()
    if total == 0:
        return None
    cp = np.cumsum(s) / total
    cp[-1] = 1.0
    return cp


def spectral_report(layer: FirstLayer) -> SpectralReport:
    A = layer.matrix
    U, s, Vt = np.linalg.svd(A, full_matrices=True)
    k = min(A.shape)
    cp = cumulative_power(s)
    eig = None
    if A.shape[0] == A.shape[1]:
        ev = np.linalg.eigvals(A)
        # real parts ordered by magnitude; complex pairs are kept as complex
        eig = ev[np.argsort(-np.abs(ev), kind="stable")]
        if np.all(np.abs(eig.imag) <= 1e-12 * (1 + np.abs(eig).max())):
            eig = eig.real
    return SpectralReport(
        singular_values=s,
        left_singular_vectors=U[:, :k],
        right_singular_vectors=Vt.T,
        cumulative_power=cp,
        degenerate=cp is None,
        eigenvalues=eig,
    )


def principal_angles(layer_a: FirstLayer, layer_b: FirstLayer, n: int) -> np.ndarray:
    """Principal angles (degrees, nondecreasing) between the spans of the
    leading ``n`` right singular vectors of two layers."""
    if layer_a.cols != layer_b.cols:
        raise ValueError(f"layers act on different dimensions: {layer_a.cols} vs {layer_b.cols}")
    d = layer_a.cols
    if not 1 <= n <= d:
        raise ValueError(f"subspace dimension must be in [1, {d}], got {n}")
    Va = spectral_report(layer_a).right_singular_vectors[:, :n]
    Vb = spectral_report(layer_b).right_singular_vectors[:, :n]
    return subspace_angles(Va, Vb)


def subspace_angles(Qa: np.ndarray, Qb: np.ndarray) -> np.ndarray:
    """Angles in degrees between the column spans of two orthonormal bases."""
    cos = np.linalg.svd(Qa.T @ Qb, compute_uv=False)
    return np.sort(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))
