"""Dense kernels for small-column problems: symmetric eigendecomposition,
thin SVD through the Gram matrix, and Gram-Schmidt orthonormalization.

Matrices are plain float64 ndarrays. Column counts stay small (<= 512);
row counts may be large, so nothing here ever forms an n x n matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DependentColumns, NoConvergence, NonSymmetric

MAX_EIG_DIM = 512

# Seed for the deterministic orthonormal completion of rank-deficient bases.
_COMPLETION_SEED = 0


@dataclass(frozen=True)
class SymEig:
    """Eigendecomposition with eigenvalues sorted descending."""

    values: np.ndarray
    vectors: np.ndarray


@dataclass(frozen=True)
class ThinSvd:
    """Top-m left singular basis; ``rank_deficient`` marks completed columns."""

    u: np.ndarray
    singular_values: np.ndarray
    rank_deficient: bool


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array and reject non-finite entries."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def sym_eig(a) -> SymEig:
    """Full eigendecomposition of a symmetric matrix, eigenvalues descending.

    Deterministic for a fixed input. Raises NonSymmetric when the asymmetry
    exceeds tolerance and NoConvergence if the backend fails to converge.
    """
    a = as_matrix(a, "A")
    q = a.shape[0]
    if a.shape[1] != q:
        raise ValueError("A must be square")
    if q > MAX_EIG_DIM:
        raise ValueError(f"dimension {q} exceeds {MAX_EIG_DIM}")
    scale = max(1.0, float(np.abs(a).max()))
    if float(np.abs(a - a.T).max()) > 1e-12 * scale:
        raise NonSymmetric("max|A - A^T| exceeds 1e-12 tolerance")
    a = 0.5 * (a + a.T)
    try:
        values, vectors = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - backend failure
        raise NoConvergence(str(exc)) from exc
    order = np.argsort(values, kind="stable")[::-1]
    return SymEig(values=values[order].copy(), vectors=vectors[:, order].copy())


def _fix_column_signs(u: np.ndarray) -> np.ndarray:
    """Canonical sign: largest-magnitude entry of each column made positive."""
    if u.size == 0:
        return u
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs


def _complete_basis(u: np.ndarray, n: int, want: int) -> np.ndarray:
    """Append deterministic orthonormal columns until ``u`` has ``want``."""
    rng = np.random.default_rng(_COMPLETION_SEED)
    cols = [u[:, j] for j in range(u.shape[1])]
    while len(cols) < want:
        cand = rng.standard_normal(n)
        for _ in range(2):
            for c in cols:
                cand = cand - (c @ cand) * c
        norm = np.linalg.norm(cand)
        if norm < 1e-8:
            continue
        cols.append(cand / norm)
    return np.column_stack(cols)


def thin_svd_left(b, m: int) -> ThinSvd:
    """Top-m left singular vectors of B via eigendecomposition of B^T B.

    Never forms the n x n matrix. Directions with sigma < 1e-12 * sigma_max
    are completed with a deterministic orthonormal extension so the result
    always has exactly m columns; that case is flagged ``rank_deficient``.
    """
    b = as_matrix(b, "B")
    n, q = b.shape
    if not 1 <= m <= min(n, q):
        raise ValueError(f"need 1 <= m <= min(n, q) = {min(n, q)}, got {m}")
    gram = b.T @ b
    eig = sym_eig(gram)
    sigma = np.sqrt(np.clip(eig.values, 0.0, None))
    sigma_max = sigma[0] if sigma.size else 0.0
    threshold = 1e-12 * max(sigma_max, 1e-300)
    keep = min(m, int(np.sum(sigma > threshold)))
    u = b @ eig.vectors[:, :keep]
    if keep:
        u = u / sigma[:keep]
    u = _fix_column_signs(u)
    rank_deficient = keep < m
    if rank_deficient:
        u = _complete_basis(u, n, m)
    # One cleanup pass: the Gram route loses orthogonality for clustered sigmas.
    u = orthonormalize(u)
    return ThinSvd(u=u, singular_values=sigma[:m].copy(), rank_deficient=rank_deficient)


def orthonormalize(y) -> np.ndarray:
    """Orthonormal basis for span(Y) via modified Gram-Schmidt.

    One reorthogonalization pass; raises DependentColumns when a column is
    numerically in the span of its predecessors.
    """
    y = as_matrix(y, "Y")
    n, m = y.shape
    out = np.empty((n, m))
    for j in range(m):
        v = y[:, j].copy()
        orig = np.linalg.norm(v)
        for _ in range(2):
            for i in range(j):
                v = v - (out[:, i] @ v) * out[:, i]
        norm = np.linalg.norm(v)
        if norm < 1e-12 * max(orig, 1.0) or orig == 0.0:
            raise DependentColumns(f"column {j} is numerically dependent")
        out[:, j] = v / norm
    return out
