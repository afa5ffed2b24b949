"""Baseline robust aggregation rules behind one dispatch interface.

All rules take an n x p column stack of worker gradients and return a single
n-vector. Coordinate ties are broken by (value, worker index) so every rule
is deterministic and permutation-invariant after canonical ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TooFewWorkers
from .flag import FlagConfig, fa_aggregate
from .linalg import as_matrix, thin_svd_left

AGGREGATOR_KINDS = (
    "mean",
    "median",
    "trimmed_mean",
    "meamed",
    "phocas",
    "multi_krum",
    "bulyan",
    "pca",
    "flag",
)


@dataclass(frozen=True)
class AggregatorSpec:
    """Which rule to run and its parameters.

    ``f`` is the assumed Byzantine count; ``m`` is the Multi-Krum selection
    count or the PCA/flag subspace dimension (None picks the rule's default).
    """

    kind: str = "mean"
    f: int = 0
    m: int | None = None
    flag_config: FlagConfig = field(default_factory=FlagConfig)

    def __post_init__(self):
        if self.kind not in AGGREGATOR_KINDS:
            raise ValueError(f"unknown aggregator {self.kind!r}")
        if self.f < 0:
            raise ValueError("f must be >= 0")


def mean(g) -> np.ndarray:
    g = as_matrix(g, "G")
    return g.mean(axis=1)


def coordinate_median(g) -> np.ndarray:
    """Per-coordinate median; even p averages the two middle order statistics."""
    g = as_matrix(g, "G")
    return np.median(g, axis=1)


def trimmed_mean(g, f: int) -> np.ndarray:
    """Drop the f smallest and f largest values per coordinate, average the rest."""
    g = as_matrix(g, "G")
    p = g.shape[1]
    if p <= 2 * f:
        raise TooFewWorkers(f"trimmed mean needs p > 2f (p={p}, f={f})")
    s = np.sort(g, axis=1)
    return s[:, f : p - f].mean(axis=1)


def _closest_to(values: np.ndarray, center: float, count: int) -> np.ndarray:
    """Indices of the ``count`` values nearest ``center``.

    Ties resolve to the lower value, then the lower worker index.
    """
    order = sorted(range(len(values)), key=lambda i: (abs(values[i] - center), values[i], i))
    return np.asarray(order[:count], dtype=int)


def meamed(g, f: int) -> np.ndarray:
    """Mean-around-median: average the p-f values closest to the coordinate median."""
    g = as_matrix(g, "G")
    p = g.shape[1]
    if p <= f:
        raise TooFewWorkers(f"meamed needs p > f (p={p}, f={f})")
    med = np.median(g, axis=1)
    out = np.empty(g.shape[0])
    for r in range(g.shape[0]):
        idx = _closest_to(g[r], med[r], p - f)
        out[r] = g[r, idx].mean()
    return out


def phocas(g, f: int) -> np.ndarray:
    """Trimmed mean first, then average the p-f values closest to it."""
    g = as_matrix(g, "G")
    p = g.shape[1]
    if p <= 2 * f:
        raise TooFewWorkers(f"phocas needs p > 2f (p={p}, f={f})")
    center = trimmed_mean(g, f)
    out = np.empty(g.shape[0])
    for r in range(g.shape[0]):
        idx = _closest_to(g[r], center[r], p - f)
        out[r] = g[r, idx].mean()
    return out


def _krum_scores(g: np.ndarray, f: int) -> np.ndarray:
    """Sum of squared distances from each column to its p-f-2 nearest peers."""
    p = g.shape[1]
    gram = g.T @ g
    sq = np.diag(gram)
    dist2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * gram, 0.0)
    k = p - f - 2
    scores = np.empty(p)
    for i in range(p):
        others = np.delete(dist2[i], i)
        scores[i] = np.sort(others)[:k].sum()
    return scores


def multi_krum(g, f: int, m: int | None = None) -> np.ndarray:
    """Average of the m lowest-Krum-score gradients (ties by worker index)."""
    g = as_matrix(g, "G")
    p = g.shape[1]
    if p < 2 * f + 3:
        raise TooFewWorkers(f"multi-krum needs p >= 2f+3 (p={p}, f={f})")
    if m is None:
        m = p - f - 2
    if not 1 <= m <= p:
        raise ValueError(f"need 1 <= m <= p, got m={m}")
    scores = _krum_scores(g, f)
    chosen = np.argsort(scores, kind="stable")[:m]
    return g[:, chosen].mean(axis=1)


def bulyan(g, f: int) -> np.ndarray:
    """Two-stage rule: recursive Krum selection, then mean-around-median.

    Stage 1 removes the Krum winner from the pool theta = p-2f times to build
    the selection set S. Stage 2 averages, per coordinate, the beta = theta-2f
    values of S closest to the coordinate median of S.
    """
    g = as_matrix(g, "G")
    p = g.shape[1]
    if p < 4 * f + 3:
        raise TooFewWorkers(f"bulyan needs p >= 4f+3 (p={p}, f={f})")
    theta = p - 2 * f
    beta = theta - 2 * f
    remaining = list(range(p))
    selected: list[int] = []
    for _ in range(theta):
        pool = g[:, remaining]
        scores = _krum_scores(pool, f)
        best = int(np.argsort(scores, kind="stable")[0])
        selected.append(remaining.pop(best))
    s = g[:, selected]
    med = np.median(s, axis=1)
    out = np.empty(g.shape[0])
    for r in range(g.shape[0]):
        idx = _closest_to(s[r], med[r], beta)
        out[r] = s[r, idx].mean()
    return out


def pca_baseline(g, m: int | None = None) -> np.ndarray:
    """Project the plain mean onto the top-m subspace of the normalized columns."""
    g = as_matrix(g, "G")
    p = g.shape[1]
    if m is None:
        m = (p + 2) // 2  # ceil((p+1)/2), matching the flag default
    if not 1 <= m <= p:
        raise ValueError(f"need 1 <= m <= p, got m={m}")
    norms = np.linalg.norm(g, axis=0)
    norms = np.where(norms > 0, norms, 1.0)
    y = thin_svd_left(g / norms, m).u
    return y @ (y.T @ g.sum(axis=1)) / p


def aggregate(g, spec: AggregatorSpec) -> np.ndarray:
    """Dispatch a gradient matrix through the configured rule."""
    if spec.kind == "mean":
        return mean(g)
    if spec.kind == "median":
        return coordinate_median(g)
    if spec.kind == "trimmed_mean":
        return trimmed_mean(g, spec.f)
    if spec.kind == "meamed":
        return meamed(g, spec.f)
    if spec.kind == "phocas":
        return phocas(g, spec.f)
    if spec.kind == "multi_krum":
        return multi_krum(g, spec.f, spec.m)
    if spec.kind == "bulyan":
        return bulyan(g, spec.f)
    if spec.kind == "pca":
        return pca_baseline(g, spec.m)
    return fa_aggregate(g, spec.flag_config)
