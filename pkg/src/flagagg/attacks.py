"""Byzantine worker behaviors applied to the honest gradient matrix.

Every attack is deterministic given (G, spec, round index): random streams
are derived per Byzantine worker index so column order and scheduling cannot
change outputs. Honest columns pass through bitwise unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadSpec
from .linalg import as_matrix

ATTACK_KINDS = (
    "none",
    "uniform_random",
    "mean_hijack",
    "sign_flip",
    "fall_of_empires",
    "packet_loss_zero",
)


@dataclass(frozen=True)
class AttackSpec:
    """Which workers are Byzantine and what they send.

    ``target`` is the mean-hijack destination (zeros when None);
    ``per_worker_sign_flip`` switches sign flipping from the coordinated
    -scale * mean(honest) to each worker flipping its own gradient.
    """

    kind: str = "none"
    byzantine_ids: tuple[int, ...] = ()
    rng_seed: int = 0
    lo: float = -1.0
    hi: float = 1.0
    target: np.ndarray | None = None
    scale: float = 10.0
    epsilon: float = 0.1
    rate: float = 0.10
    per_worker_sign_flip: bool = False

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack {self.kind!r}")
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError("rate must lie in [0, 1]")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        object.__setattr__(self, "byzantine_ids", tuple(sorted(set(self.byzantine_ids))))


def _worker_rng(spec: AttackSpec, worker: int, round_index: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=spec.rng_seed, spawn_key=(worker, round_index))
    return np.random.default_rng(seq)


def apply_attack(g_honest, spec: AttackSpec, round_index: int = 0) -> np.ndarray:
    """Replace the Byzantine columns of an honest gradient matrix."""
    g = as_matrix(g_honest, "G").copy()
    n, p = g.shape
    if spec.kind == "none":
        return g
    ids = spec.byzantine_ids
    if not ids:
        raise BadSpec("byzantine_ids must be non-empty for an active attack")
    if any(i < 0 or i >= p for i in ids):
        raise BadSpec(f"byzantine ids must lie in 0..{p - 1}")

    honest = [i for i in range(p) if i not in ids]
    if spec.kind == "uniform_random":
        for i in ids:
            rng = _worker_rng(spec, i, round_index)
            g[:, i] = rng.uniform(spec.lo, spec.hi, size=n)
        return g
    if spec.kind == "mean_hijack":
        if len(ids) != 1:
            raise BadSpec("mean hijack requires exactly one Byzantine worker")
        target = np.zeros(n) if spec.target is None else np.asarray(spec.target, float)
        g[:, ids[0]] = p * target - g[:, honest].sum(axis=1)
        return g
    if spec.kind in ("sign_flip", "fall_of_empires"):
        factor = spec.scale if spec.kind == "sign_flip" else spec.epsilon
        if spec.kind == "sign_flip" and spec.per_worker_sign_flip:
            for i in ids:
                g[:, i] = -factor * g_honest[:, i]
        else:
            base = np.asarray(g_honest, float)[:, honest].mean(axis=1)
            for i in ids:
                g[:, i] = -factor * base
        return g
    # packet_loss_zero: each entry on a Byzantine-linked column drops i.i.d.
    for i in ids:
        rng = _worker_rng(spec, i, round_index)
        g[:, i] = np.where(rng.random(n) < spec.rate, 0.0, g[:, i])
    return g
