"""Lifted-SDP view of the flag objective at desk scale.

Terms are sqrt(tr(Y^T M_i Y) + kappa) with M_i = I/m - g~ g~^T. The lifted
matrix variable Z = vec(Y) vec(Y)^T is only ever evaluated (Kronecker
identity checks); optimization happens in the factored space via projected
gradient descent with a QR retraction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StepTooSmall, ZeroGradient, ZeroMatrix
from .linalg import as_matrix, orthonormalize, sym_eig

MAX_LIFTED_DIM = 64  # cap on n*m when materializing I (x) M explicitly


@dataclass(frozen=True)
class LiftedInstance:
    """The p symmetric term matrices, trace budget m, and perturbation kappa."""

    m_list: np.ndarray  # (p, n, n)
    m: int
    kappa_tilde: float


def lifted_instance_from_gradients(g, m: int, kappa_tilde: float | None = None) -> LiftedInstance:
    """Build M_i = I/m - g~_i g~_i^T; kappa defaults to the proof's choice
    |min_i min(lambda_min(M_i), 0)|."""
    g = as_matrix(g, "G")
    n, p = g.shape
    norms = np.linalg.norm(g, axis=0)
    if np.any(norms == 0):
        raise ZeroGradient("zero gradient column")
    gn = g / norms
    mats = np.empty((p, n, n))
    eye = np.eye(n)
    for i in range(p):
        mats[i] = eye / m - np.outer(gn[:, i], gn[:, i])
        mats[i] = 0.5 * (mats[i] + mats[i].T)
    if kappa_tilde is None:
        min_eig = min(sym_eig(mats[i]).values[-1] for i in range(p))
        kappa_tilde = abs(min(min_eig, 0.0))
    return LiftedInstance(m_list=mats, m=m, kappa_tilde=float(kappa_tilde))


def socp_term_m1(y, g, guard_eps: float = 1e-12) -> float:
    """Single cone term at m=1: |B~ y| with B~ = (I - g~ g~^T)^(1/2).

    Evaluated as sqrt(y^T (I - g~ g~^T) y) = sqrt(1 - (y^T g~)^2).
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    g = np.asarray(g, dtype=np.float64).ravel()
    gnorm = np.linalg.norm(g)
    if gnorm <= guard_eps:
        raise ZeroGradient("zero gradient")
    gt = g / gnorm
    val = float(y @ y - (y @ gt) ** 2)
    return float(np.sqrt(max(val, 0.0)))


def kron_identity_check(y, mat) -> float:
    """|tr(Y^T M Y) - vec(Y)^T (I (x) M) vec(Y)|, both sides evaluated.

    The Kronecker product is materialized explicitly for n*m <= 64 and
    accumulated blockwise otherwise.
    """
    y = as_matrix(y, "Y")
    mat = as_matrix(mat, "M")
    n, m = y.shape
    lhs = float(np.trace(y.T @ mat @ y))
    vec = y.reshape(-1, order="F")
    if n * m <= MAX_LIFTED_DIM:
        big = np.kron(np.eye(m), mat)
        rhs = float(vec @ big @ vec)
    else:
        rhs = sum(float(y[:, j] @ mat @ y[:, j]) for j in range(m))
    return abs(lhs - rhs)


def _term_values(y: np.ndarray, inst: LiftedInstance) -> np.ndarray:
    return np.array(
        [max(float(np.trace(y.T @ mi @ y)), 0.0) + inst.kappa_tilde for mi in inst.m_list]
    )


def lifted_objective(y, inst: LiftedInstance) -> float:
    """sum_i sqrt(max(tr(Y^T M_i Y), 0) + kappa)."""
    y = as_matrix(y, "Y")
    return float(np.sum(np.sqrt(_term_values(y, inst))))


def lifted_gradient(y, inst: LiftedInstance) -> np.ndarray:
    """Euclidean gradient of the lifted objective wrt Y: sum_i M_i Y / sqrt(term_i)."""
    y = as_matrix(y, "Y")
    terms = _term_values(y, inst)
    grad = np.zeros_like(y)
    for mi, t in zip(inst.m_list, terms):
        if t > 0:
            grad += (mi @ y) / np.sqrt(t)
    return grad


def _qr_retract(y: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(y)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def factored_pgd(
    inst: LiftedInstance,
    m: int,
    step: float = 0.1,
    iters: int = 200,
    seed: int = 0,
    init=None,
) -> tuple[np.ndarray, list[float]]:
    """Projected gradient descent in the factored space over Y^T Y = I.

    QR retraction after each step; the step halves whenever the objective
    would increase (floor 1e-8). Returns the best iterate and the accepted,
    nonincreasing objective trace.
    """
    if step <= 0:
        raise ValueError("step must be > 0")
    n = inst.m_list.shape[1]
    if init is not None:
        y = orthonormalize(as_matrix(init, "init"))
    else:
        rng = np.random.default_rng(seed)
        y = _qr_retract(rng.standard_normal((n, m)))
    obj = lifted_objective(y, inst)
    trace = [obj]
    best_y, best_obj = y, obj
    s = step
    made_progress = False
    for _ in range(iters):
        grad = lifted_gradient(y, inst)
        while True:
            cand = _qr_retract(y - s * grad)
            cand_obj = lifted_objective(cand, inst)
            if cand_obj <= obj + 1e-12:
                break
            s *= 0.5
            if s < 1e-8:
                if not made_progress:
                    raise StepTooSmall("backtracking floored out before any progress")
                return best_y, trace
        if cand_obj < obj - 1e-15:
            made_progress = True
        y, obj = cand, cand_obj
        trace.append(obj)
        if obj < best_obj:
            best_y, best_obj = y, obj
    return best_y, trace


def nuclear_normalize(mat) -> np.ndarray:
    """Divide a symmetric matrix by its nuclear norm so that I - M is PSD."""
    mat = as_matrix(mat, "M")
    eig = sym_eig(mat)
    nuc = float(np.sum(np.abs(eig.values)))
    if nuc <= 0.0:
        raise ZeroMatrix("nuclear norm is zero")
    out = mat / nuc
    check = sym_eig(np.eye(mat.shape[0]) - out)
    if check.values[-1] < -1e-10:
        raise AssertionError("I - M/|M|_* lost positive semidefiniteness")
    return out


def gradient_fd_check(inst: LiftedInstance, y, h: float = 1e-5) -> float:
    """Max relative mismatch between the analytic gradient and central
    finite differences (kappa must keep the sqrt argument >= 1e-6)."""
    y = as_matrix(y, "Y").copy()
    if inst.kappa_tilde < 1e-6:
        raise ValueError("kappa_tilde must be >= 1e-6 for the FD regime")
    analytic = lifted_gradient(y, inst)
    fd = np.zeros_like(y)
    for i in range(y.shape[0]):
        for j in range(y.shape[1]):
            orig = y[i, j]
            y[i, j] = orig + h
            up = lifted_objective(y, inst)
            y[i, j] = orig - h
            dn = lifted_objective(y, inst)
            y[i, j] = orig
            fd[i, j] = (up - dn) / (2.0 * h)
    scale = max(1.0, float(np.abs(analytic).max()))
    return float(np.abs(analytic - fd).max() / scale)
