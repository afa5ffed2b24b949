"""Flag-subspace aggregation core.

The estimator picks an orthonormal n x m basis Y minimizing

    sum_i sqrt(1 - |Y^T g_i|^2 / |g_i|^2)  +  lambda * R(Y)

over Y^T Y = I and aggregates to (1/p) Y Y^T G 1. The solver is IRLS:
each sweep replaces the square roots by their quadratic majorants, whose
minimizer is the top-m left singular subspace of a reweighted column stack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInput, DomainError, ZeroGradient
from .linalg import as_matrix, orthonormalize, sym_eig, thin_svd_left

REGULARIZERS = ("none", "elementwise_l1", "pairwise_chordal")


def default_subspace_dim(p: int) -> int:
    """Default m = ceil((p+1)/2)."""
    return math.ceil((p + 1) / 2)


@dataclass(frozen=True)
class FlagConfig:
    """Everything the regularized objective and its IRLS solver need.

    ``m=None`` resolves to ceil((p+1)/2) at solve time. ``regularizer`` is
    one of 'none', 'elementwise_l1' (smoothing ``l1_delta``) or
    'pairwise_chordal'.
    """

    m: int | None = None
    lam: float = 0.0
    regularizer: str = "none"
    l1_delta: float = 1e-3
    max_iters: int = 5
    tol: float = 1e-10
    guard_eps: float = 1e-12
    taylor_a: float = 2.0
    beta_shape: tuple[float, float] = (1.0, 0.5)

    def __post_init__(self):
        if self.regularizer not in REGULARIZERS:
            raise ValueError(f"unknown regularizer {self.regularizer!r}")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.tol <= 0 or self.guard_eps <= 0:
            raise ValueError("tol and guard_eps must be > 0")
        if self.taylor_a <= 1:
            raise ValueError("taylor constant must be > 1")
        alpha, beta = self.beta_shape
        if alpha <= 0 or beta <= 0:
            raise ValueError("beta shape parameters must be > 0")
        if self.m is not None and self.m < 1:
            raise ValueError("m must be >= 1")

    def resolve_m(self, p: int) -> int:
        m = self.m if self.m is not None else default_subspace_dim(p)
        return min(m, p)


@dataclass
class IrlsTrace:
    """Per-sweep objectives and data-term weights d_i."""

    objectives: list[float] = field(default_factory=list)
    weights: list[np.ndarray] = field(default_factory=list)
    iterations_run: int = 0
    converged: bool = False


@dataclass(frozen=True)
class SelectionResult:
    """Selection-matrix diagnostic from the stationarity conditions."""

    s_fa: np.ndarray
    m_star: np.ndarray
    reconstruction_residual: float
    singular_multipliers: bool


def _as_gradients(g, guard_eps: float = 1e-12):
    """Validate a gradient matrix and split off zero columns.

    Returns (G, norms, keep_mask). A worker that sends an all-zero column
    (e.g. total packet loss) is excluded from the subspace fit; callers keep
    the original p for the averaging convention they need.
    """
    g = as_matrix(g, "G")
    norms = np.linalg.norm(g, axis=0)
    keep = norms > guard_eps
    if not np.any(keep):
        raise DegenerateInput("all gradient columns are zero")
    return g, norms, keep


def explained_variance(y, g, guard_eps: float = 1e-12) -> float:
    """Fraction of |g|^2 captured by span(Y), clamped to [0, 1]."""
    y = as_matrix(y, "Y")
    g = np.asarray(g, dtype=np.float64).ravel()
    norm2 = float(g @ g)
    if norm2 <= guard_eps**2:
        raise ZeroGradient("gradient has (near-)zero norm")
    v = float(np.sum((y.T @ g) ** 2)) / norm2
    return min(max(v, 0.0), 1.0)


def beta_neg_loglik(v, alpha: float, beta: float) -> float:
    """Exact Beta negative log-likelihood, normalization constant dropped."""
    v = np.asarray(v, dtype=np.float64)
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be > 0")
    if np.any(v < 0) or np.any(v >= 1):
        raise DomainError("values must lie in [0, 1); pre-clamp with guard_eps")
    total = 0.0
    if alpha != 1.0:
        total += (alpha - 1.0) * np.sum(np.log(v))
    total += (beta - 1.0) * np.sum(np.log1p(-v))
    return -float(total)


def taylor_neg_loglik(v, a: float) -> float:
    """Smooth surrogate (1/2) sum_i (a (1-v_i)^(1/a) - a) for the (1, 1/2) Beta."""
    if a <= 1:
        raise ValueError("taylor constant must be > 1")
    v = np.asarray(v, dtype=np.float64)
    return 0.5 * float(np.sum(a * np.power(1.0 - v, 1.0 / a) - a))


def _values(y: np.ndarray, g: np.ndarray, norms: np.ndarray) -> np.ndarray:
    """Explained variance of every column of g, clamped to [0, 1]."""
    proj = y.T @ g
    v = np.sum(proj**2, axis=0) / norms**2
    return np.clip(v, 0.0, 1.0)


def _pair_diffs(g: np.ndarray):
    """Unordered pair differences g_i - g_j (i < j) and their norms."""
    n, p = g.shape
    idx_i, idx_j = np.triu_indices(p, k=1)
    diffs = g[:, idx_i] - g[:, idx_j]
    dnorms = np.linalg.norm(diffs, axis=0)
    return diffs, dnorms


def _regularizer_value(y: np.ndarray, g: np.ndarray, cfg: FlagConfig) -> float:
    p = g.shape[1]
    if cfg.regularizer == "none" or cfg.lam == 0.0:
        return 0.0
    if cfg.regularizer == "elementwise_l1":
        return float(np.sum(np.sqrt(y**2 + cfg.l1_delta**2)))
    diffs, dnorms = _pair_diffs(g)
    live = dnorms > cfg.guard_eps
    if not np.any(live):
        return 0.0
    v = _values(y, diffs[:, live], dnorms[live])
    return float(np.sum(np.sqrt(1.0 - v))) / (p - 1)


def fa_objective(y, g, cfg: FlagConfig) -> float:
    """Data term sum_i sqrt(1 - v_i) plus lambda times the regularizer.

    For non-default Beta shapes the data term switches to the two-term
    Taylor surrogate, one term per shape parameter.
    """
    y = as_matrix(y, "Y")
    g, norms, keep = _as_gradients(g, cfg.guard_eps)
    if not np.all(keep):
        raise ZeroGradient("objective undefined for zero gradient columns")
    v = _values(y, g, norms)
    alpha, beta = cfg.beta_shape
    if (alpha, beta) == (1.0, 0.5) and cfg.taylor_a == 2.0:
        data = float(np.sum(np.sqrt(1.0 - v)))
    else:
        a = cfg.taylor_a
        data = -float(
            np.sum(
                (alpha - 1.0) * (a * np.power(np.maximum(v, cfg.guard_eps), 1.0 / a) - a)
                + (beta - 1.0) * (a * np.power(1.0 - v, 1.0 / a) - a)
            )
        )
    return data + cfg.lam * _regularizer_value(y, g, cfg)


def weighted_svd_step(g, col_weights, m: int) -> np.ndarray:
    """One reweighted-PCA step: top-m left singular basis of G * diag(w)."""
    g = as_matrix(g, "G")
    w = np.asarray(col_weights, dtype=np.float64)
    return thin_svd_left(g * w, m).u


def _irls_columns(y: np.ndarray, g: np.ndarray, norms: np.ndarray, cfg: FlagConfig):
    """Weighted column stack for one IRLS sweep, plus the data weights d_i.

    Column weights are sqrt of the quadratic-majorant coefficients
    d_i = 1 / (|g_i|^2 sqrt(max(1 - v_i, guard))), and analogously
    lambda/((p-1) D_ij^2 sqrt(max(1 - v_ij, guard))) for pair differences.
    """
    p = g.shape[1]
    v = _values(y, g, norms)
    d = 1.0 / (norms**2 * np.sqrt(np.maximum(1.0 - v, cfg.guard_eps)))
    blocks = [g * np.sqrt(d)]
    if cfg.regularizer == "pairwise_chordal" and cfg.lam > 0:
        diffs, dnorms = _pair_diffs(g)
        live = dnorms > cfg.guard_eps
        if np.any(live):
            diffs, dnorms = diffs[:, live], dnorms[live]
            v_pair = _values(y, diffs, dnorms)
            d_pair = cfg.lam / (
                (p - 1) * dnorms**2 * np.sqrt(np.maximum(1.0 - v_pair, cfg.guard_eps))
            )
            blocks.append(diffs * np.sqrt(d_pair))
    return np.concatenate(blocks, axis=1), d


def _l1_sweep(y: np.ndarray, g: np.ndarray, norms: np.ndarray, cfg: FlagConfig) -> np.ndarray:
    """Column-cyclic update for the smoothed elementwise-L1 regularizer.

    Each column maximizes y^T (A - lambda W_j) y over unit vectors orthogonal
    to the other columns, with A the reweighted data Gram and W_j the diagonal
    majorant of the smoothed absolute values. Needs n <= 512.
    """
    n, m = y.shape
    cols, _ = _irls_columns(y, g, norms, FlagConfig(m=cfg.m, lam=0.0, guard_eps=cfg.guard_eps))
    a = cols @ cols.T
    out = y.copy()
    for j in range(m):
        w_j = 1.0 / (2.0 * np.sqrt(y[:, j] ** 2 + cfg.l1_delta**2))
        mat = a - cfg.lam * np.diag(w_j)
        others = np.delete(out, j, axis=1)
        if others.shape[1]:
            q_full, _ = np.linalg.qr(others, mode="complete")
            comp = q_full[:, others.shape[1] :]
        else:
            comp = np.eye(n)
        reduced = sym_eig(comp.T @ mat @ comp)
        out[:, j] = comp @ reduced.vectors[:, 0]
    return orthonormalize(out)


def irls_solve(g, cfg: FlagConfig, init=None) -> tuple[np.ndarray, IrlsTrace]:
    """Iteratively reweighted least squares for the flag objective.

    Each sweep recomputes the majorant weights at the current Y and takes the
    top-m left singular basis of the weighted stack [w_i g_i | w_ij (g_i-g_j)].
    Stops when the objective change drops below cfg.tol or after
    cfg.max_iters sweeps. The objective trace is nonincreasing.
    """
    g, norms, keep = _as_gradients(g, cfg.guard_eps)
    g_live = g[:, keep]
    norms_live = norms[keep]
    m = cfg.resolve_m(g_live.shape[1])

    if init is not None:
        y = orthonormalize(as_matrix(init, "init"))
    else:
        y = thin_svd_left(g_live / norms_live, m).u

    trace = IrlsTrace()
    obj = fa_objective(y, g_live, cfg)
    trace.objectives.append(obj)
    for _ in range(cfg.max_iters):
        if cfg.regularizer == "elementwise_l1" and cfg.lam > 0:
            _, d = _irls_columns(y, g_live, norms_live, cfg)
            y_new = _l1_sweep(y, g_live, norms_live, cfg)
        else:
            cols, d = _irls_columns(y, g_live, norms_live, cfg)
            y_new = thin_svd_left(cols, m).u
        obj_new = fa_objective(y_new, g_live, cfg)
        trace.weights.append(d)
        trace.iterations_run += 1
        y, delta, obj = y_new, abs(obj_new - obj), obj_new
        trace.objectives.append(obj)
        if delta < cfg.tol:
            trace.converged = True
            break
    return y, trace


def fa_aggregate(g, cfg: FlagConfig, return_details: bool = False):
    """Aggregate worker gradients: (1/p) Y Y^T G 1 with Y from IRLS.

    Zero columns are dropped from both the subspace fit and the averaging
    denominator for the round.
    """
    g, norms, keep = _as_gradients(g, cfg.guard_eps)
    g_live = g[:, keep]
    y, trace = irls_solve(g_live, cfg)
    agg = y @ (y.T @ g_live.sum(axis=1)) / g_live.shape[1]
    if return_details:
        return agg, y, trace
    return agg


def _objective_gradient(y: np.ndarray, g: np.ndarray, norms: np.ndarray, cfg: FlagConfig):
    """Euclidean gradient of the objective wrt Y (guard-clamped weights)."""
    p = g.shape[1]
    v = _values(y, g, norms)
    d = -1.0 / (norms**2 * np.sqrt(np.maximum(1.0 - v, cfg.guard_eps)))
    grad = (g * d) @ (g.T @ y)
    if cfg.lam > 0 and cfg.regularizer == "pairwise_chordal":
        diffs, dnorms = _pair_diffs(g)
        live = dnorms > cfg.guard_eps
        if np.any(live):
            diffs, dnorms = diffs[:, live], dnorms[live]
            v_pair = _values(y, diffs, dnorms)
            d_pair = -1.0 / (
                (p - 1) * dnorms**2 * np.sqrt(np.maximum(1.0 - v_pair, cfg.guard_eps))
            )
            grad = grad + cfg.lam * (diffs * d_pair) @ (diffs.T @ y)
    elif cfg.lam > 0 and cfg.regularizer == "elementwise_l1":
        grad = grad + cfg.lam * y / np.sqrt(y**2 + cfg.l1_delta**2)
    return grad


def _regularizer_gradient(y: np.ndarray, g: np.ndarray, cfg: FlagConfig) -> np.ndarray:
    """Gradient of R(Y) alone (no lambda)."""
    p = g.shape[1]
    if cfg.lam == 0 or cfg.regularizer == "none":
        return np.zeros_like(y)
    if cfg.regularizer == "elementwise_l1":
        return y / np.sqrt(y**2 + cfg.l1_delta**2)
    diffs, dnorms = _pair_diffs(g)
    live = dnorms > cfg.guard_eps
    if not np.any(live):
        return np.zeros_like(y)
    diffs, dnorms = diffs[:, live], dnorms[live]
    v_pair = _values(y, diffs, dnorms)
    d_pair = -1.0 / ((p - 1) * dnorms**2 * np.sqrt(np.maximum(1.0 - v_pair, cfg.guard_eps)))
    return (diffs * d_pair) @ (diffs.T @ y)


def kkt_residual(y, g, cfg: FlagConfig) -> float:
    """Relative first-order stationarity residual at a feasible Y.

    Recovers the symmetric multiplier block from the stationarity equation
    and measures |grad + 2 Y Gamma|_F / max(1, |grad|_F).
    """
    y = as_matrix(y, "Y")
    g, norms, keep = _as_gradients(g, cfg.guard_eps)
    if not np.all(keep):
        raise ZeroGradient("KKT residual undefined for zero gradient columns")
    grad = _objective_gradient(y, g, norms, cfg)
    gamma = -0.5 * (y.T @ grad)
    gamma = 0.5 * (gamma + gamma.T)
    resid = grad + 2.0 * y @ gamma
    return float(np.linalg.norm(resid) / max(1.0, np.linalg.norm(grad)))


def selection_matrix(y, g, cfg: FlagConfig) -> SelectionResult:
    """p x p selection matrix from the stationarity identity at Y.

    At a stationary point, Y Y^T G = (G S_FA + lambda grad-R M*) / 4 with
    S_FA = (D* G^T Y) M* and M* built from the squared pseudo-inverse of the
    multiplier block. The reconstruction residual (relative to |G|_F) is
    reported alongside a flag for near-singular multipliers.
    """
    y = as_matrix(y, "Y")
    g, norms, keep = _as_gradients(g, cfg.guard_eps)
    if not np.all(keep):
        raise ZeroGradient("selection matrix undefined for zero gradient columns")
    v = _values(y, g, norms)
    d_star = -1.0 / (norms**2 * np.sqrt(np.maximum(1.0 - v, cfg.guard_eps)))
    reg_grad = _regularizer_gradient(y, g, cfg)
    grad = (g * d_star) @ (g.T @ y) + cfg.lam * reg_grad
    gamma = -0.5 * (y.T @ grad)
    gamma = 0.5 * (gamma + gamma.T)
    svals = np.linalg.svd(gamma, compute_uv=False)
    singular = bool(svals.size == 0 or svals[-1] < 1e-10)
    gamma_pinv = np.linalg.pinv(gamma, rcond=1e-10)
    s_prime = (d_star[:, None] * (g.T @ y))
    m_star = gamma_pinv @ gamma_pinv @ (y.T @ (g * d_star) @ g.T + cfg.lam * reg_grad.T) @ g
    s_fa = s_prime @ m_star
    recon = (g @ s_fa + cfg.lam * reg_grad @ m_star) / 4.0
    residual = float(np.linalg.norm(y @ (y.T @ g) - recon) / np.linalg.norm(g))
    return SelectionResult(
        s_fa=s_fa,
        m_star=m_star,
        reconstruction_residual=residual,
        singular_multipliers=singular,
    )
