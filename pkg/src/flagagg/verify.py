"""Self-check suites exercising the mathematical identities the package
relies on. Each suite runs with fixed seeds and returns (name, ok, detail)
tuples; the CLI renders them as a pass/fail table."""

from __future__ import annotations

import numpy as np

from . import flag, relaxation
from .linalg import thin_svd_left

SUITES = ("kron", "pca-equiv", "irls-mono", "kkt", "grad-fd", "socp-sweep")


def _random_subspace(rng, n, m):
    q, _ = np.linalg.qr(rng.standard_normal((n, m)))
    return q


def suite_kron(trials: int = 1000, inject_fault: bool = False):
    """tr(Y^T M Y) must equal vec(Y)^T (I (x) M) vec(Y) on random pairs."""
    rng = np.random.default_rng(12345)
    worst = 0.0
    worst_seed = -1
    for k in range(trials):
        n = int(rng.integers(2, 9))
        m = int(rng.integers(1, min(n, 64 // n) + 1))
        y = rng.standard_normal((n, m))
        a = rng.standard_normal((n, n))
        mat = 0.5 * (a + a.T)
        resid = relaxation.kron_identity_check(y, mat)
        if inject_fault:
            resid += 1.0
        tol = 1e-10 * (1.0 + abs(float(np.trace(y.T @ mat @ y))))
        if resid > tol and worst_seed < 0:
            worst_seed = k
        worst = max(worst, resid)
    ok = worst_seed < 0
    return [("kron", ok, f"{trials} pairs, worst residual {worst:.3e}"
             + ("" if ok else f", first failure at instance {worst_seed}"))]


def suite_pca_equiv(trials: int = 100):
    """One uniform-weight IRLS step must reproduce the top-m PCA projector."""
    rng = np.random.default_rng(23456)
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(5, 40))
        p = int(rng.integers(3, 10))
        g = rng.standard_normal((n, p))
        m = min(flag.default_subspace_dim(p), p)
        norms = np.linalg.norm(g, axis=0)
        y_irls = flag.weighted_svd_step(g, 1.0 / norms, m)
        y_pca = thin_svd_left(g / norms, m).u
        diff = np.linalg.norm(y_irls @ y_irls.T - y_pca @ y_pca.T)
        worst = max(worst, diff)
    ok = worst <= 1e-8
    return [("pca-equiv", ok, f"{trials} instances, worst projector gap {worst:.3e}")]


def irls_instances(count: int = 200, seed: int = 34567):
    """Seeded random gradient matrices spanning the documented sweep."""
    rng = np.random.default_rng(seed)
    grid = [(n, p, lam) for n in (10, 100) for p in (5, 15) for lam in (0.0, 1.0)]
    out = []
    for k in range(count):
        n, p, lam = grid[k % len(grid)]
        base = rng.standard_normal(n)
        g = base[:, None] + 0.5 * rng.standard_normal((n, p))
        out.append((g, lam, k))
    return out


def suite_irls_mono(count: int = 200):
    """IRLS objective traces must be nonincreasing within 1e-8 slack."""
    failures = []
    worst = 0.0
    for g, lam, k in irls_instances(count):
        reg = "pairwise_chordal" if lam > 0 else "none"
        cfg = flag.FlagConfig(lam=lam, regularizer=reg, max_iters=10)
        _, trace = flag.irls_solve(g, cfg)
        obj = np.asarray(trace.objectives)
        rise = float(np.max(obj[1:] - obj[:-1], initial=0.0))
        worst = max(worst, rise)
        if rise > 1e-8:
            failures.append(k)
    ok = not failures
    detail = f"{count} instances, worst objective rise {worst:.3e}"
    if failures:
        detail += f", failing seeds {failures[:5]}"
    return [("irls-mono", ok, detail)]


def suite_kkt(count: int = 50):
    """IRLS output must satisfy first-order stationarity within 1e-4."""
    rng = np.random.default_rng(45678)
    failures = []
    worst = 0.0
    for k in range(count):
        n = int(rng.integers(8, 32))
        p = int(rng.integers(5, 9))
        lam = 1.0 if k % 2 else 0.0
        reg = "pairwise_chordal" if lam > 0 else "none"
        base = rng.standard_normal(n)
        g = base[:, None] + 0.5 * rng.standard_normal((n, p))
        cfg = flag.FlagConfig(lam=lam, regularizer=reg, max_iters=500, tol=1e-15)
        y, _ = flag.irls_solve(g, cfg)
        resid = flag.kkt_residual(y, g, cfg)
        worst = max(worst, resid)
        if resid > 1e-4:
            failures.append(k)
    ok = not failures
    detail = f"{count} instances, worst residual {worst:.3e}"
    if failures:
        detail += f", failing seeds {failures[:5]}"
    return [("kkt", ok, detail)]


def suite_grad_fd():
    """Analytic lifted gradient vs central finite differences."""
    rng = np.random.default_rng(56789)
    results = []
    worst = 0.0
    for k in range(10):
        n = int(rng.integers(4, 10))
        p = int(rng.integers(3, 7))
        m = int(rng.integers(1, 4))
        g = rng.standard_normal((n, p))
        inst = relaxation.lifted_instance_from_gradients(g, m)
        if inst.kappa_tilde < 1e-6:
            inst = relaxation.LiftedInstance(inst.m_list, inst.m, 1e-3)
        y = _random_subspace(rng, n, m)
        err = relaxation.gradient_fd_check(inst, y, h=1e-5)
        worst = max(worst, err)
    ok = worst <= 1e-5
    results.append(("grad-fd", ok, f"10 instances, worst relative error {worst:.3e}"))
    return results


def sphere_sweep_min(g: np.ndarray, degrees: float = 1.0) -> float:
    """Exhaustive m=1 objective minimum over a 1-degree sphere grid (n=3)."""
    norms = np.linalg.norm(g, axis=0)
    gn = g / norms
    thetas = np.deg2rad(np.arange(0.0, 180.0, degrees))
    phis = np.deg2rad(np.arange(0.0, 360.0, degrees))
    tt, pp = np.meshgrid(thetas, phis, indexing="ij")
    ys = np.stack(
        [np.sin(tt) * np.cos(pp), np.sin(tt) * np.sin(pp), np.cos(tt)], axis=-1
    ).reshape(-1, 3)
    dots = ys @ gn
    vals = np.sqrt(np.clip(1.0 - dots**2, 0.0, None)).sum(axis=1)
    return float(vals.min())


def suite_socp_sweep(instances: int = 20):
    """IRLS at m=1 must reach the sphere-sweep global minimum within the
    grid tolerance (Lipschitz constant 1 per term times half-diagonal arc)."""
    rng = np.random.default_rng(67890)
    failures = []
    worst_gap = -np.inf
    for k in range(instances):
        p = 3 if k % 2 == 0 else 5
        g = rng.standard_normal((3, p))
        cfg = flag.FlagConfig(m=1, lam=0.0, max_iters=200, tol=1e-14)
        _, trace = flag.irls_solve(g, cfg)
        grid_min = sphere_sweep_min(g)
        tol = p * np.deg2rad(1.0) * np.sqrt(2.0) / 2.0
        gap = trace.objectives[-1] - (grid_min + tol)
        worst_gap = max(worst_gap, gap)
        if gap > 0:
            failures.append(k)
    ok = not failures
    detail = f"{instances} instances, worst excess over grid bound {worst_gap:.3e}"
    if failures:
        detail += f", failing seeds {failures[:5]}"
    return [("socp-sweep", ok, detail)]


def run_suite(name: str, inject_fault: bool = False):
    """Run one named suite (or 'all'); returns a list of (name, ok, detail)."""
    if name == "all":
        results = []
        for s in SUITES:
            results.extend(run_suite(s, inject_fault=inject_fault))
        return results
    if name == "kron":
        return suite_kron(inject_fault=inject_fault)
    if name == "pca-equiv":
        return suite_pca_equiv()
    if name == "irls-mono":
        return suite_irls_mono()
    if name == "kkt":
        return suite_kkt()
    if name == "grad-fd":
        return suite_grad_fd()
    if name == "socp-sweep":
        return suite_socp_sweep()
    raise ValueError(f"unknown suite {name!r}; choose from {SUITES + ('all',)}")
