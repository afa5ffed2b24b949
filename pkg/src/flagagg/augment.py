"""Nonlinear image augmentation: Lotka-Volterra flow, Arnold's cat map
(exact and sigmoid-smoothed), and additive Gaussian noise.

Images are square float arrays with values in [0, 1]. Single images travel
as binary PGM (P5, maxval 255); batches are a directory of PGMs plus an
index file of ``filename,label`` lines.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, Overflow

AUGMENT_KINDS = ("lotka_volterra", "cat_map", "smooth_cat_map", "gaussian_noise")

_DIVERGE_LIMIT = 1e12


@dataclass(frozen=True)
class AugmentSpec:
    """Map choice plus parameters; ``fraction`` selects the share of a batch.

    The Lotka-Volterra defaults (2/3, 4/3, -1, -1) act on per-pixel value
    pairs; ``lv_on_coordinates`` switches to the coordinate-flow variant.
    """

    kind: str = "cat_map"
    fraction: float = 1.0
    # Lotka-Volterra
    alpha: float = 2.0 / 3.0
    beta: float = 4.0 / 3.0
    gamma: float = -1.0
    delta: float = -1.0
    horizon: float = 1.0
    step: float = 0.01
    lv_on_coordinates: bool = False
    # cat maps
    iterations: int = 1
    smoothing: float = 0.95
    # additive noise
    sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in AUGMENT_KINDS:
            raise ValueError(f"unknown augmentation {self.kind!r}")
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("fraction must lie in [0, 1]")
        if self.step <= 0 or self.horizon < 0:
            raise ValueError("step must be > 0 and horizon >= 0")
        if not 0.0 < self.smoothing:
            raise ValueError("smoothing degree must be > 0")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


def _check_image(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] != img.shape[1] or img.shape[0] < 2:
        raise ValueError(f"image must be square with N >= 2, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    return img


def _lv_rk4(x, y, alpha, beta, gamma, delta, horizon, step):
    """Vectorized fixed-step RK4 for dx = ax - bxy, dy = dxy - cy.

    Returns terminal (x, y) and a divergence mask.
    """
    x = np.array(x, dtype=np.float64, copy=True)
    y = np.array(y, dtype=np.float64, copy=True)

    def rhs(u, v):
        return alpha * u - beta * u * v, delta * u * v - gamma * v

    steps = int(round(horizon / step))
    remainder = horizon - steps * step
    diverged = np.zeros(np.shape(x), dtype=bool)
    for h in [step] * steps + ([remainder] if remainder > 1e-15 else []):
        k1x, k1y = rhs(x, y)
        k2x, k2y = rhs(x + 0.5 * h * k1x, y + 0.5 * h * k1y)
        k3x, k3y = rhs(x + 0.5 * h * k2x, y + 0.5 * h * k2y)
        k4x, k4y = rhs(x + h * k3x, y + h * k3y)
        x = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        y = y + (h / 6.0) * (k1y + 2 * k2y + 2 * k3y + k4y)
        diverged |= (np.abs(x) > _DIVERGE_LIMIT) | (np.abs(y) > _DIVERGE_LIMIT)
        if np.all(diverged):
            break
    return x, y, diverged


def lv_flow(
    x0: float,
    y0: float,
    spec: AugmentSpec | None = None,
    *,
    alpha: float | None = None,
    beta: float | None = None,
    gamma: float | None = None,
    delta: float | None = None,
    horizon: float | None = None,
    step: float | None = None,
) -> tuple[float, float]:
    """Integrate one point through the Lotka-Volterra flow; returns terminus."""
    spec = spec or AugmentSpec(kind="lotka_volterra")
    a = spec.alpha if alpha is None else alpha
    b = spec.beta if beta is None else beta
    c = spec.gamma if gamma is None else gamma
    d = spec.delta if delta is None else delta
    t = spec.horizon if horizon is None else horizon
    h = spec.step if step is None else step
    if not (np.isfinite(x0) and np.isfinite(y0)):
        raise ValueError("initial point must be finite")
    x, y, diverged = _lv_rk4(x0, y0, a, b, c, d, t, h)
    if diverged:
        raise Overflow("trajectory exceeded 1e12 in magnitude")
    return float(x), float(y)


def cat_map(img, iterations: int = 1) -> np.ndarray:
    """Arnold's cat map on the pixel grid: (x, y) -> ((2x+y) mod N, (x+y) mod N).

    An exact permutation of the pixels, iterated ``iterations`` times.
    """
    img = _check_image(img)
    n = img.shape[0]
    xs, ys = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    out = img
    for _ in range(iterations):
        nxt = np.empty_like(out)
        nxt[(2 * xs + ys) % n, (xs + ys) % n] = out[xs, ys]
        out = nxt
    return out


def _smooth_mod(a: np.ndarray, m: float) -> np.ndarray:
    """Sigmoid-smoothed mod 1 for arguments in (0, 3].

    Each unit crossing is subtracted through the gate 1/(1+exp(-m log(a/k))),
    which tends to the exact step as m grows.
    """
    if np.any(a <= 0):
        raise DomainError("smooth modulus undefined for non-positive argument")
    out = a.astype(np.float64).copy()
    for k in (1.0, 2.0):
        t = m * np.log(a / k)
        gate = np.where(t >= 0, 1.0 / (1.0 + np.exp(-np.abs(t))), np.exp(-np.abs(t)) / (1.0 + np.exp(-np.abs(t))))
        out = out - gate
    return out


def smooth_cat_positions(n: int, m: float) -> tuple[np.ndarray, np.ndarray]:
    """Smooth cat-map target positions, in pixel units, for an n x n grid.

    Source coordinates are normalized to (0, 1]; the linear part matches
    the exact map and the modulus is the sigmoid-smoothed gate.
    """
    idx = (np.arange(n) + 1.0) / n
    xs, ys = np.meshgrid(idx, idx, indexing="ij")
    tx = _smooth_mod(2.0 * xs + ys, m)
    ty = _smooth_mod(xs + ys, m)
    # The +1 coordinate shift adds 3/n (resp. 2/n) inside the modulus; undo it
    # so the large-m limit lands exactly on the integer cat-map targets.
    return tx * n - 3.0, ty * n - 2.0


def _splat_bilinear(values: np.ndarray, px: np.ndarray, py: np.ndarray, n: int,
                    fallback: np.ndarray) -> np.ndarray:
    """Forward-warp values to float positions with bilinear weights.

    Cells that receive no mass keep the fallback pixel value.
    """
    acc = np.zeros((n, n))
    wgt = np.zeros((n, n))
    x0 = np.floor(px).astype(int)
    y0 = np.floor(py).astype(int)
    fx = px - x0
    fy = py - y0
    for dx, dy in ((0, 0), (0, 1), (1, 0), (1, 1)):
        w = (fx if dx else 1 - fx) * (fy if dy else 1 - fy)
        gx = np.mod(x0 + dx, n)
        gy = np.mod(y0 + dy, n)
        np.add.at(acc, (gx.ravel(), gy.ravel()), (w * values).ravel())
        np.add.at(wgt, (gx.ravel(), gy.ravel()), w.ravel())
    out = fallback.copy()
    mask = wgt > 1e-12
    out[mask] = acc[mask] / wgt[mask]
    return out


def smooth_cat_map(img, spec: AugmentSpec | None = None) -> np.ndarray:
    """Smoothed cat map: move pixels to their sigmoid-mod targets and
    resample back onto the grid with bilinear weights."""
    img = _check_image(img)
    spec = spec or AugmentSpec(kind="smooth_cat_map")
    n = img.shape[0]
    out = img
    for _ in range(max(spec.iterations, 1)):
        px, py = smooth_cat_positions(n, spec.smoothing)
        out = _splat_bilinear(out, px, py, n, fallback=out)
    return out


def _lv_values(img: np.ndarray, spec: AugmentSpec) -> np.ndarray:
    """Value-pair Lotka-Volterra distortion: each pixel flows jointly with
    its 3x3 local mean; the transformed intensity is kept."""
    n = img.shape[0]
    padded = np.pad(img, 1, mode="edge")
    local = np.zeros_like(img)
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            local += padded[1 + dx : 1 + dx + n, 1 + dy : 1 + dy + n]
    local /= 9.0
    x, _, diverged = _lv_rk4(
        img, local, spec.alpha, spec.beta, spec.gamma, spec.delta, spec.horizon, spec.step
    )
    x = np.where(diverged, img, x)
    return np.clip(x, 0.0, 1.0)


def _lv_coordinates(img: np.ndarray, spec: AugmentSpec) -> np.ndarray:
    """Coordinate-flow variant: pixel positions ride the flow, then splat."""
    n = img.shape[0]
    idx = (np.arange(n) + 1.0) / n
    xs, ys = np.meshgrid(idx, idx, indexing="ij")
    x, y, diverged = _lv_rk4(
        xs, ys, spec.alpha, spec.beta, spec.gamma, spec.delta, spec.horizon, spec.step
    )
    x = np.where(diverged, xs, x)
    y = np.where(diverged, ys, y)
    return _splat_bilinear(img, np.mod(x, 1.0) * n - 0.5, np.mod(y, 1.0) * n - 0.5, n, img)


def apply_map(img, spec: AugmentSpec) -> np.ndarray:
    """Apply one augmentation map to one image (no selection, no noise)."""
    img = _check_image(img)
    if spec.kind == "cat_map":
        return cat_map(img, spec.iterations)
    if spec.kind == "smooth_cat_map":
        return smooth_cat_map(img, spec)
    if spec.kind == "lotka_volterra":
        if spec.lv_on_coordinates:
            return _lv_coordinates(img, spec)
        return _lv_values(img, spec)
    return img  # gaussian_noise adds noise in augment_batch


def augment_batch(images, spec: AugmentSpec, seed: int) -> list[np.ndarray]:
    """Transform a seeded floor(fraction * count) subset of a batch.

    The configured map runs first, then Gaussian noise (sigma > 0) is added;
    every output is clamped back to [0, 1]. Deterministic given the seed.
    """
    images = [_check_image(im) for im in images]
    count = len(images)
    k = int(np.floor(spec.fraction * count))
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0,)))
    chosen = set(rng.choice(count, size=k, replace=False).tolist()) if k else set()
    out = []
    for i, img in enumerate(images):
        if i not in chosen:
            out.append(img.copy())
            continue
        result = apply_map(img, spec)
        if spec.sigma > 0:
            noise_rng = np.random.default_rng(
                np.random.SeedSequence(entropy=seed, spawn_key=(1, i))
            )
            result = result + spec.sigma * noise_rng.standard_normal(result.shape)
        out.append(np.clip(result, 0.0, 1.0))
    return out


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM (P5, maxval <= 255) into floats in [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    i = 0
    while len(tokens) < 4:
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if i < len(data) and data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < len(data) and not data[i : i + 1].isspace():
            i += 1
        tokens.append(data[start:i])
    if tokens[0] != b"P5":
        raise ValueError("not a binary PGM (P5) file")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval > 255:
        raise ValueError("only maxval <= 255 supported")
    i += 1
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=i)
    return pixels.reshape(height, width).astype(np.float64) / maxval


def write_pgm(path, img) -> None:
    """Write floats in [0, 1] as a binary PGM (P5, maxval 255)."""
    img = np.asarray(img, dtype=np.float64)
    quantized = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(quantized.tobytes())


def read_batch(directory) -> tuple[list[np.ndarray], list[str], list[str]]:
    """Load a PGM directory via its ``index.txt`` of filename,label lines."""
    index_path = os.path.join(directory, "index.txt")
    names, labels = [], []
    with open(index_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            name, _, label = line.partition(",")
            names.append(name.strip())
            labels.append(label.strip())
    images = [read_pgm(os.path.join(directory, name)) for name in names]
    return images, names, labels
