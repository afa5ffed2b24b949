"""Deterministic parameter-server training loop with pluggable aggregation.

Workers are simulated in-process: each round every worker computes an exact
analytic minibatch gradient from its own (worker, round)-seeded stream, the
attack rewrites the Byzantine columns, the aggregator produces one update
direction, and every worker applies the identical step. Two runs with the
same config produce bitwise-identical records.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .aggregators import AggregatorSpec, aggregate
from .attacks import AttackSpec, apply_attack
from .flag import fa_aggregate

MODEL_KINDS = ("linear", "logistic", "mlp")


@dataclass
class Model:
    """A small differentiable model with a flat parameter vector."""

    kind: str
    dim: int
    classes: int
    hidden: int = 16
    params: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model {self.kind!r}")
        if self.params.size == 0:
            self.params = np.zeros(self.param_count())

    def param_count(self) -> int:
        if self.kind == "linear":
            return self.dim
        if self.kind == "logistic":
            return self.classes * self.dim
        return self.hidden * self.dim + self.hidden + self.classes * self.hidden + self.classes


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray

    @property
    def train(self):
        return self.features[self.train_idx], self.labels[self.train_idx]

    @property
    def test(self):
        return self.features[self.test_idx], self.labels[self.test_idx]


@dataclass(frozen=True)
class RunConfig:
    """Full description of one training run."""

    p: int = 8
    iterations: int = 100
    batch_size: int = 16
    seed: int = 0
    lr: float = 0.5
    lr_decay: float = 0.2
    lr_interval: int = 10**9  # rounds between decays; default effectively off
    model: str = "logistic"
    hidden: int = 16
    dim: int = 20
    classes: int = 2
    samples_per_class: int = 200
    spread: float = 1.0
    attack: AttackSpec = field(default_factory=AttackSpec)
    aggregator: AggregatorSpec = field(default_factory=AggregatorSpec)

    def __post_init__(self):
        if self.batch_size < 1 or self.iterations < 1 or self.p < 1:
            raise ValueError("need batch_size >= 1, iterations >= 1, p >= 1")
        if self.lr_interval < 1:
            raise ValueError("lr_interval must be >= 1")


@dataclass
class RunRecord:
    """Per-round metrics; one row per training iteration."""

    rows: list[tuple] = field(default_factory=list)
    header: tuple[str, ...] = (
        "iter",
        "train_loss",
        "test_accuracy",
        "agg_wall_ms",
        "irls_iters",
    )

    def write_csv(self, fh) -> None:
        fh.write(",".join(self.header) + "\n")
        for row in self.rows:
            it, loss, acc, wall, irls = row
            fh.write(f"{it},{loss:.12g},{acc:.12g},{wall:.12g},{irls}\n")


def make_blobs(dim: int, classes: int, samples_per_class: int, spread: float, seed: int) -> Dataset:
    """Gaussian class clusters at seeded centers, 80/20 train/test split."""
    if dim < 2:
        raise ValueError("dim must be >= 2")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(101,)))
    centers = rng.standard_normal((classes, dim)) * 3.0
    feats = np.concatenate(
        [centers[c] + spread * rng.standard_normal((samples_per_class, dim)) for c in range(classes)]
    )
    labels = np.repeat(np.arange(classes), samples_per_class)
    order = rng.permutation(len(labels))
    feats, labels = feats[order], labels[order]
    cut = int(round(0.8 * len(labels)))
    return Dataset(
        features=feats,
        labels=labels,
        train_idx=np.arange(cut),
        test_idx=np.arange(cut, len(labels)),
    )


def _unpack_mlp(model: Model):
    d, h, c = model.dim, model.hidden, model.classes
    w = model.params
    i = 0
    w1 = w[i : i + h * d].reshape(h, d); i += h * d
    b1 = w[i : i + h]; i += h
    w2 = w[i : i + c * h].reshape(c, h); i += c * h
    b2 = w[i : i + c]
    return w1, b1, w2, b2


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grad(model: Model, x: np.ndarray, y: np.ndarray):
    """Mean loss and its exact gradient wrt the flat parameters.

    Linear uses (1/2) squared error against the label as a float; logistic
    and mlp use mean-reduced cross-entropy.
    """
    b = x.shape[0]
    if model.kind == "linear":
        pred = x @ model.params
        resid = pred - y.astype(np.float64)
        return 0.5 * float(np.mean(resid**2)), x.T @ resid / b
    if model.kind == "logistic":
        w = model.params.reshape(model.classes, model.dim)
        probs = _softmax(x @ w.T)
        onehot = np.eye(model.classes)[y]
        loss = -float(np.mean(np.log(np.maximum(probs[np.arange(b), y], 1e-300))))
        return loss, ((probs - onehot).T @ x / b).ravel()
    w1, b1, w2, b2 = _unpack_mlp(model)
    hid = np.tanh(x @ w1.T + b1)
    probs = _softmax(hid @ w2.T + b2)
    onehot = np.eye(model.classes)[y]
    loss = -float(np.mean(np.log(np.maximum(probs[np.arange(b), y], 1e-300))))
    dlogits = (probs - onehot) / b
    gw2 = dlogits.T @ hid
    gb2 = dlogits.sum(axis=0)
    dhid = (dlogits @ w2) * (1.0 - hid**2)
    gw1 = dhid.T @ x
    gb1 = dhid.sum(axis=0)
    return loss, np.concatenate([gw1.ravel(), gb1, gw2.ravel(), gb2])


def init_model(cfg: RunConfig) -> Model:
    model = Model(kind=cfg.model, dim=cfg.dim, classes=cfg.classes, hidden=cfg.hidden)
    if cfg.model == "mlp":
        rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(202,)))
        model.params = 0.1 * rng.standard_normal(model.param_count())
    return model


def worker_gradient(
    model: Model, dataset: Dataset, worker_id: int, iteration: int, batch_size: int, seed: int
) -> np.ndarray:
    """Exact mean gradient on a (worker, iteration)-seeded minibatch."""
    xs, ys = dataset.train
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(worker_id, iteration))
    )
    idx = rng.integers(0, len(ys), size=batch_size)
    _, grad = loss_and_grad(model, xs[idx], ys[idx])
    return grad


def evaluate(model: Model, x: np.ndarray, y: np.ndarray) -> float:
    """Top-1 accuracy (linear model thresholds at the midpoint label)."""
    if model.kind == "linear":
        pred = np.rint(x @ model.params).astype(int)
        return float(np.mean(np.clip(pred, y.min(), y.max()) == y))
    if model.kind == "logistic":
        w = model.params.reshape(model.classes, model.dim)
        return float(np.mean(np.argmax(x @ w.T, axis=1) == y))
    w1, b1, w2, b2 = _unpack_mlp(model)
    hid = np.tanh(x @ w1.T + b1)
    return float(np.mean(np.argmax(hid @ w2.T + b2, axis=1) == y))


def train(cfg: RunConfig, dataset: Dataset | None = None, record_timing: bool = False) -> RunRecord:
    """Run the parameter-server loop and collect per-round metrics.

    Wall-clock aggregation time is recorded only when ``record_timing`` is
    set; the default keeps the record bitwise reproducible.
    """
    if dataset is None:
        dataset = make_blobs(cfg.dim, cfg.classes, cfg.samples_per_class, cfg.spread, cfg.seed)
    model = init_model(cfg)
    record = RunRecord()
    x_train, y_train = dataset.train
    x_test, y_test = dataset.test
    lr = cfg.lr
    for t in range(1, cfg.iterations + 1):
        grads = [
            worker_gradient(model, dataset, w, t, cfg.batch_size, cfg.seed) for w in range(cfg.p)
        ]
        g = np.column_stack(grads)
        g = apply_attack(g, cfg.attack, round_index=t)
        start = time.perf_counter()
        irls_iters = 0
        if np.linalg.norm(g, axis=0).max() <= 1e-12:
            # model has saturated; every worker reports a vanishing gradient
            direction = np.zeros(g.shape[0])
        elif cfg.aggregator.kind == "flag":
            direction, _, trace = fa_aggregate(g, cfg.aggregator.flag_config, return_details=True)
            irls_iters = trace.iterations_run
        else:
            direction = aggregate(g, cfg.aggregator)
        wall_ms = (time.perf_counter() - start) * 1000.0 if record_timing else 0.0
        model.params = model.params - lr * direction
        if t % cfg.lr_interval == 0:
            lr *= cfg.lr_decay
        loss, _ = loss_and_grad(model, x_train, y_train)
        acc = evaluate(model, x_test, y_test)
        record.rows.append((t, loss, acc, wall_ms, irls_iters))
    return record


def with_aggregator(cfg: RunConfig, spec: AggregatorSpec) -> RunConfig:
    return replace(cfg, aggregator=spec)
