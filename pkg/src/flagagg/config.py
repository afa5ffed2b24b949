"""Line-oriented ``key = value`` config files with flat dotted keys.

Unknown keys are hard errors. The single source of truth for accepted keys,
defaults, and help text is CONFIG_KEYS; the CLI help is generated from it.
"""

from __future__ import annotations

from .aggregators import AGGREGATOR_KINDS, AggregatorSpec
from .attacks import ATTACK_KINDS, AttackSpec
from .augment import AUGMENT_KINDS, AugmentSpec
from .errors import ConfigError
from .flag import REGULARIZERS, FlagConfig
from .sim import MODEL_KINDS, RunConfig

# key -> (default, parser, help)
CONFIG_KEYS: dict[str, tuple] = {
    "run.p": (8, int, "worker count"),
    "run.iterations": (100, int, "training rounds T"),
    "run.batch_size": (16, int, "per-worker minibatch size B"),
    "run.seed": (0, int, "master seed for data, init, and worker streams"),
    "run.lr": (0.5, float, "initial learning rate"),
    "run.lr_decay": (0.2, float, "multiplicative decay factor"),
    "run.lr_interval": (1000000000, int, "rounds between decays"),
    "run.model": ("logistic", str, f"model kind, one of {MODEL_KINDS}"),
    "run.hidden": (16, int, "mlp hidden width"),
    "run.dim": (20, int, "feature dimension of the synthetic blobs"),
    "run.classes": (2, int, "number of classes"),
    "run.samples_per_class": (200, int, "samples per class"),
    "run.spread": (1.0, float, "class cluster spread"),
    "attack.kind": ("none", str, f"attack kind, one of {ATTACK_KINDS}"),
    "attack.f": (0, int, "number of Byzantine workers"),
    "attack.ids": ("auto", str, "comma list of Byzantine ids, or 'auto' = first f"),
    "attack.seed": (0, int, "attack RNG seed"),
    "attack.lo": (-1.0, float, "uniform attack lower bound"),
    "attack.hi": (1.0, float, "uniform attack upper bound"),
    "attack.epsilon": (0.1, float, "fall-of-empires epsilon"),
    "attack.scale": (10.0, float, "sign-flip amplification"),
    "attack.rate": (0.1, float, "packet-loss zeroing probability"),
    "agg.kind": ("mean", str, f"aggregator, one of {AGGREGATOR_KINDS}"),
    "agg.f": (0, int, "assumed Byzantine count for robust rules"),
    "agg.m": ("auto", str, "multi-krum/pca selection count, or 'auto'"),
    "flag.lambda": (0.0, float, "flag regularization weight"),
    "flag.m": ("auto", str, "flag subspace dimension, or 'auto' = ceil((p+1)/2)"),
    "flag.max_iters": (5, int, "IRLS sweep cap"),
    "flag.tol": (1e-10, float, "IRLS objective-change stopping threshold"),
    "flag.regularizer": ("none", str, f"one of {REGULARIZERS}"),
    "flag.delta": (1e-3, float, "elementwise-L1 smoothing"),
    "augment.kind": ("cat_map", str, f"augmentation, one of {AUGMENT_KINDS}"),
    "augment.iterations": (1, int, "cat-map iterations"),
    "augment.m": (0.95, float, "smooth cat-map degree of approximation"),
    "augment.sigma": (0.05, float, "additive Gaussian noise level"),
    "augment.fraction": (1.0, float, "share of batch images to augment"),
    "augment.seed": (0, int, "augmentation selection seed"),
    "augment.horizon": (1.0, float, "Lotka-Volterra integration horizon"),
    "augment.step": (0.01, float, "Lotka-Volterra RK4 step size"),
}


def default_config() -> dict:
    return {k: v[0] for k, v in CONFIG_KEYS.items()}


def _convert(key: str, raw: str):
    default, parser, _ = CONFIG_KEYS[key]
    raw = raw.strip()
    if parser is str:
        return raw
    # 'auto' sentinels stay strings even for numeric-flavored keys
    if isinstance(default, str) and raw == "auto":
        return raw
    try:
        return parser(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc


def parse_config_text(text: str, base: dict | None = None) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment; unknown keys fail."""
    cfg = dict(base) if base is not None else default_config()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        cfg[key] = _convert(key, raw)
    return cfg


def apply_overrides(cfg: dict, overrides: list[str]) -> dict:
    """Apply repeated --set key=value flags on top of a parsed config."""
    cfg = dict(cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, _, raw = item.partition("=")
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown key {key!r}")
        cfg[key] = _convert(key, raw)
    return cfg


def _auto_int(value, fallback=None):
    if isinstance(value, str):
        if value != "auto":
            raise ConfigError(f"expected integer or 'auto', got {value!r}")
        return fallback
    return int(value)


def build_attack(cfg: dict) -> AttackSpec:
    kind = cfg["attack.kind"]
    if kind not in ATTACK_KINDS:
        raise ConfigError(f"unknown attack kind {kind!r}")
    f = cfg["attack.f"]
    ids_raw = cfg["attack.ids"]
    if ids_raw == "auto":
        ids = tuple(range(f))
    else:
        try:
            ids = tuple(int(x) for x in ids_raw.split(",") if x.strip())
        except ValueError as exc:
            raise ConfigError(f"bad attack.ids {ids_raw!r}") from exc
    if kind != "none" and len(ids) != f and f > 0 and ids_raw != "auto":
        raise ConfigError(f"attack.ids lists {len(ids)} workers but attack.f = {f}")
    try:
        return AttackSpec(
            kind=kind,
            byzantine_ids=ids,
            rng_seed=cfg["attack.seed"],
            lo=cfg["attack.lo"],
            hi=cfg["attack.hi"],
            epsilon=cfg["attack.epsilon"],
            scale=cfg["attack.scale"],
            rate=cfg["attack.rate"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_flag_config(cfg: dict) -> FlagConfig:
    try:
        return FlagConfig(
            m=_auto_int(cfg["flag.m"]),
            lam=cfg["flag.lambda"],
            regularizer=cfg["flag.regularizer"],
            l1_delta=cfg["flag.delta"],
            max_iters=cfg["flag.max_iters"],
            tol=cfg["flag.tol"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_aggregator(cfg: dict) -> AggregatorSpec:
    try:
        return AggregatorSpec(
            kind=cfg["agg.kind"],
            f=cfg["agg.f"],
            m=_auto_int(cfg["agg.m"]),
            flag_config=build_flag_config(cfg),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_run_config(cfg: dict) -> RunConfig:
    try:
        return RunConfig(
            p=cfg["run.p"],
            iterations=cfg["run.iterations"],
            batch_size=cfg["run.batch_size"],
            seed=cfg["run.seed"],
            lr=cfg["run.lr"],
            lr_decay=cfg["run.lr_decay"],
            lr_interval=cfg["run.lr_interval"],
            model=cfg["run.model"],
            hidden=cfg["run.hidden"],
            dim=cfg["run.dim"],
            classes=cfg["run.classes"],
            samples_per_class=cfg["run.samples_per_class"],
            spread=cfg["run.spread"],
            attack=build_attack(cfg),
            aggregator=build_aggregator(cfg),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_augment(cfg: dict) -> AugmentSpec:
    try:
        return AugmentSpec(
            kind=cfg["augment.kind"],
            fraction=cfg["augment.fraction"],
            iterations=cfg["augment.iterations"],
            smoothing=cfg["augment.m"],
            sigma=cfg["augment.sigma"],
            horizon=cfg["augment.horizon"],
            step=cfg["augment.step"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
