"""Command-line front end: train / aggregate / verify / augment.

Exit codes: 0 success, 1 verification failure, 2 usage or config error,
3 runtime error. FLAGAGG_THREADS caps internal parallelism; the current
implementation is single-threaded, so any value yields identical output.
"""

from __future__ import annotations

import argparse
import io
import os
import sys

import numpy as np

from . import augment as aug
from . import config as cfgmod
from . import verify as verifymod
from .aggregators import AGGREGATOR_KINDS, AggregatorSpec, aggregate
from .errors import ConfigError, FlagAggError
from .flag import REGULARIZERS, FlagConfig
from .sim import train, with_aggregator

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _threads() -> int:
    raw = os.environ.get("FLAGAGG_THREADS", "")
    try:
        return max(1, int(raw)) if raw else os.cpu_count() or 1
    except ValueError:
        return 1


def _config_epilog() -> str:
    lines = ["config keys (key = value per line, '#' comments, unknown keys fail):"]
    for key, (default, _, help_text) in cfgmod.CONFIG_KEYS.items():
        lines.append(f"  {key} = {default}  ({help_text})")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flagagg",
        description="Byzantine-robust gradient aggregation toolbox",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser(
        "train",
        help="run the parameter-server training simulator",
        epilog=_config_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p_train.add_argument("--config", help="path to the key = value config file")
    p_train.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key"
    )
    p_train.add_argument("--out", help="write the per-iteration CSV here (default stdout)")
    p_train.add_argument(
        "--plot-data",
        help="also write a per-aggregator accuracy comparison CSV to this path",
    )
    p_train.add_argument(
        "--compare",
        default="mean",
        help="comma list of extra aggregator kinds for --plot-data (default: mean)",
    )
    p_train.add_argument(
        "--figures", help="directory for rendered loss/accuracy figures (PNG)"
    )
    p_train.add_argument(
        "--timing",
        action="store_true",
        help="record real aggregation wall time (breaks bitwise reproducibility)",
    )

    p_agg = sub.add_parser("aggregate", help="one-shot aggregation of a gradient matrix CSV")
    p_agg.add_argument("matrix", help="CSV file, one row per line, columns = workers")
    p_agg.add_argument("--agg", default="mean", choices=AGGREGATOR_KINDS)
    p_agg.add_argument("--f", type=int, default=0, help="assumed Byzantine count")
    p_agg.add_argument("--m", type=int, default=None, help="selection count / subspace dim")
    p_agg.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p_agg.add_argument("--regularizer", default="none", choices=REGULARIZERS)
    p_agg.add_argument("--max-iters", type=int, default=5)
    p_agg.add_argument("--tol", type=float, default=1e-10)
    p_agg.add_argument("--out", help="write the aggregated vector here (default stdout)")

    p_verify = sub.add_parser("verify", help="run mathematical self-check suites")
    p_verify.add_argument("suite", choices=verifymod.SUITES + ("all",))
    p_verify.add_argument(
        "--inject-fault",
        action="store_true",
        help=argparse.SUPPRESS,  # test-only: force a failure to exercise exit code 1
    )

    p_aug = sub.add_parser("augment", help="transform PGM images")
    p_aug.add_argument("input", help="a PGM file or a directory with index.txt")
    p_aug.add_argument("--map", default="catmap", choices=("catmap", "smoothcat", "lv", "none"))
    p_aug.add_argument("--iters", type=int, default=1, help="cat-map iterations")
    p_aug.add_argument("--m", type=float, default=0.95, help="smooth cat-map degree")
    p_aug.add_argument("--noise", type=float, default=0.0, help="Gaussian noise sigma")
    p_aug.add_argument("--fraction", type=float, default=1.0, help="directory-mode share")
    p_aug.add_argument("--seed", type=int, default=0)
    p_aug.add_argument("--out", required=True, help="output PGM file or directory")
    return parser


def _cmd_train(args) -> int:
    cfg = cfgmod.default_config()
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        cfg = cfgmod.parse_config_text(text, base=cfg)
    cfg = cfgmod.apply_overrides(cfg, args.set)
    run_cfg = cfgmod.build_run_config(cfg)

    record = train(run_cfg, record_timing=args.timing)
    buf = io.StringIO()
    record.write_csv(buf)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())

    if args.figures:
        from .plotting import render_run_figures

        render_run_figures(record, args.figures, prefix=cfg["agg.kind"])

    if args.plot_data:
        kinds = [cfg["agg.kind"]] + [
            k.strip() for k in args.compare.split(",") if k.strip() and k.strip() != cfg["agg.kind"]
        ]
        series = {}
        for kind in kinds:
            if kind == cfg["agg.kind"]:
                rec = record
            else:
                spec = cfgmod.build_aggregator({**cfg, "agg.kind": kind})
                rec = train(with_aggregator(run_cfg, spec), record_timing=args.timing)
            series[kind] = ([r[0] for r in rec.rows], [r[2] for r in rec.rows])
        with open(args.plot_data, "w", encoding="utf-8") as fh:
            fh.write("iter," + ",".join(kinds) + "\n")
            for i, it in enumerate(series[kinds[0]][0]):
                vals = ",".join(f"{series[k][1][i]:.12g}" for k in kinds)
                fh.write(f"{it},{vals}\n")
        if args.figures:
            from .plotting import render_comparison_figure

            render_comparison_figure(series, args.figures)
    return EXIT_OK


def _cmd_aggregate(args) -> int:
    try:
        g = np.loadtxt(args.matrix, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        print(f"error: cannot parse matrix CSV: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    flag_cfg = FlagConfig(
        m=args.m, lam=args.lam, regularizer=args.regularizer,
        max_iters=args.max_iters, tol=args.tol,
    )
    spec = AggregatorSpec(kind=args.agg, f=args.f, m=args.m, flag_config=flag_cfg)
    vec = aggregate(g, spec)
    text = "\n".join(f"{v:.12g}" for v in vec) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_verify(args) -> int:
    results = verifymod.run_suite(args.suite, inject_fault=args.inject_fault)
    width = max(len(name) for name, _, _ in results)
    ok_all = True
    for name, ok, detail in results:
        status = "PASS" if ok else "FAIL"
        print(f"{name:<{width}}  {status}  {detail}")
        ok_all &= ok
    return EXIT_OK if ok_all else EXIT_VERIFY_FAIL


_MAP_NAMES = {"catmap": "cat_map", "smoothcat": "smooth_cat_map", "lv": "lotka_volterra"}


def _cmd_augment(args) -> int:
    kind = _MAP_NAMES.get(args.map, "gaussian_noise")
    spec = aug.AugmentSpec(
        kind=kind if args.map != "none" else "gaussian_noise",
        fraction=args.fraction,
        iterations=args.iters,
        smoothing=args.m,
        sigma=args.noise,
    )
    if os.path.isdir(args.input):
        try:
            images, names, labels = aug.read_batch(args.input)
        except (OSError, ValueError) as exc:
            print(f"error: cannot read batch: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        out = aug.augment_batch(images, spec, seed=args.seed)
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "index.txt"), "w", encoding="utf-8") as fh:
            for name, label in zip(names, labels):
                fh.write(f"{name},{label}\n")
        for name, img in zip(names, out):
            aug.write_pgm(os.path.join(args.out, name), img)
        return EXIT_OK
    try:
        img = aug.read_pgm(args.input)
    except (OSError, ValueError) as exc:
        print(f"error: cannot read PGM: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    result = aug.apply_map(img, spec)
    if spec.sigma > 0:
        rng = np.random.default_rng(np.random.SeedSequence(entropy=args.seed, spawn_key=(1, 0)))
        result = np.clip(result + spec.sigma * rng.standard_normal(result.shape), 0.0, 1.0)
    aug.write_pgm(args.out, result)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 0
        return EXIT_CONFIG if code not in (0,) else 0
    _threads()  # validated for side effects only; execution is single-threaded
    try:
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "aggregate":
            return _cmd_aggregate(args)
        if args.command == "verify":
            return _cmd_verify(args)
        return _cmd_augment(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FlagAggError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
