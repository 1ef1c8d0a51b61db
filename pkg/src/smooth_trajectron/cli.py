"""Command line: ``gen``, ``train``, ``eval``, ``sweep``, ``report``.

Exit codes: 0 success, 2 usage/configuration, 3 data or validation, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import os
import sys

from . import config as flatconfig
from .encoder import CELL_TYPE
from .estimator import HISTORY_COLUMNS, SmoothTrajectron
from .exceptions import ConfigurationError, NumericError, ValidationError
from .report import write_report
from .scenes import GenConfig, generate_gap, generate_urban, load_tracks, make_split, save_tracks
from .training import (
    DEFAULT_HORIZONS_S,
    Checkpoint,
    MetricsTable,
    check_cell_type,
    evaluate,
    load_checkpoint,
    save_checkpoint,
    train,
)

log = logging.getLogger("smooth_trajectron")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
DEFAULT_BETAS = (0.0, 0.01, 0.1, 0.5, 1.0, 10.0)
DEFAULT_SPLITS = ("random", "critical")
DEFAULT_N_INPUTS = (2, 10)
DEFAULT_SEEDS = (0, 1, 2)
TRACKS_FILE, GAP_FILE = "tracks.csv", "gap.csv"
# parameters whose default is None still need a parser
_NONE_TYPES = {"n_input": int, "clip_norm": float}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _list_of(kind):
    def parse(text):
        try:
            return [kind(t) for t in text.split(",") if t.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad list {text!r}") from None

    return parse


def _add_overrides(parser):
    group = parser.add_argument_group("model/training overrides (beat the config file)")
    for name, default in SmoothTrajectron().get_params().items():
        kind = _NONE_TYPES.get(name) or (_parse_bool if isinstance(default, bool) else type(default))
        group.add_argument("--" + name.replace("_", "-"), dest="ov_" + name, type=kind, default=None, metavar="V")


def _add_data(parser, required=True):
    parser.add_argument("--tracks", required=required, help="track CSV")
    parser.add_argument("--gap", help="gap metadata CSV (gap scenes)")
    parser.add_argument("--dt", type=float, default=0.5, help="frame period in seconds (default 0.5)")


def _add_split(parser, default="none"):
    parser.add_argument("--split", choices=("none", "random", "critical"), default=default)
    parser.add_argument("--split-seed", type=int, default=0)
    parser.add_argument("--test-fraction", type=float, default=0.2)
    parser.add_argument("--val-fraction", type=float, default=0.0)


def effective_config(args) -> dict:
    cfg = SmoothTrajectron().get_params()
    if getattr(args, "config", None):
        loaded = flatconfig.load(_existing(args.config))
        check_cell_type(loaded.pop("cell_type", CELL_TYPE), args.config)
        unknown = sorted(set(loaded) - set(cfg))
        if unknown:
            raise ConfigurationError(f"{args.config}: unknown keys {unknown}", field=unknown[0])
        cfg.update(loaded)
    for k in cfg:
        v = getattr(args, "ov_" + k, None)
        if v is not None:
            cfg[k] = v
    SmoothTrajectron(**cfg)._check_params()
    return cfg


def _existing(path):
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such file: {path}")
    return path


def _load_data(args):
    return load_tracks(_existing(args.tracks), _existing(args.gap) if args.gap else None, dt=args.dt)


def _split(scenes, args, method=None, seed=None):
    method = args.split if method is None else method
    if method == "none":
        return None
    return make_split(scenes, method, seed=args.split_seed if seed is None else seed,
                      test_fraction=args.test_fraction, val_fraction=args.val_fraction)


def _write_history(est, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(HISTORY_COLUMNS) + ["seconds"])
        for row, sec in zip(est.history_, est.epoch_seconds_):
            w.writerow([row["epoch"]] + [repr(row[c]) for c in HISTORY_COLUMNS[1:]] + [repr(sec)])


def _train_to(cfg, scenes, split, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    flatconfig.dump({**cfg, "cell_type": CELL_TYPE}, os.path.join(out_dir, "config.toml"))
    est = train(cfg, scenes, split)
    save_checkpoint(Checkpoint.from_estimator(est), os.path.join(out_dir, "checkpoint.npz"))
    _write_history(est, os.path.join(out_dir, "history.csv"))
    return est


def _test_set(scenes, split):
    return scenes if split is None else scenes.subset(split.test)


def _model_tag(cfg) -> str:
    n_i = cfg["n_input"] if cfg["n_input"] is not None else cfg["history_steps"] + 1
    return f"st-nI{n_i}"


# -- commands ------------------------------------------------------------


def cmd_gen(args):
    gen = GenConfig(n_scenes=args.scenes, n_frames=args.frames, dt=args.dt)
    scenes = generate_urban(gen, args.seed) if args.kind == "urban" else generate_gap(gen, args.seed)
    os.makedirs(args.out, exist_ok=True)
    gap_path = os.path.join(args.out, GAP_FILE) if args.kind == "gap" else None
    save_tracks(scenes, os.path.join(args.out, TRACKS_FILE), gap_path)
    flatconfig.dump({"kind": args.kind, "scenes": args.scenes, "seed": args.seed, "frames": args.frames,
                     "dt": args.dt}, os.path.join(args.out, "gen_config.toml"))
    log.info("wrote %d %s scenes to %s", len(scenes), args.kind, args.out)


def cmd_train(args):
    cfg = effective_config(args)
    scenes = _load_data(args)
    est = _train_to(cfg, scenes, _split(scenes, args), args.out)
    log.info("trained %d epochs; validation loss %.6f", len(est.history_), est.val_loss_)


def cmd_eval(args):
    ckpt = load_checkpoint(_existing(args.checkpoint))
    est = ckpt.to_estimator()
    scenes = _load_data(args)
    split = _split(scenes, args)
    table = evaluate(est, _test_set(scenes, split), args.horizons, split="all" if split is None else args.split,
                     model_tag=args.model_tag or _model_tag(ckpt.config), seed=args.seed, n_samples=args.n_samples)
    out_dir = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(out_dir, exist_ok=True)
    table.to_csv(args.out)
    log.info("wrote %d rows to %s", len(table), args.out)


def _file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def cell_name(beta, split, n_input, seed) -> str:
    return f"beta={beta:g}_split={split}_nI={n_input}_seed={seed}"


def cmd_sweep(args):
    if not args.betas:
        raise ConfigurationError("beta list is empty", field="betas")
    base = effective_config(args)
    scenes = _load_data(args)
    data_digest = _file_digest(args.tracks) + (_file_digest(args.gap) if args.gap else "")
    os.makedirs(args.out, exist_ok=True)
    flatconfig.dump({**base, "cell_type": CELL_TYPE, "betas": args.betas, "splits": args.splits, "n_inputs": args.n_inputs,
                     "seeds": args.seeds, "horizons": args.horizons, "test_fraction": args.test_fraction},
                    os.path.join(args.out, "sweep.toml"))
    merged = MetricsTable()
    for split in args.splits:
        for n_i in args.n_inputs:
            for seed in args.seeds:
                data_split = make_split(scenes, split, seed=seed, test_fraction=args.test_fraction)
                for beta in args.betas:
                    cfg = {**base, "beta": float(beta), "n_input": int(n_i), "random_state": int(seed)}
                    cell = os.path.join(args.out, "cells", cell_name(beta, split, n_i, seed))
                    extra = flatconfig.dumps({"split": split, "horizons": args.horizons,
                                              "test_fraction": args.test_fraction, "data": data_digest})
                    digest = hashlib.sha256((flatconfig.dumps(cfg) + extra).encode()).hexdigest()
                    merged.extend(_sweep_cell(cfg, scenes, data_split, cell, digest, args))
    merged.to_csv(os.path.join(args.out, "results.csv"))
    log.info("sweep complete: %d rows", len(merged))


def _sweep_cell(cfg, scenes, split, cell, digest, args) -> MetricsTable:
    hash_path, results = os.path.join(cell, "cell.hash"), os.path.join(cell, "results.csv")
    if os.path.exists(hash_path):
        with open(hash_path, encoding="utf-8") as fh:
            prior = fh.read().strip()
        if prior != digest:
            raise ValidationError(
                f"{cell} holds results from a different configuration (hash {prior[:12]} != {digest[:12]}); "
                "use a fresh output directory or remove the stale cell"
            )
        if os.path.exists(results):
            log.info("skip finished cell %s", os.path.basename(cell))
            return MetricsTable.from_csv(results)
    os.makedirs(cell, exist_ok=True)
    with open(hash_path, "w", encoding="utf-8") as fh:
        fh.write(digest + "\n")
    log.info("run cell %s", os.path.basename(cell))
    est = _train_to(cfg, scenes, split, cell)
    table = evaluate(est, _test_set(scenes, split), args.horizons, split=split.method.value,
                     model_tag=_model_tag(cfg), seed=cfg["random_state"], n_samples=cfg["n_samples"])
    tmp = results + ".tmp"
    table.to_csv(tmp)
    os.replace(tmp, results)
    return table


def cmd_report(args):
    path = args.results
    if os.path.isdir(path):
        path = os.path.join(path, "results.csv")
    paths = write_report(_existing(path), args.out or os.path.dirname(os.path.abspath(path)))
    for p in paths:
        log.info("wrote %s", p)


# -- entry point ---------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smooth-trajectron", description=__doc__.splitlines()[0])
    parser.add_argument("-q", "--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate synthetic scenes")
    p.add_argument("--kind", choices=("urban", "gap"), required=True)
    p.add_argument("--scenes", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=GenConfig.n_frames)
    p.add_argument("--dt", type=float, default=0.5)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train one model")
    p.add_argument("--config", help="flat TOML config")
    _add_data(p)
    _add_split(p)
    p.add_argument("--out", required=True, help="output directory")
    _add_overrides(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint to a results CSV")
    p.add_argument("--checkpoint", required=True)
    _add_data(p)
    _add_split(p)
    p.add_argument("--horizons", type=_list_of(float), default=list(DEFAULT_HORIZONS_S), help="seconds, comma list")
    p.add_argument("--seed", type=int, default=0, help="sampling seed")
    p.add_argument("--n-samples", type=int, default=None)
    p.add_argument("--model-tag")
    p.add_argument("--out", required=True, help="results CSV path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="train and evaluate a beta x split x n_I x seed grid")
    p.add_argument("--config", help="flat TOML base config")
    _add_data(p)
    p.add_argument("--betas", type=_list_of(float), default=list(DEFAULT_BETAS))
    p.add_argument("--splits", type=_list_of(str), default=list(DEFAULT_SPLITS))
    p.add_argument("--n-inputs", type=_list_of(int), default=list(DEFAULT_N_INPUTS))
    p.add_argument("--seeds", type=_list_of(int), default=list(DEFAULT_SEEDS))
    p.add_argument("--horizons", type=_list_of(float), default=list(DEFAULT_HORIZONS_S))
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--out", required=True, help="results directory")
    _add_overrides(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="markdown tables and SVG plots from results")
    p.add_argument("--results", required=True, help="results directory or CSV")
    p.add_argument("--out", help="output directory (default: next to the CSV)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    if getattr(args, "splits", None):
        bad = sorted(set(args.splits) - set(DEFAULT_SPLITS))
        if bad:
            parser.print_usage(sys.stderr)
            print(f"error: unknown split methods {bad}", file=sys.stderr)
            return EXIT_USAGE
    try:
        args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValidationError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
