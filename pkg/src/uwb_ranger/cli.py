"""Command-line harness: simulate, extract, train, predict, evaluate, sweep."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, EmptyPdpError, InputError, RangerError
from .estimators import METHODS, RangingModel, TrainConfig, train
from .evaluation import SWEEP_KINDS, evaluate, rows_to_csv, run_sweep
from .features import FEATURE_SUBSETS, FeatureTable, extract_features, read_feature_csv, write_feature_csv
from .gpr import OptConfig
from .pdp import apply_threshold, read_pdp_any, write_pdp_csv
from .sim import dump_config, load_config, simulate, split

log = logging.getLogger("uwb_ranger")

LABELS_FILE = "labels.csv"
LABELS_HEADER = ("file", "distance_m", "is_nlos")


def _setup_logging():
    level = os.environ.get("UWB_RANGER_LOG", "WARNING").strip().upper()
    if level.isdigit():
        lvl = int(level)
    else:
        lvl = logging.getLevelName(level)
        if not isinstance(lvl, int):
            lvl = logging.WARNING
    logging.basicConfig(level=lvl, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _write_text(path, text: str):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def _load_model(path) -> RangingModel:
    try:
        with open(path) as fh:
            return RangingModel.from_dict(json.load(fh))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError(f"{path}: not a valid model file ({exc})") from exc


def _require(args, *names):
    for n in names:
        if getattr(args, n) is None:
            raise ConfigError(f"--{n.replace('_', '-')} is required")


# -- commands ------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    _require(args, "out")
    cfg = load_config(args.config, seed=args.seed, n_samples=args.n_samples, mode=args.mode)
    res = simulate(cfg)
    out = Path(args.out)
    if cfg.mode == "features":
        out.parent.mkdir(parents=True, exist_ok=True)
        write_feature_csv(res.table, out)
        log.info("wrote %d rows to %s", len(res.table), out)
        return 0
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, p in enumerate(res.pdps):
        name = f"pdp_{i:05d}.csv"
        write_pdp_csv(p, out / name)
        rows.append((name, repr(float(res.table.distance[i])), str(int(res.table.is_nlos[i]))))
    with open(out / LABELS_FILE, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LABELS_HEADER)
        w.writerows(rows)
    _write_text(out / "config.txt", dump_config(cfg))
    log.info("wrote %d PDP files to %s", len(rows), out)
    return 0


def _read_labels(path: Path) -> dict[str, tuple[float, bool]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(c.strip() for c in next(reader, ()))
        if header != LABELS_HEADER:
            raise InputError(f"{path}: expected header {','.join(LABELS_HEADER)}")
        return {r[0]: (float(r[1]), bool(int(r[2]))) for r in reader if r}


def cmd_extract(args) -> int:
    _require(args, "out")
    pdp_dir = Path(args.pdp_dir)
    if not pdp_dir.is_dir():
        raise InputError(f"{pdp_dir} is not a directory")
    files = sorted(p for p in pdp_dir.glob("*.csv") if p.name != LABELS_FILE)
    if not files:
        raise InputError(f"{pdp_dir} contains no PDP files")
    labels = _read_labels(pdp_dir / LABELS_FILE) if (pdp_dir / LABELS_FILE).exists() else None
    rows, dist, nlos, skipped = [], [], [], 0
    for f in files:
        try:
            feats = extract_features(apply_threshold(read_pdp_any(f), args.p_th))
        except EmptyPdpError as exc:
            log.warning("skipping %s: %s", f.name, exc)
            skipped += 1
            continue
        rows.append(feats.as_model_units())
        if labels is not None:
            if f.name not in labels:
                raise InputError(f"{f.name} has no entry in {LABELS_FILE}")
            dist.append(labels[f.name][0])
            nlos.append(labels[f.name][1])
    if skipped:
        print(f"skipped {skipped} of {len(files)} profiles with no bin above threshold", file=sys.stderr)
    if not rows:
        raise InputError("no profile produced features")
    x = np.array(rows, dtype=float)
    table = FeatureTable(x, np.array(dist), np.array(nlos, dtype=bool)) if labels is not None else FeatureTable(x)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_feature_csv(table, args.out)
    return 0


def _train_config(args) -> TrainConfig:
    cfg = TrainConfig(clip_to_rank=args.clip_to_rank, gpr=OptConfig(seed=args.seed or 0))
    updates = {
        "degree": args.degree,
        "n_components": args.num_components,
        "n_id_components": args.num_id_components,
        "feature_subset": args.feature_subset,
    }
    return replace(cfg, **{k: v for k, v in updates.items() if v is not None})


def cmd_train(args) -> int:
    _require(args, "method", "features", "out")
    table = read_feature_csv(args.features)
    model = train(args.method, table, _train_config(args))
    _write_text(args.out, _dump_json(model.to_dict()))
    return 0


def cmd_predict(args) -> int:
    _require(args, "model", "features", "out")
    model = _load_model(args.model)
    mean, var, p_los = model.predict(read_feature_csv(args.features).x)
    lines = ["estimate_m,variance_m2,p_los"]
    lines += [f"{m!r},{v!r},{p!r}" for m, v, p in zip(map(float, mean), map(float, var), map(float, p_los))]
    _write_text(args.out, "\n".join(lines) + "\n")
    return 0


def cmd_evaluate(args) -> int:
    _require(args, "model", "features", "out")
    rep = evaluate(_load_model(args.model), read_feature_csv(args.features))
    _write_text(args.out, rep.to_json())
    print(f"{rep.method}: rmse {rep.rmse:.3f} m, p50 {rep.percentiles[50]:.3f} m, "
          f"p95 {rep.percentiles[95]:.3f} m")
    return 0


def cmd_split(args) -> int:
    _require(args, "features", "out")
    table = read_feature_csv(args.features)
    if not table.labeled:
        raise InputError("splitting needs labeled features")
    tr, te = split(table, args.train_fraction, True, args.seed or 0)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_feature_csv(tr, out / "train.csv")
    write_feature_csv(te, out / "test.csv")
    return 0


def cmd_sweep(args) -> int:
    _require(args, "out")
    seed = args.seed or 0
    if args.features is not None:
        table = read_feature_csv(args.features)
    else:
        table = simulate(load_config(args.config, seed=seed, mode="features")).table
    cfg = _train_config(args)
    cfg = replace(cfg, clip_to_rank=True)
    kwargs = {}
    if args.methods:
        if args.kind not in ("train_size", "feature_subset"):
            raise ConfigError(f"--methods does not apply to the {args.kind} sweep")
        kwargs["methods"] = tuple(args.methods.split(","))
    rows = run_sweep(args.kind, table, args.train_fraction, seed, cfg, **kwargs)
    _write_text(args.out, rows_to_csv(rows))
    return 0


# -- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uwb-ranger", description="UWB ranging with kernel methods.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, *flags):
        if "config" in flags:
            sp.add_argument("--config", help="simulator config file (key = value lines)")
        if "seed" in flags:
            sp.add_argument("--seed", type=int, default=None)
        if "features" in flags:
            sp.add_argument("--features", help="feature CSV")
        if "model" in flags:
            sp.add_argument("--model", help="model JSON")
        sp.add_argument("--out", help="output path")

    def hyper(sp):
        sp.add_argument("--degree", type=int, help="polynomial kernel degree c")
        sp.add_argument("--num-components", type=int, help="retained principal components M")
        sp.add_argument("--num-id-components", type=int, help="components used for NLOS identification M'")
        sp.add_argument("--feature-subset", choices=sorted(FEATURE_SUBSETS))
        sp.add_argument("--clip-to-rank", action="store_true",
                        help="reduce M to the Gram rank instead of failing")

    sp = sub.add_parser("simulate", help="generate a labeled dataset")
    common(sp, "config", "seed")
    sp.add_argument("--n-samples", type=int)
    sp.add_argument("--mode", choices=("features", "pdp"))
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("extract", help="extract features from a directory of PDP files")
    sp.add_argument("pdp_dir")
    sp.add_argument("--p-th", type=float, default=None, help="detection threshold in dBm")
    common(sp)
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("split", help="stratified train/test split")
    common(sp, "features", "seed")
    sp.add_argument("--train-fraction", type=float, default=0.5)
    sp.set_defaults(func=cmd_split)

    sp = sub.add_parser("train", help="fit a ranging model")
    common(sp, "features", "seed")
    sp.add_argument("--method", choices=METHODS)
    hyper(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("predict", help="range estimates for a feature file")
    common(sp, "features", "model")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("evaluate", help="error report for a labeled feature file")
    common(sp, "features", "model")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("sweep", help="parameter sweep table")
    sp.add_argument("kind", choices=SWEEP_KINDS)
    common(sp, "config", "seed", "features")
    sp.add_argument("--train-fraction", type=float, default=0.5)
    sp.add_argument("--methods", help="comma-separated methods for train_size/feature_subset")
    hyper(sp)
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RangerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
