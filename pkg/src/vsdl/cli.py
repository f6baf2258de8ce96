"""Command-line entry point: ``vsdl {simulate,train,predict,evaluate,compare}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 training error,
1 anything else.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .channel import generate_dataset
from .config import SYSTEMS, load_config
from .errors import DataError, TrainingError, VsdlError
from .evaluation import evaluate, run_experiment
from .io import read_dataset, write_dataset
from .pipeline import LocalizationModel, train_system

log = logging.getLogger("vsdl")


def _config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML/JSON experiment config")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key, e.g. train.alpha=0.3 (repeatable)")


def _config(args):
    return load_config(args.config, args.overrides)


def cmd_simulate(args) -> None:
    cfg = _config(args)
    ppp = args.packets_per_point or cfg.packets_per_point
    ds = generate_dataset(cfg.topology, cfg.channel, ppp, args.seed)
    ds.meta["config_hash"] = cfg.digest()
    write_dataset(ds, args.out)
    log.info("wrote %d packets to %s", len(ds), args.out)


def cmd_train(args) -> None:
    cfg = _config(args)
    ds = read_dataset(args.data)
    try:
        model = train_system(args.system, ds, cfg.train, args.seed)
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        raise TrainingError(str(exc)) from exc
    model.save(args.out)
    log.info("saved %s bundle to %s", args.system, args.out)


def cmd_predict(args) -> None:
    model = LocalizationModel.load(args.bundle)
    ds = read_dataset(args.packets)
    pred, u_hat = model.predict_dataset(ds)
    K = model.view_spec.n_views
    header = "point_id,packet,y1_m,y2_m" + ("".join(f",u_hat_{k + 1}" for k in range(K)) if u_hat is not None else "")
    lines = [header]
    for r in range(len(ds)):
        row = f"{int(ds.point_id[r])},{int(ds.packet[r])},{float(pred[r, 0])!r},{float(pred[r, 1])!r}"
        if u_hat is not None:
            row += "".join(f",{float(v)!r}" for v in u_hat[r])
        lines.append(row)
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_evaluate(args) -> None:
    model = LocalizationModel.load(args.bundle)
    ds = read_dataset(args.data)
    if args.split != "all":
        ds = ds.subset(ds.split == args.split)
    if len(ds) == 0:
        raise DataError(f"no packets in split {args.split!r}")
    report = evaluate(model, ds, str(ds.meta.get("config_hash", "")))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=1) + "\n")
    (out / f"cdf_{model.system}.csv").write_text(report.cdf_csv())
    print(f"{model.system.upper()} mean error {report.mean:.4f} m, median {report.median:.4f} m over {report.errors.size} packets")


def cmd_compare(args) -> None:
    cfg = _config(args)
    result = run_experiment(cfg)
    result.write(args.out)
    sys.stdout.write(result.table())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vsdl", description="View-selective CSI localization")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic CSI dataset")
    _config_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--packets-per-point", type=int)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train one system on a dataset's training split")
    _config_args(p)
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--system", choices=SYSTEMS, default="vsdl")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, type=Path, help="bundle directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="locate packets with a trained bundle")
    p.add_argument("--bundle", required=True, type=Path)
    p.add_argument("--packets", required=True, type=Path)
    p.add_argument("--out", type=Path, help="CSV output (stdout when omitted)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="error report of a bundle on a dataset")
    p.add_argument("--bundle", required=True, type=Path)
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--split", choices=("train", "test", "all"), default="test")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="simulate, train and evaluate every system over several seeds")
    _config_args(p)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except VsdlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
