"""``liftnet`` command line: train, eval, verify, filters."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .data import DataFormatError, load_dataset
from .io import ConfigError, MetricsCSV, WeightsFileError, load_weights, parse_config, save_weights
from .metrics import accuracy, export_filters, linear_fraction
from .netspec import NetworkSpec
from .training import NonFiniteLossError, TrainConfig, train
from .verify import SUITES, run_suite

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NONFINITE = 4
EXIT_WEIGHTS = 5

log = logging.getLogger("liftnet")

_DEFAULTS = TrainConfig()

# option name -> (type, default); shared by flags and config files
TRAIN_OPTIONS = {
    "mode": (str, "contrastive"),
    "layers": (str, "784-64-64-10"),
    "nonlin": (str, "relu"),
    "gamma": (float, 0.125),
    "eta": (float, _DEFAULTS.eta_bp),
    "batch": (int, _DEFAULTS.batch_size),
    "epochs": (int, _DEFAULTS.epochs),
    "sweeps": (int, _DEFAULTS.sweeps),
    "seed": (int, _DEFAULTS.seed),
    "data_dir": (str, None),
    "dataset": (str, "mnist"),
    "out_csv": (str, "metrics.csv"),
    "out_weights": (str, "weights.bin"),
    "deterministic": (bool, False),
    "workers": (int, None),
    "train_subset": (int, None),
    "test_subset": (int, None),
    "warmup_epochs": (int, _DEFAULTS.warmup_epochs),
    "warmup_factor": (float, _DEFAULTS.warmup_factor),
    "lifted_scale": (float, _DEFAULTS.lifted_scale),
    "eval_mode": (str, _DEFAULTS.eval_mode),
    "linfrac_split": (str, _DEFAULTS.linfrac_split),
}


class CLIError(Exception):
    def __init__(self, msg, code):
        super().__init__(msg)
        self.code = code


def _to_bool(s: str) -> bool:
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _convert(key, typ, value):
    if value is None or value == "" or (isinstance(value, str) and value.lower() == "none"):
        return None
    return _to_bool(value) if typ is bool else typ(value)


def resolve_options(args) -> dict:
    """Defaults, overridden by the config file, overridden by explicit flags."""
    opts = {k: d for k, (_, d) in TRAIN_OPTIONS.items()}
    if args.config:
        try:
            cfg = parse_config(args.config)
        except OSError as e:
            raise CLIError(f"cannot read config: {e}", EXIT_CONFIG)
        except ConfigError as e:
            raise CLIError(str(e), EXIT_CONFIG)
        lines = cfg.pop("__lines__", {})
        for key, value in cfg.items():
            if key not in TRAIN_OPTIONS:
                raise CLIError(f"{args.config}:{lines[key]}: unknown key {key!r}", EXIT_CONFIG)
            try:
                opts[key] = _convert(key, TRAIN_OPTIONS[key][0], value)
            except ValueError as e:
                raise CLIError(f"{args.config}:{lines[key]}: bad value for {key}: {e}", EXIT_CONFIG)
    for key in TRAIN_OPTIONS:
        v = getattr(args, key, None)
        if v is not None:
            opts[key] = v
    return opts


def _data_dir(value):
    d = value or os.environ.get("LIFTNET_DATA_DIR")
    if not d:
        raise CLIError("no data directory: pass --data-dir or set LIFTNET_DATA_DIR", EXIT_DATA)
    return Path(d)


def _load(name, data_dir, split, subset=None):
    try:
        return load_dataset(name, data_dir, split).subset(subset)
    except (OSError, DataFormatError) as e:
        raise CLIError(f"cannot load {name} {split} data: {e}", EXIT_DATA)
    except ValueError as e:
        raise CLIError(str(e), EXIT_DATA)


def _summary(spec, w, ds, split, sweeps):
    fwd = accuracy(spec, w, ds, "forward", sweeps)
    inf = accuracy(spec, w, ds, "inferred", sweeps)
    lf = linear_fraction(spec, w, ds, sweeps)
    return (f"split={split} acc_forward={fwd:.6f} acc_inferred={inf:.6f} "
            f"linfrac={','.join(f'{v:.6f}' for v in lf)}")


def cmd_train(args) -> int:
    o = resolve_options(args)
    try:
        spec = NetworkSpec.build(o["layers"], o["nonlin"], o["gamma"])
        workers = 1 if o["deterministic"] else (o["workers"] or os.cpu_count() or 1)
        cfg = TrainConfig(mode=o["mode"], eta_bp=o["eta"], batch_size=o["batch"], epochs=o["epochs"],
                          sweeps=o["sweeps"], seed=o["seed"], warmup_epochs=o["warmup_epochs"],
                          warmup_factor=o["warmup_factor"], lifted_scale=o["lifted_scale"],
                          eval_mode=o["eval_mode"], linfrac_split=o["linfrac_split"], workers=workers)
    except ValueError as e:
        raise CLIError(f"invalid configuration: {e}", EXIT_CONFIG)
    data_dir = _data_dir(o["data_dir"])
    train_set = _load(o["dataset"], data_dir, "train", o["train_subset"])
    test_set = _load(o["dataset"], data_dir, "test", o["test_subset"])
    if train_set.input_dim != spec.layer_dims[0] or train_set.num_classes != spec.layer_dims[-1]:
        raise CLIError(f"architecture {spec.describe()} does not fit {o['dataset']} "
                       f"({train_set.input_dim} inputs, {train_set.num_classes} classes)", EXIT_CONFIG)
    log.info("training %s (%s) on %d samples, %d workers", spec.describe(), cfg.mode,
             len(train_set), cfg.workers)
    out = MetricsCSV(o["out_csv"], spec.n_layers - 1)
    try:
        w, _ = train(spec, train_set, cfg, test_set, on_epoch=out.write)
    except NonFiniteLossError as e:
        raise CLIError(f"aborted: {e}", EXIT_NONFINITE)
    finally:
        out.close()
    save_weights(o["out_weights"], spec, w)
    print(_summary(spec, w, train_set, "train", cfg.sweeps))
    print(_summary(spec, w, test_set, "test", cfg.sweeps))
    return EXIT_OK


def _load_weights(path):
    try:
        return load_weights(path)
    except OSError as e:
        raise CLIError(f"cannot read weights: {e}", EXIT_WEIGHTS)
    except WeightsFileError as e:
        raise CLIError(str(e), EXIT_WEIGHTS)


def cmd_eval(args) -> int:
    spec, w = _load_weights(args.weights)
    if args.layers and NetworkSpec.build(args.layers, "linear").layer_dims != spec.layer_dims:
        raise CLIError(f"weights file holds {spec.describe()}, expected layers {args.layers}",
                       EXIT_WEIGHTS)
    data_dir = _data_dir(args.data_dir)
    splits = ("train", "test") if args.split == "both" else (args.split,)
    for split in splits:
        subset = args.train_subset if split == "train" else args.test_subset
        ds = _load(args.dataset, data_dir, split, subset)
        if ds.input_dim != spec.layer_dims[0] or ds.num_classes != spec.layer_dims[-1]:
            raise CLIError(f"shape mismatch: weights expect {spec.layer_dims[0]} inputs and "
                           f"{spec.layer_dims[-1]} outputs, data has {ds.input_dim} and "
                           f"{ds.num_classes}", EXIT_WEIGHTS)
        print(_summary(spec, w, ds, split, args.sweeps))
    return EXIT_OK


def cmd_verify(args) -> int:
    suites = SUITES if args.suite == "all" else (args.suite,)
    ok = True
    for name in suites:
        print(f"== {name} (seed {args.seed})")
        for check in run_suite(name, args.seed):
            print(check.line())
            ok &= check.passed
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def cmd_filters(args) -> int:
    _, w = _load_weights(args.weights)
    try:
        export_filters(w, args.rows, args.cols, args.out)
    except ValueError as e:
        raise CLIError(str(e), EXIT_WEIGHTS)
    except OSError as e:
        raise CLIError(f"cannot write {args.out}: {e}", EXIT_CONFIG)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="liftnet", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a network and write metrics CSV and weights")
    t.add_argument("--config", help="key=value file; flags override its entries")
    for key, (typ, _) in TRAIN_OPTIONS.items():
        flag = "--" + key.replace("_", "-")
        if typ is bool:
            t.add_argument(flag, action="store_const", const=True, default=None)
        else:
            t.add_argument(flag, type=typ, default=None)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="accuracy and linear fractions of saved weights")
    e.add_argument("weights")
    e.add_argument("--dataset", default="mnist", choices=("mnist", "fashion", "cifar10gray"))
    e.add_argument("--data-dir")
    e.add_argument("--split", default="both", choices=("train", "test", "both"))
    e.add_argument("--sweeps", type=int, default=15)
    e.add_argument("--layers", help="expected architecture, e.g. 784-64-64-10")
    e.add_argument("--train-subset", type=int)
    e.add_argument("--test-subset", type=int)
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("verify", help="run a numerical property suite")
    v.add_argument("suite", choices=SUITES + ("all",))
    v.add_argument("--seed", type=int, default=1)
    v.set_defaults(func=cmd_verify)

    f = sub.add_parser("filters", help="export first-layer filters as a PGM image")
    f.add_argument("weights")
    f.add_argument("--rows", type=int, default=28)
    f.add_argument("--cols", type=int, default=28)
    f.add_argument("--out", default="filters.pgm")
    f.set_defaults(func=cmd_filters)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CLIError as e:
        print(f"liftnet: error: {e}", file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
