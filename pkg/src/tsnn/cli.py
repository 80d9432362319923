"""Command line entry points: train, eval, quantize, perturb, oracle-check.

Config files are flat `key = value` text; # starts a comment. Flags given on
the command line override file values. With --report PATH, every result row
is also appended to PATH as one JSON object per line.
"""

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, data_io
from .network import WeightStore
from .neuron import SpikeValue, solve_spike
from .oracle import simulate_first_crossing
from .robustness import perturb_weights, quantize_weights
from .train import TrainConfig, evaluate, train

# config keys that map to differently named TrainConfig attributes
_KEY_ALIASES = {"k": "k_hinge", "lambda": "lam", "sigma": "input_noise_sigma"}


def parse_config_file(path):
    """Read `key = value` lines into a dict keyed by TrainConfig field names."""
    fields = {f.name: f.type for f in dataclasses.fields(TrainConfig)}
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        key = _KEY_ALIASES.get(key.lower(), key)
        if key not in fields:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        out[key] = val
    return out


def build_config(file_values, overrides):
    cfg = TrainConfig()
    for key, val in file_values.items():
        cur = getattr(cfg, key)
        if isinstance(cur, bool):
            setattr(cfg, key, val.lower() in ("1", "true", "yes"))
        elif isinstance(cur, int):
            setattr(cfg, key, int(val))
        elif isinstance(cur, float):
            setattr(cfg, key, float(val))
        else:
            setattr(cfg, key, val)
    for key, val in overrides.items():
        if val is not None:
            setattr(cfg, key, val)
    return cfg.validate()


class Reporter:
    """Prints human-readable rows; mirrors them to a JSONL file when asked."""

    def __init__(self, path=None):
        self.path = Path(path) if path else None

    def emit(self, record):
        parts = []
        for key, val in record.items():
            if isinstance(val, float):
                parts.append(f"{key}={val:.6g}")
            else:
                parts.append(f"{key}={val}")
        print("  ".join(parts))
        if self.path:
            with self.path.open("a") as fh:
                fh.write(json.dumps(record) + "\n")


def _load_model(path):
    try:
        return data_io.load_model(path)
    except FileNotFoundError:
        raise SystemExit(f"error: model file not found: {path}")
    except data_io.LoadError as exc:
        raise SystemExit(f"error: {exc}")


def _load_split(data_dir, split):
    try:
        return data_io.load_mnist(data_dir, split)
    except FileNotFoundError as exc:
        raise SystemExit(f"error: dataset file not found: {exc.filename or data_dir}")
    except data_io.LoadError as exc:
        raise SystemExit(f"error: {exc}")


def _eval_record(tag, report):
    return {
        "record": tag,
        "accuracy": report.accuracy,
        "sparsity": report.sparsity,
        "spike_count": report.spike_count,
        "energy_joules": report.energy_joules,
        "energy_per_inference_j": report.energy_per_inference,
        "no_spike_count": report.no_spike_count,
        "n_samples": report.n_samples,
    }


def cmd_train(args):
    overrides = {
        "seed": args.seed,
        "data_dir": args.data_dir,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
    }
    try:
        file_values = parse_config_file(args.config) if args.config else {}
        cfg = build_config(file_values, overrides)
    except (ValueError, FileNotFoundError) as exc:
        raise SystemExit(f"error: {exc}")
    reporter = Reporter(args.report)
    train_data = _load_split(cfg.data_dir, "train")
    test_data = _load_split(cfg.data_dir, "test")

    def on_epoch(row):
        reporter.emit({"record": "epoch", **row})

    net, store, logs = train(cfg, train_data, test_data, on_epoch=on_epoch)
    if args.out:
        data_io.save_model(net, store, args.out)
        print(f"saved model to {args.out}")
    return 0


def cmd_eval(args):
    net, store = _load_model(args.model)
    data = _load_split(args.data_dir, args.split)
    report = evaluate(net, store, data, alpha=args.alpha, mode=args.mode)
    Reporter(args.report).emit(_eval_record("eval", report))
    return 0


def cmd_quantize(args):
    net, store = _load_model(args.model)
    if args.qat:
        data_train = _load_split(args.data_dir, "train")
        data_test = _load_split(args.data_dir, "test")
        cfg = TrainConfig(
            epochs=args.epochs,
            seed=args.seed,
            data_dir=args.data_dir,
            quant_target_bits=args.bits if args.bits != 32 else 0,
            lr_start=args.lr,
            lr_end=args.lr / 10.0,
            alpha=args.alpha,
            encode_mode=args.mode,
        )
        reporter = Reporter(args.report)

        def on_epoch(row):
            reporter.emit({"record": "qat_epoch", **row})

        train(cfg, data_train, data_test, net=net, store=store, on_epoch=on_epoch)
    deployed = WeightStore(
        [None if w is None else quantize_weights(w, args.bits) for w in store.weights]
    )
    data_io.save_model(net, deployed, args.out)
    print(f"saved {args.bits}-bit model to {args.out}")
    return 0


def cmd_perturb(args):
    net, store = _load_model(args.model)
    data = _load_split(args.data_dir, args.split)
    reporter = Reporter(args.report)
    accs = []
    for trial in range(args.trials):
        rng = np.random.default_rng(args.seed + trial)
        noisy = perturb_weights(store, args.snr_db, rng)
        report = evaluate(net, noisy, data, alpha=args.alpha, mode=args.mode)
        accs.append(report.accuracy)
        reporter.emit({"record": "perturb_trial", "trial": trial, "snr_db": args.snr_db, "accuracy": report.accuracy})
    reporter.emit(
        {
            "record": "perturb_summary",
            "snr_db": args.snr_db,
            "trials": args.trials,
            "mean_accuracy": float(np.mean(accs)),
            "min_accuracy": float(np.min(accs)),
        }
    )
    return 0


def cmd_oracle_check(args):
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    disagreements = 0
    fired_cases = 0
    for _ in range(args.cases):
        fan_in = int(rng.integers(1, 65))
        times = rng.uniform(0.0, 2.0, fan_in)
        w = rng.normal(0.1, 1.0, fan_in)
        sol = solve_spike([SpikeValue(math.exp(t)) for t in times], w)
        t_ref = simulate_first_crossing(times, w)
        if sol.z_out.fired != (t_ref is not None):
            disagreements += 1
            continue
        if t_ref is not None:
            fired_cases += 1
            t_hat = math.log(sol.z_out.z)
            worst = max(worst, abs(t_hat - t_ref) / max(abs(t_ref), 1e-30))
    Reporter(args.report).emit(
        {
            "record": "oracle_check",
            "cases": args.cases,
            "fired_cases": fired_cases,
            "disagreements": disagreements,
            "max_rel_deviation": worst,
        }
    )
    ok = disagreements == 0 and worst < 1e-9
    return 0 if ok else 1


def main(argv=None):
    parser = argparse.ArgumentParser(prog="tsnn", description="Single-spike temporal network trainer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--out", help="model output path")
    p.add_argument("--seed", type=int)
    p.add_argument("--data-dir", dest="data_dir")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--report", help="append JSONL records here")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data-dir", dest="data_dir", required=True)
    p.add_argument("--split", default="test", choices=("train", "test"))
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--mode", default="mnist", choices=("mnist", "cifar"))
    p.add_argument("--report")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("quantize", help="quantize a saved model, optionally with fine-tuning")
    p.add_argument("--model", required=True)
    p.add_argument("--bits", type=int, required=True, choices=(2, 4, 8, 32))
    group = p.add_mutually_exclusive_group()
    group.add_argument("--qat", action="store_true", help="fine-tune with quantized forward passes")
    group.add_argument("--post-hoc", dest="qat", action="store_false", help="quantize without retraining (default)")
    p.add_argument("--out", required=True)
    p.add_argument("--data-dir", dest="data_dir", help="required with --qat")
    p.add_argument("--epochs", type=int, default=4, help="QAT fine-tune epochs")
    p.add_argument("--lr", type=float, default=0.0001)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--mode", default="mnist", choices=("mnist", "cifar"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report")
    p.set_defaults(fn=cmd_quantize, qat=False)

    p = sub.add_parser("perturb", help="evaluate under weight noise at a given SNR")
    p.add_argument("--model", required=True)
    p.add_argument("--snr-db", dest="snr_db", type=float, required=True)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--data-dir", dest="data_dir", required=True)
    p.add_argument("--split", default="test", choices=("train", "test"))
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--mode", default="mnist", choices=("mnist", "cifar"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report")
    p.set_defaults(fn=cmd_perturb)

    p = sub.add_parser("oracle-check", help="compare the closed-form solver with direct integration")
    p.add_argument("--cases", type=int, default=1000)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--report")
    p.set_defaults(fn=cmd_oracle_check)

    p = sub.add_parser("version", help="print version")
    p.set_defaults(fn=lambda args: (print(__version__), 0)[1])

    args = parser.parse_args(argv)
    if args.command == "quantize" and args.qat and not args.data_dir:
        parser.error("--qat requires --data-dir")
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
