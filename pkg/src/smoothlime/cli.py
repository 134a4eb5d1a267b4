"""Command-line entry point: ``smoothlime train|explain|experiment``.

stdout carries JSON only; diagnostics go to stderr.
"""

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import explainers
from .config import (ConfigError, build_dataset, experiment_config, load_config,
                     train_config)
from .exceptions import SmoothLimeError
from .experiments import (KINDS, flatten_results, run_accuracy_sweep, run_convergence,
                          run_equivalence, run_robustness, run_sigma_sweep, timed,
                          write_report)
from .functions import load_function
from .model import Mlp, train
from .sampling import PerturbationConfig


class CliError(Exception):
    pass


def _parser():
    p = argparse.ArgumentParser(prog="smoothlime", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train the MLP black box")
    t.add_argument("--config", required=True)
    t.add_argument("--out")
    t.add_argument("--seed", type=int)

    e = sub.add_parser("explain", help="explain one point")
    e.add_argument("--model", required=True, help="model or function JSON document")
    where = e.add_mutually_exclusive_group(required=True)
    where.add_argument("--x", help="comma-separated point; use --x=-1,2 when it starts with a minus")
    where.add_argument("--row", type=int, help="row of the dataset given by --config")
    e.add_argument("--config")
    e.add_argument("--method", default="smoothgrad", choices=explainers.METHODS)
    e.add_argument("--sigma2", type=float, default=1.0)
    e.add_argument("--n", type=int, default=1000)
    e.add_argument("--lambda", dest="lam", type=float, default=0.0)
    e.add_argument("--seed", type=int, default=0)

    x = sub.add_parser("experiment", help="run an experiment suite")
    x.add_argument("kind", help="one of: " + ", ".join(KINDS))
    x.add_argument("--config", required=True)
    x.add_argument("--out")
    x.add_argument("--seed", type=int)
    x.add_argument("--n", type=int, help="replace the perturbation grid with a single count")
    x.add_argument("--model", help="use this model instead of training one")
    return p


def _out_dir(args, doc, default):
    return args.out or doc.get("out") or default


def cmd_train(args):
    doc = load_config(args.config, "train")
    cfg = train_config(doc)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    data = build_dataset(doc)
    net, metrics = train(data, cfg)
    out = _out_dir(args, doc, "runs/train")
    os.makedirs(out, exist_ok=True)
    model_path = os.path.join(out, "model.json")
    metrics_path = os.path.join(out, "metrics.json")
    net.save(model_path)
    with open(metrics_path, "w", encoding="utf-8") as fh:
        json.dump(dict(metrics, epochs=cfg.epochs, seed=cfg.seed), fh, indent=2)
        fh.write("\n")
    print(f"test accuracy {metrics['test_acc']:.4f}", file=sys.stderr)
    return {"model": model_path, "metrics": metrics_path}


def _point(args, dim):
    if args.x is not None:
        try:
            x = np.array([float(v) for v in args.x.split(",")])
        except ValueError:
            raise CliError(f"--x must be comma-separated numbers, got {args.x!r}") from None
    else:
        if args.config is None:
            raise CliError("--row needs --config to locate the dataset")
        data = build_dataset(load_config(args.config, "explain"))
        if not 0 <= args.row < len(data.labels):
            raise CliError(f"--row {args.row} out of range (0..{len(data.labels) - 1})")
        x = data.features[args.row]
    if dim is not None and x.shape[0] != dim:
        raise CliError(f"point has {x.shape[0]} features but the model expects {dim}")
    return x


def cmd_explain(args):
    try:
        f = load_function(args.model)
    except FileNotFoundError:
        raise CliError(f"model file not found: {args.model}") from None
    x = _point(args, getattr(f, "n_features", None))
    if args.method == "oracle":
        result = explainers.expected_explanation_mc(f, x, args.sigma2, args.n, args.seed)
    else:
        cfg = PerturbationConfig(x, args.sigma2, args.n, args.seed)
        if args.method == "smoothgrad":
            result = explainers.smoothgrad(f, cfg)
        elif args.method == "clime":
            result = explainers.clime(f, cfg)
        else:
            result = explainers.clime_ridge(f, cfg, args.lam)
    return result.to_dict()


def _model_for(args, doc, data):
    path = args.model or doc.get("model")
    if path:
        try:
            return Mlp.load(path)
        except FileNotFoundError:
            raise CliError(f"model file not found: {path}") from None
    net, metrics = train(data, train_config(doc))
    print(f"trained model, test accuracy {metrics['test_acc']:.4f}", file=sys.stderr)
    return net


def cmd_experiment(args):
    if args.kind not in KINDS:
        raise CliError(f"unknown experiment kind {args.kind!r}; valid kinds: {', '.join(KINDS)}")
    doc = load_config(args.config, "experiment")
    cfg = experiment_config(doc)
    if args.seed is not None:
        cfg = replace(cfg, base_seed=args.seed)
    if args.n is not None:
        cfg = replace(cfg, n_grid=(args.n,))
    data = build_dataset(doc)
    timings, extra, results = {}, {"kind": args.kind}, {}
    with timed(timings, "total"):
        model = None if args.kind == "accuracy-sweep" else _model_for(args, doc, data)
        for rep in range(cfg.repetitions):
            if args.kind == "equivalence":
                res = {"equivalence": run_equivalence(model, data, cfg, rep)}
            elif args.kind == "robustness":
                res = {f"robustness_{m}": run_robustness(m, model, data, cfg, rep)
                       for m in ("smoothgrad", "clime")}
            elif args.kind == "sigma-sweep":
                res = {f"sigma2_{s}": v for s, v in run_sigma_sweep(model, data, cfg, rep).items()}
            elif args.kind == "accuracy-sweep":
                sweep = run_accuracy_sweep(data, cfg, train_config(doc), rep)
                extra.setdefault("test_acc", {})[str(rep)] = {
                    str(k): v["test_acc"] for k, v in sweep.items()}
                res = {f"epochs_{k}": v for k, v in sweep.items()}
            else:
                report = run_convergence(model, data, cfg, rep)
                extra.setdefault("slopes", {})[str(rep)] = report.slope
                res = report.curves()
            results[f"rep{rep}" if cfg.repetitions > 1 else ""] = res
    results = flatten_results({k or "main": v for k, v in results.items()})
    if cfg.repetitions == 1:
        results = {k[len("main__"):]: v for k, v in results.items()}
    out = _out_dir(args, doc, os.path.join("runs", args.kind))
    manifest = write_report(results, out, config=cfg, seed=cfg.base_seed, timings=timings,
                            extra=extra)
    return {"manifest": manifest}


COMMANDS = {"train": cmd_train, "explain": cmd_explain, "experiment": cmd_experiment}


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        payload = COMMANDS[args.command](args)
    except explainers.RankDeficient as exc:
        print(f"error: {exc}. Increase --n (at least d + 1) or use --method clime_ridge "
              "with --lambda > 0.", file=sys.stderr)
        return 1
    except (CliError, ConfigError, SmoothLimeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(payload))
    return 0


if __name__ == "__main__":
    sys.exit(main())
