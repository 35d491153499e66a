"""``qmediate`` command-line entry point.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numerical gate failure.
"""

import argparse
import json
import logging
import os
from pathlib import Path
import platform
import sys
import time

import numpy as np
import scipy

from .. import __version__
from ..errors import (
    ConfigError, ConvergenceError, GateFailure, IngestionError, PairingError, PreprocessingError,
    QMediateError, SingularDesignError, SplitError,
)
from . import runner
from .config import load_config

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_GATE = 0, 1, 2, 3
log = logging.getLogger("qmediate")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _add_common(p, *, config_required=False):
    p.add_argument("--config", required=config_required, help="experiment config (YAML)")
    p.add_argument("--seed", type=int, default=None, help="run a single seed instead of the configured list")
    p.add_argument("--out", default=None, help="output directory (default: config output_dir, $QMEDIATE_OUT_DIR)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="qmediate", description="Paired causal mediation analysis of variational quantum classifiers.")
    ap.add_argument("--version", action="version", version=f"qmediate {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("train", help="train both arms of every configuration and write paired CSVs")
    _add_common(p, config_required=True)
    p.add_argument("--jobs", type=int, default=1, help="worker processes for training (outputs unaffected)")
    p.add_argument("--binarize-median", action="store_true", help="binarize a continuous label at its median")

    p = sub.add_parser("mediate", help="mediation report for a paired CSV, a configuration or a run directory")
    p.add_argument("target", help="paired CSV, configuration directory or run directory")
    _add_common(p)
    p.add_argument("--keep-residuals", action="store_true", help="store outcome-model residuals in report.json")

    p = sub.add_parser("classify", help="regime labels and distribution from a summary CSV")
    p.add_argument("summary", help="summary CSV with Dir, Ind, Tot and Thr columns")
    p.add_argument("--threshold-mode", choices=("per-config", "global-max"), default="per-config")
    p.add_argument("--out", default=None)

    p = sub.add_parser("pipeline", help="train, evaluate, mediate and classify in one run")
    _add_common(p, config_required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--threshold-mode", choices=("per-config", "global-max"), default=None)
    p.add_argument("--keep-residuals", action="store_true")
    p.add_argument("--binarize-median", action="store_true")

    p = sub.add_parser("validate", help="residual diagnostics of a mediated run")
    p.add_argument("run_dir")
    return ap


def _load(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.seeds = [args.seed]
    if getattr(args, "binarize_median", False):
        cfg.dataset.binarize_median = True
    if getattr(args, "threshold_mode", None):
        cfg.threshold_mode = args.threshold_mode
    return cfg


def _out_dir(args, cfg) -> Path:
    return Path(args.out) if getattr(args, "out", None) else cfg.resolved_output_dir()


def cmd_train(args) -> int:
    cfg = _load(args)
    if args.jobs < 1:
        raise _UsageError("--jobs must be >= 1")
    out = _out_dir(args, cfg)
    dirs = runner.train_and_evaluate(cfg, out, jobs=args.jobs)
    print(f"trained {len(dirs)} configurations into {out}")
    return EXIT_OK


def cmd_mediate(args) -> int:
    target = Path(args.target)
    if not target.exists():
        raise IngestionError(f"{target} does not exist")
    cfg = load_config(args.config) if args.config else runner.load_run_config(target if target.is_dir() else target.parent)
    out = Path(args.out) if args.out else None
    reports = runner.mediate_run(target, cfg, keep_residuals=args.keep_residuals, seed=args.seed, out_dir=out)
    for dest, rep in reports:
        print(f"{dest.name}: tau={rep.estimate.tau:+.4f} nie={rep.estimate.nie:+.4f} "
              f"eps_rel={rep.eps_rel:.2e} regime={rep.regime.name}")
    return EXIT_OK


def cmd_classify(args) -> int:
    summary = runner.classify(Path(args.summary), args.threshold_mode, Path(args.out) if args.out else None)
    for section in ("all", "validated"):
        hist = summary[section]["regimes"]
        pct = ", ".join(f"{k} {v:.1f}%" for k, v in hist["percent"].items()) or "none"
        print(f"{section} ({hist['n']}): {pct}")
    return EXIT_OK


def _versions():
    return {"qmediate": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def cmd_pipeline(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    timings = {}
    manifest = {
        "format": "qmediate.manifest/1",
        "config_hash": cfg.digest(),
        "versions": _versions(),
        "stages": [],
        "status": "running",
    }

    def stage(name, seconds, outputs):
        manifest["stages"].append({"name": name, "seconds": seconds, "outputs": sorted(outputs)})

    def rel(paths):
        return [str(Path(p).relative_to(out)) for p in paths]

    try:
        dirs = runner.train_and_evaluate(cfg, out, jobs=args.jobs, timings=timings)
        stage("train", timings["train"], rel([d / f for d in dirs for f in ("model_t0.json", "model_t1.json")]))
        stage("evaluate", timings["evaluate"], rel([d / f for d in dirs for f in ("eval_t0.csv", "eval_t1.csv", "paired.csv")]))
        t0 = time.perf_counter()
        runner.mediate_run(out, cfg, keep_residuals=args.keep_residuals)
        stage("mediate", time.perf_counter() - t0, rel([d / "report.json" for d in dirs] + [out / "summary.csv"]))
        t0 = time.perf_counter()
        summary = runner.classify(out / "summary.csv", cfg.threshold_mode, out)
        stage("classify", time.perf_counter() - t0, rel([out / "regimes.csv", out / "regimes.json"]))
        manifest["status"] = "ok"
    except GateFailure as exc:
        manifest["status"] = "gate_failure"
        manifest["failed_stage"] = exc.stage
        manifest["error"] = str(exc)
        raise
    except QMediateError as exc:
        manifest["status"] = "error"
        manifest["error"] = str(exc)
        raise
    finally:
        (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    hist = summary["all"]["regimes"]
    print(f"{hist['n']} configurations: " + ", ".join(f"{k} {v}" for k, v in hist["counts"].items()))
    return EXIT_OK


def cmd_validate(args) -> int:
    diag = runner.validate_run(Path(args.run_dir))
    for name, d in diag["configurations"].items():
        arms = d["arms"]
        print(f"{name}: mean residual t0={arms['t0']['mean']:+.2e} t1={arms['t1']['mean']:+.2e} "
              f"funnel={'yes' if d['funnel']['flag'] else 'no'}")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "mediate": cmd_mediate, "classify": cmd_classify, "pipeline": cmd_pipeline,
            "validate": cmd_validate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (_UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GateFailure as exc:
        print(f"gate failure: {exc}", file=sys.stderr)
        return EXIT_GATE
    except ConvergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_GATE
    except (IngestionError, PreprocessingError, SplitError, PairingError, SingularDesignError, QMediateError,
            ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
