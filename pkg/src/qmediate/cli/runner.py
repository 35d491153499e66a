"""Pipeline stages behind the command-line interface.

Run directory layout::

    <out>/config.json                 resolved config
    <out>/splits/seed_<s>.json        preprocessing fitted on that seed's training split
    <out>/configs/<arch>_<n>_<d1>_s<seed>/
        meta.json model_t0.json model_t1.json eval_t0.csv eval_t1.csv paired.csv
        report.json summary.csv       (after mediate)
    <out>/summary.csv                 one row per configuration
    <out>/regimes.csv, regimes.json   (after classify)
    <out>/validate/                   (after validate)
    <out>/manifest.json               (pipeline only)
"""

from concurrent.futures import ProcessPoolExecutor
import csv
import json
import logging
from pathlib import Path
import time

import numpy as np

from ..errors import GateFailure, IngestionError
from ..learner.data import fit_preprocess, load_csv, stratified_split
from ..learner.evaluate import evaluate_arm
from ..learner.model import TrainConfig, TrainedModel, train
from ..mediation.diagnostics import arm_summaries, funnel_test, normal_quantile_pairs
from ..mediation.paired import PairedObservations
from ..mediation.report import SUMMARY_COLUMNS, batch_report, build_report, read_summary_csv
from ..qinfo import Bipartition
from ..simulator import CircuitSpec
from .config import ExperimentConfig, GateConfig, parse_config

log = logging.getLogger(__name__)


def _dump(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1) + "\n")


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def config_dirname(topology: str, n: int, d1: int, seed: int) -> str:
    return f"{topology}_{n}_{d1}_s{seed}"


def _train_config(cfg: ExperimentConfig) -> TrainConfig:
    return TrainConfig(**cfg.training.model_dump())


def _train_task(args):
    topology, n, layers, X, y, seed, arm, tcfg = args
    model = train(CircuitSpec(topology, n, layers), X, y, seed, tcfg, arm=arm)
    return model.to_dict()


def _split(cfg: ExperimentConfig, dataset, seed: int):
    train_ds, test_ds = stratified_split(dataset, cfg.test_fraction, seed)
    pipe = fit_preprocess(train_ds.features, cfg.n_qubits)
    return train_ds, test_ds, pipe


def _pipe_dict(pipe, train_ds, test_ds, names):
    return {
        "feature_names": [names[i] for i in pipe.kept_columns],
        "means": pipe.means.tolist(),
        "stddevs": pipe.stddevs.tolist(),
        "pca_components": pipe.pca_components.tolist(),
        "explained_variance": pipe.explained_variance.tolist(),
        "train_rows": train_ds.row_ids.tolist(),
        "test_rows": test_ds.row_ids.tolist(),
    }


def train_and_evaluate(cfg: ExperimentConfig, out: Path, jobs: int = 1, timings: dict | None = None):
    """Train every arm, evaluate on the test split and write paired CSVs.

    Raises :class:`GateFailure` (stage ``evaluate``) when a simulated state
    fails the global purity check.
    """
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "config.json", cfg.model_dump(mode="json"))
    t_start = time.perf_counter()
    ds = load_csv(cfg.dataset.path, cfg.dataset.label_column, delimiter=cfg.dataset.delimiter,
                  binarize_median=cfg.dataset.binarize_median, positive_label=cfg.dataset.positive_label,
                  drop_columns=cfg.dataset.drop_columns)
    tcfg = _train_config(cfg)
    n = cfg.n_qubits
    topologies = [t.value for t in cfg.topology]
    splits = {}
    tasks = []
    (out / "splits").mkdir(exist_ok=True)
    for seed in cfg.seeds:
        tr, te, pipe = _split(cfg, ds, seed)
        splits[seed] = (tr, te, pipe)
        _dump(out / "splits" / f"seed_{seed}.json", _pipe_dict(pipe, tr, te, ds.feature_names))
        Xtr = pipe.transform(tr.features)
        for topo in topologies:
            tasks.append((topo, n, cfg.layers_t0, Xtr, tr.labels, seed, 0, tcfg))
            for d1 in cfg.layers_t1:
                tasks.append((topo, n, d1, Xtr, tr.labels, seed, 1, tcfg))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_train_task, tasks))
    else:
        results = [_train_task(t) for t in tasks]
    models = {(t[0], t[2], t[5]): TrainedModel.from_dict(r) for t, r in zip(tasks, results)}
    if timings is not None:
        timings["train"] = time.perf_counter() - t_start

    t_eval = time.perf_counter()
    part = Bipartition(n, tuple(cfg.bipartition)) if cfg.bipartition else Bipartition.default(n)
    evals = {}
    for (topo, layers, seed), model in models.items():
        _, te, pipe = splits[seed]
        evals[(topo, layers, seed)] = evaluate_arm(model, pipe.transform(te.features), te.labels, part,
                                                   sample_ids=te.row_ids, t=model.arm)
    dirs = []
    worst = 0.0
    for seed in cfg.seeds:
        for topo in topologies:
            m0, e0 = models[(topo, cfg.layers_t0, seed)], evals[(topo, cfg.layers_t0, seed)]
            for d1 in cfg.layers_t1:
                m1, e1 = models[(topo, d1, seed)], evals[(topo, d1, seed)]
                d = out / "configs" / config_dirname(topo, n, d1, seed)
                d.mkdir(parents=True, exist_ok=True)
                m0.save(d / "model_t0.json")
                m1.save(d / "model_t1.json")
                e0.to_csv(d / "eval_t0.csv")
                e1.to_csv(d / "eval_t1.csv")
                PairedObservations.from_arms(e0, e1).to_csv(d / "paired.csv")
                s_ab = max(e0.max_s_ab, e1.max_s_ab)
                worst = max(worst, s_ab)
                _dump(d / "meta.json", {
                    "dataset": cfg.dataset.display_name, "arch": topo, "n_qubits": n, "T0": cfg.layers_t0,
                    "T1": d1, "seed": seed, "bipartition_A": list(part.subsystem_a), "max_S_AB": s_ab,
                    "final_train_loss": {"t0": m0.train_history[-1][0], "t1": m1.train_history[-1][0]},
                })
                dirs.append(d)
    if timings is not None:
        timings["evaluate"] = time.perf_counter() - t_eval
    if worst >= cfg.gates.s_ab:
        raise GateFailure("evaluate", f"global state not pure: max S_AB = {worst:.3g} >= {cfg.gates.s_ab:g}")
    return dirs


def load_run_config(run_dir: Path, override: ExperimentConfig | None = None) -> ExperimentConfig | None:
    if override is not None:
        return override
    p = run_dir / "config.json"
    if p.exists():
        return parse_config(json.loads(p.read_text()))
    return None


def config_dirs(run_dir: Path):
    """Configuration directories under a run, or the directory itself if it holds a paired CSV."""
    run_dir = Path(run_dir)
    if (run_dir / "paired.csv").exists():
        return [run_dir]
    dirs = sorted(p for p in (run_dir / "configs").glob("*") if (p / "paired.csv").exists())
    if not dirs:
        raise IngestionError(f"{run_dir} holds no paired.csv; run train first")
    return dirs


def _gate_problems(report, gates) -> list:
    probs = []
    if not report.eps_rel < gates.eps_rel:
        probs.append(f"eps_rel = {report.eps_rel:.3g} >= {gates.eps_rel:g}")
    i_dev = report.diagnostics["max_abs_I_minus_2S"]
    l_dev = report.diagnostics["max_abs_L_minus_1_minus_gamma"]
    if not i_dev < gates.i_minus_2s:
        probs.append(f"|I_AB - 2 S_A| = {i_dev:.3g} >= {gates.i_minus_2s:g}")
    if not l_dev < gates.l_minus_1_minus_gamma:
        probs.append(f"|L_A - (1 - gamma_A)| = {l_dev:.3g} >= {gates.l_minus_1_minus_gamma:g}")
    return probs


def write_summary(path, rows):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in SUMMARY_COLUMNS])


def mediate_one(paired_csv: Path, out_dir: Path, *, B: int, c: float, basis: str, seed: int,
                meta: dict | None = None, keep_residuals: bool = False):
    pairs = PairedObservations.from_csv(paired_csv)
    meta = dict(meta or {})
    report = build_report(pairs, meta, B=B, seed=seed, c=c, basis=basis)
    if "max_S_AB" in meta:
        report.diagnostics["max_S_AB"] = meta["max_S_AB"]
    out_dir.mkdir(parents=True, exist_ok=True)
    report.to_json(out_dir / "report.json", keep_residuals)
    write_summary(out_dir / "summary.csv", [report.summary_row()])
    return report


def mediate_run(target: Path, cfg: ExperimentConfig | None, *, keep_residuals: bool = False,
                seed: int | None = None, out_dir: Path | None = None):
    """Mediation reports for a paired CSV, a configuration directory or a whole run.

    Reports are written before gates are checked; a :class:`GateFailure`
    (stage ``mediate``) is raised afterwards if any configuration fails.
    """
    target = Path(target)
    B = cfg.bootstrap_B if cfg else 2000
    c = cfg.threshold_c if cfg else 0.5
    basis = cfg.basis if cfg else "reduced"
    gates = cfg.gates if cfg else GateConfig()
    if target.is_file():
        jobs = [(target, out_dir or target.parent, {})]
    else:
        jobs = []
        for d in config_dirs(target):
            meta = json.loads((d / "meta.json").read_text()) if (d / "meta.json").exists() else {}
            jobs.append((d / "paired.csv", d, meta))
    reports, failures = [], []
    for csv_path, dest, meta in jobs:
        s = seed if seed is not None else int(meta.get("seed", 0))
        rep = mediate_one(csv_path, dest, B=B, c=c, basis=basis, seed=s, meta=meta, keep_residuals=keep_residuals)
        reports.append((dest, rep))
        probs = _gate_problems(rep, gates)
        if probs:
            failures.append(f"{dest.name}: " + ", ".join(probs))
    if target.is_dir() and not (target / "paired.csv").exists():
        write_summary(target / "summary.csv", [r.summary_row() for _, r in reports])
    if failures:
        raise GateFailure("mediate", "; ".join(failures))
    return reports


def classify(summary_csv: Path, threshold_mode: str, out_dir: Path | None = None):
    rows = read_summary_csv(summary_csv)
    if not rows:
        raise IngestionError(f"{summary_csv} has no rows")
    summary = batch_report(rows, threshold_mode)
    out_dir = Path(out_dir or Path(summary_csv).parent)
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "regimes.csv").open("w", newline="") as fh:
        extra_cols = [k for k in rows[0].extra if k != "regime"]
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(extra_cols + ["threshold_used", "regime", "excluded", "validated"])
        for r, lab in zip(rows, summary["rows"]):
            w.writerow([r.extra.get(k, "") for k in extra_cols]
                       + [_fmt(lab["threshold"]), lab["regime"], lab["excluded"], lab["validated"]])
    _dump(out_dir / "regimes.json", {k: v for k, v in summary.items() if k != "rows"})
    return summary


def validate_run(run_dir: Path):
    """Residual diagnostics for every mediated configuration under ``run_dir``."""
    run_dir = Path(run_dir)
    dirs = config_dirs(run_dir)
    reports = []
    for d in dirs:
        p = d / "report.json"
        if not p.exists():
            raise IngestionError(f"{d.name} has no report.json; run mediate first")
        rep = json.loads(p.read_text())
        if "residuals" not in rep:
            raise IngestionError(f"{d.name}: report has no stored residuals; re-run mediate with --keep-residuals")
        reports.append((d.name, rep))
    out = run_dir / "validate"
    out.mkdir(exist_ok=True)
    diag = {"configurations": {}, "per_dataset": {}}
    by_ds = {}
    with (out / "residuals.csv").open("w", newline="") as fr, (out / "qq.csv").open("w", newline="") as fq:
        wr, wq = csv.writer(fr, lineterminator="\n"), csv.writer(fq, lineterminator="\n")
        wr.writerow(["config", "sample_id", "t", "fitted", "residual"])
        wq.writerow(["config", "theoretical", "standardized_residual"])
        for name, rep in reports:
            res = rep["residuals"]
            t, fitted, resid = np.array(res["t"]), np.array(res["fitted"]), np.array(res["residual"])
            for row in zip(res["sample_id"], res["t"], res["fitted"], res["residual"]):
                wr.writerow([name, row[0], row[1], _fmt(row[2]), _fmt(row[3])])
            theo, z = normal_quantile_pairs(resid)
            for a, b in zip(theo, z):
                wq.writerow([name, _fmt(a), _fmt(b)])
            diag["configurations"][name] = {
                "arms": arm_summaries(t, resid),
                "funnel": funnel_test(fitted, resid),
                "interaction": rep["assumptions"]["A2"],
            }
            by_ds.setdefault(rep.get("meta", {}).get("dataset", ""), []).append(resid)
    for ds, parts in sorted(by_ds.items()):
        r = np.concatenate(parts)
        diag["per_dataset"][ds] = {"n": int(r.size), "mean": float(r.mean()),
                                   "sd": float(r.std(ddof=1)) if r.size > 1 else None}
    _dump(out / "diagnostics.json", diag)
    return diag
