"""Per-configuration mediation reports and batch aggregation."""

from dataclasses import dataclass, field
import csv
import json
import math
from pathlib import Path

import numpy as np

from ..errors import IngestionError
from .inference import BootstrapResult, InteractionTest, bootstrap_indirect, test_interaction
from .paired import MEDIATORS, PairedObservations
from .regimes import Regime, RegimeLabel, classify_regime, intra_threshold, mamc, rqc
from .sem import SemEstimate, consistency_error, decompose

FORMAT = "qmediate.report/1"
THRESHOLD_MODES = ("per-config", "global-max")
SUMMARY_COLUMNS = (
    "dataset", "arch", "n_qubits", "T0", "T1", "seed", "Thr",
    "MAMC_S_A", "MAMC_gamma_A", "MAMC_L_A", "MAMC_I_AB",
    "Dir", "Ind", "Tot", "A1", "A2", "regime",
)


def _clean(obj):
    """JSON-safe copy: arrays to lists, non-finite floats to None."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def pure_state_residuals(pairs: PairedObservations):
    """Largest |I - 2 S| and |L - (1 - gamma)| over both arms."""
    M = np.vstack([pairs.M0, pairs.M1])
    return float(np.max(np.abs(M[:, 3] - 2 * M[:, 0]))), float(np.max(np.abs(M[:, 2] - (1 - M[:, 1]))))


@dataclass
class MediationReport:
    meta: dict
    estimate: SemEstimate
    bootstrap: BootstrapResult
    interaction: InteractionTest
    threshold: float
    c: float
    eps_rel: float
    mamc: np.ndarray
    rqc: np.ndarray  # None when every MAMC is zero
    regime: RegimeLabel
    diagnostics: dict = field(default_factory=dict)
    a1_proxy: float = None
    sample_ids: np.ndarray = None

    def to_dict(self, keep_residuals: bool = False) -> dict:
        est = self.estimate
        out = {
            "format": FORMAT,
            "meta": self.meta,
            "n_pairs": est.n_pairs,
            "basis": est.basis,
            "estimates": {
                "tau0": est.tau0,
                "tau": est.tau,
                "nde": est.nde,
                "nie": est.nie,
                "ate_empirical": est.ate_empirical,
                "alpha": dict(zip(MEDIATORS, est.alpha)),
                "beta": dict(zip(MEDIATORS, est.beta)),
                "contributions": dict(zip(MEDIATORS, est.contributions)),
                "dropped_mediators": list(est.fit.design.dropped),
            },
            "inference": {
                "cluster_robust_se": est.se,
                "pvalues_normal": est.pvalues,
                "bootstrap": {
                    "B": self.bootstrap.B,
                    "skipped": self.bootstrap.n_skipped,
                    "level": self.bootstrap.level,
                    "ci": {m: list(self.bootstrap.ci[k]) for k, m in enumerate(MEDIATORS)},
                    "total_ci": list(self.bootstrap.total_ci),
                },
            },
            "eps_rel": self.eps_rel,
            "threshold": {"value": self.threshold, "c": self.c},
            "mamc": dict(zip(MEDIATORS, self.mamc)),
            "rqc": None if self.rqc is None else dict(zip(MEDIATORS, self.rqc)),
            "assumptions": {
                "A1": {"code": "pass", "basis": "declared by design", "proxy": self.a1_proxy},
                "A2": {
                    "code": self.interaction.code,
                    "statistic": self.interaction.statistic,
                    "pvalue": self.interaction.pvalue,
                    "df": list(self.interaction.df),
                    "marginal_pvalues": self.interaction.marginal_pvalues,
                    "reason": self.interaction.reason,
                },
            },
            "regime": {
                "label": self.regime.name,
                "signs": list(self.regime.signs),
                "excluded_from_primary_analysis": self.regime.excluded,
            },
            "diagnostics": self.diagnostics,
        }
        if keep_residuals:
            fit = est.fit
            t = fit.design.X[:, 1]
            ids = self.sample_ids if self.sample_ids is not None else np.arange(len(t) // 2)
            out["residuals"] = {
                "sample_id": np.concatenate([ids, ids]).tolist(),
                "t": t.astype(int).tolist(),
                "fitted": fit.fitted.tolist(),
                "residual": fit.residuals.tolist(),
            }
        return _clean(out)

    def to_json(self, path, keep_residuals: bool = False):
        Path(path).write_text(json.dumps(self.to_dict(keep_residuals), indent=1, sort_keys=False) + "\n")

    def summary_row(self) -> dict:
        """Flat summary row with effects in percentage points."""
        m = self.meta
        row = {
            "dataset": m.get("dataset", ""),
            "arch": m.get("arch", ""),
            "n_qubits": m.get("n_qubits", ""),
            "T0": m.get("T0", ""),
            "T1": m.get("T1", ""),
            "seed": m.get("seed", ""),
            "Thr": 100 * self.threshold,
        }
        for k, name in enumerate(MEDIATORS):
            row[f"MAMC_{name}"] = 100 * float(self.mamc[k])
        row.update({
            "Dir": 100 * self.estimate.tau,
            "Ind": 100 * self.estimate.nie,
            "Tot": 100 * self.estimate.ate_empirical,
            "A1": "pass",
            "A2": self.interaction.code,
            "regime": self.regime.name,
        })
        return row


def build_report(pairs: PairedObservations, meta: dict | None = None, *, B: int = 2000, seed: int = 0,
                 c: float = 0.5, basis: str = "reduced") -> MediationReport:
    """Estimate, infer, diagnose and classify one configuration."""
    est = decompose(pairs, basis)
    boot = bootstrap_indirect(pairs, B=B, seed=seed, basis=basis)
    inter = test_interaction(pairs)
    thr = intra_threshold(pairs, c)
    m = mamc(est)
    i_dev, l_dev = pure_state_residuals(pairs)
    return MediationReport(
        meta=dict(meta or {}),
        estimate=est,
        bootstrap=boot,
        interaction=inter,
        threshold=thr,
        c=c,
        eps_rel=consistency_error(est),
        mamc=m,
        rqc=rqc(m),
        regime=classify_regime(est.tau, est.nie, est.ate_empirical, thr),
        diagnostics={"max_abs_I_minus_2S": i_dev, "max_abs_L_minus_1_minus_gamma": l_dev},
        sample_ids=pairs.sample_id.copy(),
    )


# batch view -------------------------------------------------------------------------


@dataclass
class ConfigRow:
    """Effects of one configuration, in whatever unit the caller uses (consistently)."""

    dataset: str
    label: str
    tau: float
    nie: float
    ate: float
    threshold: float
    a1: str = "pass"
    a2: str = "pass"
    extra: dict = field(default_factory=dict)

    @property
    def validated(self) -> bool:
        return self.a1 == "pass" and self.a2 == "pass"


_CODE_ALIASES = {"pass": "pass", "✓": "pass", "partial": "partial", "~": "partial", "fail": "fail", "✗": "fail",
                 "x": "fail", "untestable": "untestable"}


def read_summary_csv(path) -> list:
    """Rows of a summary CSV (Dir/Ind/Tot/Thr required; A1/A2 optional, default pass)."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            cols = reader.fieldnames or []
            missing = [c for c in ("Dir", "Ind", "Tot", "Thr") if c not in cols]
            if missing:
                raise IngestionError(f"{path} is missing columns {missing}")
            rows = []
            for r, rec in enumerate(reader, start=1):
                try:
                    vals = [float(rec[c]) for c in ("Dir", "Ind", "Tot", "Thr")]
                except (TypeError, ValueError) as exc:
                    raise IngestionError(f"{path} row {r}: {exc}") from None
                codes = []
                for c in ("A1", "A2"):
                    raw = (rec.get(c) or "pass").strip()
                    if raw.lower() not in _CODE_ALIASES and raw not in _CODE_ALIASES:
                        raise IngestionError(f"{path} row {r}: unknown {c} code {raw!r}")
                    codes.append(_CODE_ALIASES.get(raw.lower(), _CODE_ALIASES.get(raw)))
                label = "_".join(str(rec.get(k, "")) for k in ("arch", "n_qubits", "T1", "seed") if rec.get(k))
                rows.append(ConfigRow(rec.get("dataset", ""), label or f"row{r}", *vals, codes[0], codes[1], dict(rec)))
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc
    return rows


def _histogram(labels):
    counts = {}
    for lab in labels:
        counts[lab] = counts.get(lab, 0) + 1
    n = len(labels)
    return {
        "n": n,
        "counts": dict(sorted(counts.items())),
        "percent": {k: 100.0 * v / n for k, v in sorted(counts.items())} if n else {},
    }


def _describe(x):
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return {"n": 0, "mean": None, "sd": None}
    return {"n": int(x.size), "mean": float(x.mean()), "sd": float(x.std(ddof=1)) if x.size > 1 else None}


def _effects(rows):
    by_ds = {}
    for r in rows:
        by_ds.setdefault(r.dataset, []).append(r)
    per = {ds: {"direct": _describe([r.tau for r in rs]), "indirect": _describe([r.nie for r in rs])}
           for ds, rs in sorted(by_ds.items())}
    mean_dir = float(np.mean([abs(r.tau) for r in rows])) if rows else None
    mean_ind = float(np.mean([abs(r.nie) for r in rows])) if rows else None
    ratio = mean_dir / mean_ind if rows and mean_ind > 0 else None
    return {"per_dataset": per, "mean_abs_direct": mean_dir, "mean_abs_indirect": mean_ind,
            "direct_indirect_ratio": ratio}


def batch_report(rows, threshold_mode: str = "per-config") -> dict:
    """Relabel rows under the chosen threshold mode and aggregate.

    ``global-max`` uses the largest threshold among all supplied rows for every
    row. The ``validated`` section restricts to rows with A1 and A2 both
    passing.
    """
    if threshold_mode not in THRESHOLD_MODES:
        raise ValueError(f"threshold mode must be one of {THRESHOLD_MODES}, got {threshold_mode!r}")
    rows = list(rows)
    g = max((r.threshold for r in rows), default=0.0)
    labelled = []
    for r in rows:
        eps = g if threshold_mode == "global-max" else r.threshold
        labelled.append((r, classify_regime(r.tau, r.nie, r.ate, eps), eps))
    valid = [(r, lab, eps) for r, lab, eps in labelled if r.validated]
    out = {
        "threshold_mode": threshold_mode,
        "global_threshold": g if threshold_mode == "global-max" else None,
        "all": {"regimes": _histogram([lab.name for _, lab, _ in labelled]), **_effects(rows)},
        "validated": {"regimes": _histogram([lab.name for _, lab, _ in valid]), **_effects([r for r, _, _ in valid])},
        "rows": [
            {"dataset": r.dataset, "label": r.label, "threshold": eps, "regime": lab.name, "signs": list(lab.signs),
             "excluded": lab.excluded, "validated": r.validated}
            for r, lab, eps in labelled
        ],
    }
    if not valid:
        out["validated"]["note"] = "no validated configurations"
    return _clean(out)


def report_row(report: MediationReport) -> ConfigRow:
    s = report.summary_row()
    label = "_".join(str(s[k]) for k in ("arch", "n_qubits", "T1", "seed") if s[k] != "")
    return ConfigRow(s["dataset"], label, s["Dir"], s["Ind"], s["Tot"], s["Thr"], s["A1"], s["A2"])


def a1_balance_proxy(baselines) -> float:
    """Largest standardized mean difference of baseline mediators between runs of one configuration.

    ``baselines`` is a list of ``(samples, 4)`` arrays of t=0 mediators, one
    per seed. Informational only.
    """
    arrays = [np.asarray(b, dtype=float) for b in baselines]
    if len(arrays) < 2:
        return None
    worst = 0.0
    for i in range(len(arrays)):
        for j in range(i + 1, len(arrays)):
            a, b = arrays[i], arrays[j]
            pooled = np.sqrt((a.var(axis=0, ddof=1) + b.var(axis=0, ddof=1)) / 2)
            diff = np.abs(a.mean(axis=0) - b.mean(axis=0))
            smd = np.where(pooled > 1e-12, diff / np.where(pooled > 1e-12, pooled, 1.0), 0.0)
            worst = max(worst, float(smd.max()))
    return worst


__all__ = [
    "ConfigRow", "MediationReport", "Regime", "a1_balance_proxy", "batch_report", "build_report",
    "pure_state_residuals", "read_summary_csv", "report_row",
]
