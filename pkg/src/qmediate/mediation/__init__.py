"""Paired causal mediation: SEM estimation, inference and regime labels."""

from .inference import BootstrapResult, InteractionTest, bootstrap_indirect, test_interaction
from .paired import MEDIATORS, PairedObservations
from .regimes import Regime, RegimeLabel, classify_regime, intra_threshold, mamc, rqc
from .report import ConfigRow, MediationReport, batch_report, build_report, read_summary_csv
from .sem import SemEstimate, cluster_robust_variance, consistency_error, decompose, estimate_alpha, fit_outcome_model

__all__ = [
    "BootstrapResult", "ConfigRow", "InteractionTest", "MEDIATORS", "MediationReport", "PairedObservations",
    "Regime", "RegimeLabel", "SemEstimate", "batch_report", "bootstrap_indirect", "build_report",
    "classify_regime", "cluster_robust_variance", "consistency_error", "decompose", "estimate_alpha",
    "fit_outcome_model", "intra_threshold", "mamc", "read_summary_csv", "rqc", "test_interaction",
]
