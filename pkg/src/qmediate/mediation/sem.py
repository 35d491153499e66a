"""Linear structural equation model for paired mediation.

Mediator model:  M_{s,1} - M_{s,0} has mean alpha.
Outcome model:   Y_{s,t} = tau0 + tau * t + beta . M_{s,t} + e_{s,t}, pooled over 2N rows.

For pure states I_AB = 2 S_A and L_A = 1 - gamma_A, so only two mediator
columns are linearly independent. The default ``reduced`` basis regresses on
(S_A, gamma_A); its coefficients are the composites beta_S + 2 beta_I and
beta_gamma - beta_L, reported in the S_A and gamma_A slots of ``beta`` with
zeros for L_A and I_AB. The ``full`` basis keeps all four columns and takes
the minimum-norm least-squares solution. Both give the same tau and the same
beta . alpha, because the null directions of the design carry no weight on t
and are orthogonal to alpha.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import linalg, stats

from ..errors import InputError, SingularDesignError
from .paired import MEDIATORS, PairedObservations

BASES = ("reduced", "full")
REDUCED = (0, 1)
FULL = (0, 1, 2, 3)
RANK_TOL = 1e-10
CONSTANT_TOL = 1e-9
GUARD = 1e-12


def estimate_alpha(pairs: PairedObservations) -> np.ndarray:
    """Mean mediator shift between arms."""
    if len(pairs) < 2:
        raise InputError(f"need at least 2 paired samples, got {len(pairs)}")
    return pairs.delta_m.mean(axis=0)


def _is_constant(col):
    return np.ptp(col) <= CONSTANT_TOL * max(1.0, float(np.max(np.abs(col))))


@dataclass
class Design:
    X: np.ndarray
    y: np.ndarray
    clusters: np.ndarray
    columns: tuple  # column names, starting with "const", "t"
    mediator_index: tuple  # MEDIATORS index of each mediator column
    dropped: tuple  # mediators left out because they do not vary


def build_design(pairs: PairedObservations, basis: str = "reduced", interactions: bool = False) -> Design:
    """Pooled design ``[1, t, M_active]`` (plus ``t * M_active`` when ``interactions``)."""
    if basis not in BASES:
        raise InputError(f"basis must be one of {BASES}, got {basis!r}")
    t, M, y, clusters = pairs.stacked()
    candidates = REDUCED if basis == "reduced" else FULL
    active = tuple(k for k in candidates if not _is_constant(M[:, k]))
    dropped = tuple(MEDIATORS[k] for k in candidates if k not in active)
    cols = [np.ones_like(t), t] + [M[:, k] for k in active]
    names = ["const", "t"] + [MEDIATORS[k] for k in active]
    if interactions:
        cols += [t * M[:, k] for k in active]
        names += [f"t*{MEDIATORS[k]}" for k in active]
    return Design(np.column_stack(cols), y, clusters, tuple(names), active, dropped)


def pivoted_lstsq(X, y, names=None):
    """Least squares through a column-pivoted QR; raises on rank deficiency."""
    Q, R, piv = linalg.qr(X, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    rank = int(np.sum(d > RANK_TOL * d[0])) if d.size and d[0] > 0 else 0
    if rank < X.shape[1]:
        names = names or [f"x{j}" for j in range(X.shape[1])]
        bad = tuple(names[j] for j in piv[rank:])
        raise SingularDesignError(f"design is rank deficient ({rank} < {X.shape[1]}); collinear columns {bad}", bad)
    coef = np.empty(X.shape[1])
    coef[piv] = linalg.solve_triangular(R, Q.T @ y)
    return coef


@dataclass
class OutcomeFit:
    basis: str
    tau0: float
    tau: float
    beta: np.ndarray  # length 4, MEDIATORS order
    coef: np.ndarray
    design: Design
    fitted: np.ndarray
    residuals: np.ndarray

    @property
    def columns(self):
        return self.design.columns


def fit_outcome_model(pairs: PairedObservations, basis: str = "reduced") -> OutcomeFit:
    """OLS of Y on ``[1, t, M]`` over the pooled 2N rows.

    Mediators that do not vary at all are dropped and given a zero
    coefficient. Any other rank deficiency in the reduced basis raises
    :class:`SingularDesignError`. In the full basis the minimum-norm
    solution is returned instead.
    """
    des = build_design(pairs, basis)
    if basis == "reduced":
        coef = pivoted_lstsq(des.X, des.y, list(des.columns))
    else:
        coef, *_ = linalg.lstsq(des.X, des.y, cond=RANK_TOL)
    beta = np.zeros(4)
    for j, k in enumerate(des.mediator_index):
        beta[k] = coef[2 + j]
    fitted = des.X @ coef
    return OutcomeFit(basis, float(coef[0]), float(coef[1]), beta, coef, des, fitted, des.y - fitted)


def cluster_robust_variance(design, residuals, cluster_ids) -> np.ndarray:
    """Sandwich ``(X'X)^-1 (sum_g X_g' u_g u_g' X_g) (X'X)^-1`` with no small-sample factor."""
    X = np.asarray(design, dtype=float)
    u = np.asarray(residuals, dtype=float)
    g = np.asarray(cluster_ids)
    xtx = X.T @ X
    if np.linalg.matrix_rank(xtx) < X.shape[1]:
        raise SingularDesignError("X'X is singular; cluster-robust variance undefined")
    bread = linalg.inv(xtx)
    _, idx = np.unique(g, return_inverse=True)
    scores = np.zeros((idx.max() + 1, X.shape[1]))
    np.add.at(scores, idx, X * u[:, None])
    cov = bread @ (scores.T @ scores) @ bread
    return (cov + cov.T) / 2


@dataclass
class SemEstimate:
    alpha: np.ndarray
    tau: float
    tau0: float
    beta: np.ndarray
    ate_empirical: float
    nie: float
    contributions: np.ndarray  # alpha_k * beta_k
    basis: str = "reduced"
    fit: OutcomeFit = None
    n_pairs: int = 0
    # cluster-robust inference on the fitted columns (None if not estimable)
    se: dict = field(default_factory=dict)
    pvalues: dict = field(default_factory=dict)

    @property
    def nde(self) -> float:
        return self.tau

    @property
    def eps_rel(self) -> float:
        return consistency_error(self)


def consistency_error(est: SemEstimate) -> float:
    """``|ATE - (tau + beta . alpha)| / (|ATE| + 1e-12)``."""
    model = est.tau + float(np.dot(est.beta, est.alpha))
    return abs(est.ate_empirical - model) / (abs(est.ate_empirical) + GUARD)


def decompose(pairs: PairedObservations, basis: str = "reduced") -> SemEstimate:
    """Fit both SEM equations and split the ATE into tau and beta . alpha."""
    alpha = estimate_alpha(pairs)
    fit = fit_outcome_model(pairs, basis)
    se, pv = {}, {}
    try:
        cov = cluster_robust_variance(fit.design.X, fit.residuals, fit.design.clusters)
    except SingularDesignError:
        cov = None
    if cov is not None:
        for j, name in enumerate(fit.columns):
            s = math.sqrt(max(cov[j, j], 0.0))
            se[name] = s
            pv[name] = float(2 * stats.norm.sf(abs(fit.coef[j]) / s)) if s > 0 else (0.0 if fit.coef[j] else 1.0)
    contrib = alpha * fit.beta
    return SemEstimate(
        alpha=alpha,
        tau=fit.tau,
        tau0=fit.tau0,
        beta=fit.beta,
        ate_empirical=float(pairs.delta_y.mean()),
        nie=float(contrib.sum()),
        contributions=contrib,
        basis=basis,
        fit=fit,
        n_pairs=len(pairs),
        se=se,
        pvalues=pv,
    )
