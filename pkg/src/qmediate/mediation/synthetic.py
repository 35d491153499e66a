"""Paired data drawn from a known linear SEM, for estimator checks."""

from dataclasses import dataclass

import numpy as np

from .. import rng as rngs
from .paired import PairedObservations


@dataclass(frozen=True)
class SemTruth:
    tau0: float
    tau: float
    alpha: np.ndarray  # (4,) shifts of S_A, gamma_A, L_A, I_AB
    beta: np.ndarray  # (4,) outcome coefficients as planted
    composite: np.ndarray  # reduced-basis equivalent: (b_S + 2 b_I, b_gamma - b_L, 0, 0)
    gamma: np.ndarray  # (4,) planted t x mediator interactions

    @property
    def contributions(self) -> np.ndarray:
        return self.alpha * self.composite

    @property
    def nie(self) -> float:
        return float(self.contributions.sum())

    @property
    def ate(self) -> float:
        return self.tau + self.nie


def generate_pairs(
    n: int = 150,
    *,
    tau0: float = 0.5,
    tau: float = 0.02,
    alpha_s: float = 0.2,
    alpha_gamma: float = -0.1,
    beta=(0.05, 0.1, 0.0, 0.0),
    gamma=(0.0, 0.0, 0.0, 0.0),
    noise_sd: float = 0.01,
    mediator_sd: float = 0.1,
    shift_sd: float = 0.05,
    noise: str = "row",
    seed: int = 0,
):
    """Draw ``n`` pairs whose mediators obey I_AB = 2 S_A and L_A = 1 - gamma_A.

    ``noise="row"`` gives every pooled row its own error; ``"pair"`` shares
    one error across both arms of a sample, so it cancels in the contrast.
    Returns ``(pairs, truth)``.
    """
    gen = rngs.stream(seed, "synthetic")
    s0 = 0.8 + mediator_sd * gen.standard_normal(n)
    g0 = 0.6 + mediator_sd * gen.standard_normal(n)
    s1 = s0 + alpha_s + shift_sd * gen.standard_normal(n)
    g1 = g0 + alpha_gamma + shift_sd * gen.standard_normal(n)

    def mediators(s, g):
        return np.column_stack([s, g, 1.0 - g, 2.0 * s])

    M0, M1 = mediators(s0, g0), mediators(s1, g1)
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if noise == "row":
        e0 = noise_sd * gen.standard_normal(n)
        e1 = noise_sd * gen.standard_normal(n)
    elif noise == "pair":
        e0 = e1 = noise_sd * gen.standard_normal(n)
    else:
        raise ValueError(f"noise must be 'row' or 'pair', got {noise!r}")
    Y0 = tau0 + M0 @ beta + e0
    Y1 = tau0 + tau + M1 @ (beta + gamma) + e1
    composite = np.array([beta[0] + 2 * beta[3], beta[1] - beta[2], 0.0, 0.0])
    alpha = np.array([alpha_s, alpha_gamma, -alpha_gamma, 2 * alpha_s])
    truth = SemTruth(tau0 + beta[2], tau, alpha, beta, composite, gamma)
    pairs = PairedObservations(np.arange(n), M0, Y0, M1, Y1, np.ones(n, dtype=int))
    return pairs, truth
