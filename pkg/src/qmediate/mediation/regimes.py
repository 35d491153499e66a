"""Mediated-contribution magnitudes, relevance threshold and regime labels."""

from dataclasses import dataclass
from enum import Enum
import math

import numpy as np

from ..errors import InputError


class Regime(str, Enum):
    QUANTUM_ADVANTAGE = "QuantumAdvantage"
    MASKED_QUANTUM = "MaskedQuantum"
    DOUBLE_DETRIMENTAL = "DoubleDetrimental"
    CLASSICAL_DOMINATED = "ClassicalDominated"
    NEUTRAL = "Neutral"
    COMPENSATORY = "Compensatory"
    CLASSICAL_SCALABLE = "ClassicalScalable"
    QUANTUM_IDLE = "QuantumIdle"
    ARCHITECTURE_DELETERIOUS = "ArchitectureDeleterious"
    UNCLASSIFIED = "Unclassified"


# (sign tau, sign indirect, sign total); None matches any sign
_TABLE = (
    (Regime.QUANTUM_ADVANTAGE, (1, 1, 1)),
    (Regime.MASKED_QUANTUM, (-1, 1, -1)),
    (Regime.DOUBLE_DETRIMENTAL, (-1, -1, -1)),
    (Regime.CLASSICAL_DOMINATED, (1, -1, 1)),
    (Regime.NEUTRAL, (0, 0, 0)),
    (Regime.COMPENSATORY, (1, -1, 0)),
    (Regime.CLASSICAL_SCALABLE, (1, 0, 1)),
    (Regime.QUANTUM_IDLE, (None, 1, 0)),
    (Regime.ARCHITECTURE_DELETERIOUS, (None, 0, -1)),
)
EXCLUDED = frozenset({Regime.QUANTUM_IDLE, Regime.ARCHITECTURE_DELETERIOUS})


@dataclass(frozen=True)
class RegimeLabel:
    regime: Regime
    signs: tuple  # thresholded (tau, indirect, total), each -1, 0 or +1

    @property
    def excluded(self) -> bool:
        """True for the two regimes kept out of the primary analysis."""
        return self.regime in EXCLUDED

    @property
    def name(self) -> str:
        return self.regime.value


def thresholded_sign(value: float, eps: float) -> int:
    """+1 above ``eps``, -1 below ``-eps``, 0 inside the closed band ``[-eps, eps]``."""
    if value > eps:
        return 1
    if value < -eps:
        return -1
    return 0


def classify_regime(tau: float, nie: float, ate: float, epsilon: float) -> RegimeLabel:
    """Map the thresholded sign triple of (direct, indirect, total) to a regime."""
    vals = (tau, nie, ate, epsilon)
    if not all(math.isfinite(v) for v in vals):
        raise InputError(f"regime inputs must be finite, got {vals}")
    if epsilon < 0:
        raise InputError(f"threshold must be non-negative, got {epsilon}")
    signs = tuple(thresholded_sign(v, epsilon) for v in (tau, nie, ate))
    for regime, pattern in _TABLE:
        if all(p is None or p == s for p, s in zip(pattern, signs)):
            return RegimeLabel(regime, signs)
    return RegimeLabel(Regime.UNCLASSIFIED, signs)


def mamc(est) -> np.ndarray:
    """|alpha_k beta_k| per mediator."""
    return np.abs(np.asarray(est.alpha, dtype=float) * np.asarray(est.beta, dtype=float))


def rqc(mamc_values):
    """Share of total MAMC per mediator in percent, or ``None`` when every MAMC is zero."""
    m = np.asarray(mamc_values, dtype=float)
    total = m.sum()
    if not total > 0:
        return None
    return 100.0 * m / total


def intra_threshold(pairs_or_deltas, c: float = 0.5) -> float:
    """``c`` times the sample standard deviation (n - 1 denominator) of the per-sample total effects."""
    d = getattr(pairs_or_deltas, "delta_y", pairs_or_deltas)
    d = np.asarray(d, dtype=float)
    if d.size < 2:
        raise InputError("threshold needs at least 2 paired samples")
    return float(c * np.std(d, ddof=1))
