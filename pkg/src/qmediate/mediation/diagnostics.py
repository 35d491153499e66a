"""Residual diagnostics for a fitted outcome model (plot-ready numbers only)."""

import numpy as np
from scipy import stats


def normal_quantile_pairs(residuals):
    """``(theoretical, observed)`` quantiles of standardized residuals at plotting positions (i - 0.5) / n."""
    r = np.sort(np.asarray(residuals, dtype=float))
    n = r.size
    sd = r.std(ddof=1) if n > 1 else 0.0
    z = (r - r.mean()) / sd if sd > 0 else np.zeros_like(r)
    theo = stats.norm.ppf((np.arange(1, n + 1) - 0.5) / n)
    return theo, z


def funnel_test(fitted, residuals, level: float = 0.05) -> dict:
    """Koenker's studentized Breusch-Pagan test of squared residuals on fitted values.

    ``n R^2`` of the auxiliary regression is compared with chi-square(1). A
    small p-value means the residual spread changes with the fitted value.
    """
    f = np.asarray(fitted, dtype=float)
    u2 = np.asarray(residuals, dtype=float) ** 2
    n = f.size
    if n < 3 or np.ptp(f) == 0 or np.ptp(u2) == 0:
        return {"statistic": None, "pvalue": None, "flag": False, "spread_slope": None}
    X = np.column_stack([np.ones(n), f])
    coef, *_ = np.linalg.lstsq(X, u2, rcond=None)
    r2 = 1.0 - np.sum((u2 - X @ coef) ** 2) / np.sum((u2 - u2.mean()) ** 2)
    stat = float(n * r2)
    p = float(stats.chi2.sf(stat, 1))
    return {"statistic": stat, "pvalue": p, "flag": bool(p < level), "spread_slope": float(coef[1])}


def arm_summaries(t, residuals) -> dict:
    t = np.asarray(t).astype(int)
    r = np.asarray(residuals, dtype=float)
    out = {}
    for arm in (0, 1):
        x = r[t == arm]
        out[f"t{arm}"] = {
            "n": int(x.size),
            "mean": float(x.mean()) if x.size else None,
            "sd": float(x.std(ddof=1)) if x.size > 1 else None,
            "max_abs": float(np.abs(x).max()) if x.size else None,
        }
    return out
