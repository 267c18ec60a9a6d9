"""Per-slot geographic decentralization metrics over stake shares."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ZeroMean(ValueError):
    """Coefficient of variation is undefined for a nonpositive mean."""


def _validate_shares(shares: np.ndarray) -> np.ndarray:
    shares = np.asarray(shares, dtype=float)
    if shares.ndim != 1 or shares.size == 0:
        raise ValueError("shares must be a nonempty vector")
    if np.any(shares < 0.0):
        raise ValueError("shares must be nonnegative")
    if abs(shares.sum() - 1.0) > 1e-9:
        raise ValueError(f"shares must sum to 1, got {shares.sum()!r}")
    return shares


def gini(shares: np.ndarray) -> float:
    """Mean absolute share difference over twice the unit count.

    Equals sum_{r,r'} |p_r - p_r'| / (2m): 0 for a uniform vector and
    (m - 1) / m when one unit holds everything.
    """
    p = np.sort(_validate_shares(shares))
    m = p.size
    # Sorted-order identity for the pairwise double sum.
    weights = 2.0 * np.arange(1, m + 1) - m - 1.0
    return float(np.dot(weights, p) / m)


def hhi(shares: np.ndarray) -> float:
    """Herfindahl-Hirschman concentration: sum of squared shares."""
    p = _validate_shares(shares)
    return float(np.dot(p, p))


def payoff_cv(best_payoffs: np.ndarray) -> float:
    """Population coefficient of variation of per-region best payoffs."""
    x = np.asarray(best_payoffs, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("best_payoffs must be a nonempty vector")
    mean = float(x.mean())
    if mean <= 0.0:
        raise ZeroMean(f"mean payoff must be positive, got {mean}")
    return float(x.std() / mean)


def liveness_coefficient(shares: np.ndarray) -> int:
    """Smallest number of units jointly holding at least a third of stake."""
    p = np.sort(_validate_shares(shares))[::-1]
    cum = np.cumsum(p)
    hits = np.nonzero(cum >= (1.0 / 3.0) - 1e-12)[0]
    return int(hits[0]) + 1


def shares_from_counts(counts: np.ndarray) -> np.ndarray:
    """Normalize per-unit validator counts to stake shares (equal stakes)."""
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        raise ValueError("population is empty")
    return counts / total


@dataclass(frozen=True)
class MetricsSnapshot:
    slot: int
    gini: float
    hhi: float
    cv: float | None  # None when the payoff mean is nonpositive
    lc: int


def snapshot(slot: int, shares: np.ndarray, best_payoffs: np.ndarray | None) -> MetricsSnapshot:
    """Bundle the four per-slot metrics; cv is omitted when undefined."""
    cv: float | None
    if best_payoffs is None:
        cv = None
    else:
        try:
            cv = payoff_cv(best_payoffs)
        except ZeroMean:
            cv = None
    return MetricsSnapshot(
        slot=slot,
        gini=gini(shares),
        hhi=hhi(shares),
        cv=cv,
        lc=liveness_coefficient(shares),
    )
