"""Attestation timeliness and block canonicalization probability.

A block released at time tau (seconds into the slot) is seen in time by an
attester iff its propagation delay fits inside the remaining attestation
window. Under multi-source building the delay is a single log-normal leg
from the proposer; under single-source building it is the sum of two legs
(proposer -> relay -> attester), approximated by a moment-matched
log-normal. A block becomes canonical when at least a threshold fraction of
the committee is timely; that probability is an exact Poisson-binomial tail.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln, ndtr

from .topology import LatencyModel


@dataclass(frozen=True)
class LogNormalParams:
    mu: float  # location, ln-ms; -inf encodes a zero (absent) leg
    sigma: float

    def mean(self) -> float:
        if self.mu == -math.inf:
            return 0.0
        return math.exp(self.mu + 0.5 * self.sigma * self.sigma)

    def variance(self) -> float:
        if self.mu == -math.inf or self.sigma == 0.0:
            return 0.0
        s2 = self.sigma * self.sigma
        return (math.exp(s2) - 1.0) * math.exp(2.0 * self.mu + s2)


@dataclass(frozen=True)
class Committee:
    """Attesters of one slot with the canonicalization rule parameters."""

    attesters: tuple[tuple[int, int], ...]  # (validator id, region id)
    threshold_fraction: float  # gamma in (0, 1]
    cutoff: float  # attestation deadline in seconds from slot start

    def __post_init__(self):
        if not 0.0 < self.threshold_fraction <= 1.0:
            raise ValueError("threshold_fraction must be in (0, 1]")

    @property
    def size(self) -> int:
        return len(self.attesters)

    @property
    def required_count(self) -> int:
        return required_votes(self.threshold_fraction, self.size)

    def region_counts(self, n_regions: int) -> np.ndarray:
        regions = [r for _, r in self.attesters]
        return np.bincount(regions, minlength=n_regions).astype(np.intp)


def required_votes(threshold_fraction: float, committee_size: int) -> int:
    """ceil(gamma * n), guarded against float dust, and at least 1."""
    raw = math.ceil(threshold_fraction * committee_size - 1e-9)
    return max(1, raw)


def timely_prob_msp(
    proposer_region: int,
    attester_region: int,
    tau: float,
    model: LatencyModel,
    cutoff: float,
) -> float:
    """P[one attester receives a block released at tau before the cutoff]."""
    if tau >= cutoff:
        return 0.0
    window_ms = (cutoff - tau) * 1000.0
    return model.latency_cdf(proposer_region, attester_region, window_ms)


def lognormal_sum_params(p1: LogNormalParams, p2: LogNormalParams) -> LogNormalParams:
    """Log-normal matching the first two moments of a sum of two legs.

    Moment matching (Fenton-Wilkinson): with M = m1 + m2 and V = v1 + v2,
    sigma_z^2 = ln(1 + V / M^2) and mu_z = ln(M) - sigma_z^2 / 2, so the
    matched mean and variance equal M and V exactly. A degenerate leg
    (mu = -inf, i.e. no second hop) returns the other leg unchanged.
    """
    if p2.mu == -math.inf:
        return p1
    if p1.mu == -math.inf:
        return p2
    m_total = p1.mean() + p2.mean()
    v_total = p1.variance() + p2.variance()
    sigma_z2 = math.log1p(v_total / (m_total * m_total))
    mu_z = math.log(m_total) - 0.5 * sigma_z2
    return LogNormalParams(mu_z, math.sqrt(sigma_z2))


def timely_prob_ssp(
    proposer_region: int,
    relay_region: int,
    attester_region: int,
    tau: float,
    model: LatencyModel,
    cutoff: float,
) -> float:
    """Timeliness of one attester when the block routes through a relay."""
    if tau >= cutoff:
        return 0.0
    window_ms = (cutoff - tau) * 1000.0
    leg1 = LogNormalParams(model.mu[proposer_region, relay_region], model.sigma)
    leg2 = LogNormalParams(model.mu[relay_region, attester_region], model.sigma)
    total = lognormal_sum_params(leg1, leg2)
    if total.sigma == 0.0:
        # equality at the step counts as delivered, with roundtrip slack
        return 1.0 if math.log(window_ms) >= total.mu - 1e-12 else 0.0
    return float(ndtr((math.log(window_ms) - total.mu) / total.sigma))


def poisson_binomial_tail(probs: Sequence[float], k: int) -> float:
    """P[S >= k] for S a sum of independent Bernoulli(p_i) variables.

    Exact O(n * k) dynamic program over success counts, with counts >= k
    absorbed as they appear.

    >>> round(poisson_binomial_tail([0.5, 0.5, 0.5], 2), 10)
    0.5
    >>> poisson_binomial_tail([0.2, 0.9], 0)
    1.0
    """
    p = np.asarray(probs, dtype=float)
    n = p.size
    if np.any((p < 0.0) | (p > 1.0)):
        raise ValueError("probabilities must lie in [0, 1]")
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    if k == 0:
        return 1.0
    if k > n:
        return 0.0
    dp = np.zeros(k)
    dp[0] = 1.0
    absorbed = 0.0
    for pi in p:
        absorbed += dp[k - 1] * pi
        dp[1:] = dp[1:] * (1.0 - pi) + dp[:-1] * pi
        dp[0] *= 1.0 - pi
    return float(absorbed)


_LOG_BINOM_CACHE: dict[int, np.ndarray] = {}


def _log_binom_coeffs(m: int) -> np.ndarray:
    out = _LOG_BINOM_CACHE.get(m)
    if out is None:
        j = np.arange(m + 1)
        out = gammaln(m + 1) - gammaln(j + 1) - gammaln(m - j + 1)
        _LOG_BINOM_CACHE[m] = out
    return out


def _binom_pmf(m: int, p: float) -> np.ndarray:
    if p <= 0.0:
        out = np.zeros(m + 1)
        out[0] = 1.0
        return out
    if p >= 1.0:
        out = np.zeros(m + 1)
        out[m] = 1.0
        return out
    j = np.arange(m + 1)
    return np.exp(_log_binom_coeffs(m) + j * math.log(p) + (m - j) * math.log1p(-p))


def grouped_binomial_tail(counts: np.ndarray, probs: np.ndarray, k: int) -> float:
    """P[S >= k] when the Bernoulli trials come in groups of equal probability.

    Equivalent to poisson_binomial_tail on the expanded vector but built by
    convolving binomial pmfs, one per group, which is much faster for large
    committees spanning few regions. Works on whichever side of the
    threshold is narrower and absorbs the mass beyond it.
    """
    counts = np.asarray(counts, dtype=np.intp)
    probs = np.asarray(probs, dtype=float)
    n = int(counts.sum())
    if k <= 0:
        return 1.0
    if k > n:
        return 0.0
    success_side = k <= n - k + 1
    cap = k if success_side else n - k + 1
    pmf = np.ones(1)
    absorbed = 0.0
    for m_i, p_i in zip(counts, probs):
        if m_i == 0:
            continue
        g = _binom_pmf(int(m_i), p_i if success_side else 1.0 - p_i)
        pmf = np.convolve(pmf, g)
        if pmf.size > cap:
            absorbed += float(pmf[cap:].sum())
            pmf = pmf[:cap]
    if success_side:
        return min(1.0, absorbed)
    return min(1.0, float(pmf.sum()))


def canonical_prob(committee: Committee, timely: Sequence[float]) -> float:
    """Probability that enough of the committee attests before the cutoff."""
    if len(timely) != committee.size:
        raise ValueError("one timeliness probability per attester required")
    return poisson_binomial_tail(timely, committee.required_count)


def lln_canonical_indicator(committee: Committee, timely: Sequence[float]) -> float:
    """Large-committee shortcut: 1 if the mean timeliness clears the threshold."""
    if len(timely) != committee.size:
        raise ValueError("one timeliness probability per attester required")
    mean = float(np.mean(timely)) if committee.size else 0.0
    return 1.0 if mean >= committee.threshold_fraction else 0.0


def two_leg_mc_cdf(
    p1: LogNormalParams,
    p2: LogNormalParams,
    t_ms: np.ndarray,
    n_samples: int,
    seed: int,
) -> np.ndarray:
    """Empirical CDF of the exact two-leg latency sum, for oracle checks."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((2, n_samples))
    samples = np.exp(p1.mu + p1.sigma * z[0]) + np.exp(p2.mu + p2.sigma * z[1])
    samples.sort()
    t_ms = np.atleast_1d(np.asarray(t_ms, dtype=float))
    return np.searchsorted(samples, t_ms, side="right") / n_samples
