"""Proposer strategy: when to release, and whether to relocate.

The proposer picks the latest release time on the slot's 50 ms grid whose
canonicalization probability still clears the risk tolerance, then earns
that probability times the value captured at release. Relocation is worth
it when the best alternative location beats the current one by more than
the migration cost.

SlotEvaluator is the shared computational core: it vectorizes timeliness
probabilities over regions, runs the release search per candidate location,
and produces the per-region payoff tables used for both migration decisions
and the per-slot payoff dispersion metric.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr

from .attestation import (
    Committee,
    LogNormalParams,
    grouped_binomial_tail,
    lognormal_sum_params,
    required_votes,
    two_leg_mc_cdf,
)
from .sources import InfoSource, SourceKind
from .topology import LatencyModel

MSP = "msp"  # multi-source proposing: aggregate many signal streams
SSP = "ssp"  # single-source proposing: commit to one relay's bid


@dataclass(frozen=True)
class ConsensusParams:
    slot_duration_s: float = 12.0
    cutoff_s: float = 4.0
    threshold: float = 2.0 / 3.0
    risk_tolerance: float = 0.99
    time_step_s: float = 0.05

    def __post_init__(self):
        if self.cutoff_s <= 0 or self.cutoff_s > self.slot_duration_s:
            raise ValueError("cutoff must lie inside the slot")
        if self.time_step_s <= 0:
            raise ValueError("time step must be positive")
        if not 0.0 < self.threshold <= 1.0:
            raise ValueError("threshold must be in (0, 1]")
        if not 0.0 < self.risk_tolerance <= 1.0:
            raise ValueError("risk tolerance must be in (0, 1]")

    @property
    def n_steps(self) -> int:
        """Grid points run 0 .. n_steps, covering [0, cutoff]."""
        return int(round(self.cutoff_s / self.time_step_s))


@dataclass(frozen=True)
class ReleasePlan:
    tau_star: float  # seconds into the slot
    canonical_prob: float  # probability at tau_star; below tolerance iff infeasible
    payoff: float
    location: int  # region id under msp, relay index under ssp


@dataclass(frozen=True)
class MigrationDecision:
    move: bool
    destination: int  # region id
    marginal_benefit: float  # best alternative minus staying, unclamped


def marginal_benefit_record(decision: MigrationDecision) -> float:
    """Benefit as recorded in run outputs: gains only, never negative."""
    return max(0.0, decision.marginal_benefit)


@dataclass
class _Tables:
    """Per-committee payoff landscape over candidate locations."""

    best_payoff: np.ndarray  # (m,) best payoff attainable from each region
    best_tau_idx: np.ndarray
    best_pi: np.ndarray
    best_relay: np.ndarray | None  # (m,) relay index per region (ssp only)
    co_payoff: np.ndarray | None  # (n_relays,) payoff when co-located (ssp only)
    co_tau_idx: np.ndarray | None
    co_pi: np.ndarray | None


class SlotEvaluator:
    """Release-plan computations for one scenario's fixed topology and sources.

    Payoff tables are a pure function of the committee's region counts, so
    callers may cache them across slots keyed on that vector.
    """

    def __init__(
        self,
        model: LatencyModel,
        params: ConsensusParams,
        paradigm: str,
        sources: Sequence[InfoSource],
        canonical_mode: str = "exact",
        ssp_cdf: str = "fw",
        mc_samples: int = 100_000,
        mc_seed: int = 0,
    ):
        if paradigm not in (MSP, SSP):
            raise ValueError(f"unknown paradigm {paradigm!r}")
        if canonical_mode not in ("exact", "lln"):
            raise ValueError(f"unknown canonical mode {canonical_mode!r}")
        if ssp_cdf not in ("fw", "mc"):
            raise ValueError(f"unknown two-leg cdf mode {ssp_cdf!r}")
        if not sources:
            raise ValueError("at least one information source is required")
        kinds = {s.kind for s in sources}
        expected_kind = SourceKind.SIGNAL if paradigm == MSP else SourceKind.RELAY
        if kinds != {expected_kind}:
            raise ValueError(f"{paradigm} requires sources of kind {expected_kind}")

        self.model = model
        self.params = params
        self.paradigm = paradigm
        self.sources = tuple(sources)
        self.canonical_mode = canonical_mode
        self.ssp_cdf = ssp_cdf
        self.mc_samples = mc_samples
        self.mc_seed = mc_seed

        self.m = len(model.regions)
        self.n_steps = params.n_steps
        self.grid = np.arange(self.n_steps + 1) * params.time_step_s
        # Attestation window per grid point, ms; the cutoff point itself is
        # never timely and is handled as a hard zero.
        windows = (params.cutoff_s - self.grid[:-1]) * 1000.0
        self._log_w = np.log(windows)
        self._sigma = model.sigma

        src_regions = np.array([s.region for s in self.sources], dtype=np.intp)
        self._a = np.array([s.a for s in self.sources])
        self._b = np.array([s.b for s in self.sources])
        # Expected observation lag from every candidate region, seconds.
        self._lag_s = model.expected[:, src_regions] / 1000.0

        if paradigm == SSP:
            self._init_ssp_legs(src_regions)

    def _init_ssp_legs(self, relay_regions: np.ndarray) -> None:
        """Moment-matched parameters of proposer->relay->attester sums."""
        sig = self._sigma
        mu = self.model.mu
        mean = self.model.expected
        var = (math.exp(sig * sig) - 1.0) * mean * mean if sig > 0 else np.zeros_like(mean)
        # legs: first (m, nI, 1): proposer -> relay; second (1, nI, m): relay -> attester
        m1 = mean[:, relay_regions][:, :, None]
        v1 = var[:, relay_regions][:, :, None]
        m2 = mean[relay_regions, :][None, :, :]
        v2 = var[relay_regions, :][None, :, :]
        total_mean = m1 + m2
        total_var = v1 + v2
        with np.errstate(divide="ignore"):
            sg2 = np.log1p(total_var / (total_mean * total_mean))
            self._fw_sg = np.sqrt(sg2)
            self._fw_mu = np.log(total_mean) - 0.5 * sg2
        self._mc_cache: dict[tuple[int, int, int], np.ndarray] = {}

    # ------------------------------------------------------------------
    # timeliness vectors

    def _q_msp(self, region: int, step: int) -> np.ndarray:
        if step >= self.n_steps:
            return np.zeros(self.m)
        if self._sigma == 0.0:
            # step at the mean; relative slack absorbs grid and roundtrip dust
            w = (self.params.cutoff_s - self.grid[step]) * 1000.0
            return (self.model.expected[region] <= w * (1.0 + 1e-12)).astype(float)
        return ndtr((self._log_w[step] - self.model.mu[region]) / self._sigma)

    def _q_ssp(self, region: int, relay_idx: int, step: int) -> np.ndarray:
        if step >= self.n_steps:
            return np.zeros(self.m)
        if self.ssp_cdf == "mc":
            return self._q_ssp_mc(region, relay_idx, step)
        mu = self._fw_mu[region, relay_idx]
        sg = self._fw_sg[region, relay_idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (self._log_w[step] - mu) / sg
        if np.any(sg == 0.0):
            w = (self.params.cutoff_s - self.grid[step]) * 1000.0
            det = np.exp(mu)
            z = np.where(sg == 0.0, np.where(det <= w * (1.0 + 1e-12), np.inf, -np.inf), z)
        return ndtr(z)

    def _q_ssp_mc(self, region: int, relay_idx: int, step: int) -> np.ndarray:
        relay_region = self.sources[relay_idx].region
        sig = self._sigma
        out = np.empty(self.m)
        windows = (self.params.cutoff_s - self.grid[: self.n_steps]) * 1000.0
        for k in range(self.m):
            key = (region, relay_idx, k)
            q_grid = self._mc_cache.get(key)
            if q_grid is None:
                p1 = LogNormalParams(self.model.mu[region, relay_region], sig)
                p2 = LogNormalParams(self.model.mu[relay_region, k], sig)
                seed = self.mc_seed * 1_000_003 + (region * self.m + relay_region) * self.m + k
                q_grid = two_leg_mc_cdf(p1, p2, windows, self.mc_samples, seed)
                self._mc_cache[key] = q_grid
            out[k] = q_grid[step]
        return out

    # ------------------------------------------------------------------
    # canonicalization probability and release search

    def _pi_from_q(self, counts_nz: np.ndarray, q_nz: np.ndarray, n: int, req: int) -> float:
        if self.canonical_mode == "lln":
            mean = float(np.dot(counts_nz, q_nz)) / n
            return 1.0 if mean >= self.params.threshold else 0.0
        return grouped_binomial_tail(counts_nz, q_nz, req)

    def _search(self, pi_at: Callable[[int], float]) -> tuple[int, float, bool]:
        """Largest grid index whose canonical probability clears the bar.

        Binary search is valid because the probability is nonincreasing in
        the release time; the evaluations made along the way are checked
        for that, and an exhaustive scan must agree (see the test suite).
        """
        evals: dict[int, float] = {}

        def f(i: int) -> float:
            if i not in evals:
                evals[i] = pi_at(i)
            return evals[i]

        risk = self.params.risk_tolerance
        if f(0) < risk:
            idx, feasible = 0, False
        else:
            lo, hi = 0, self.n_steps  # f(n_steps) = 0 < risk always
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if f(mid) >= risk:
                    lo = mid
                else:
                    hi = mid
            idx, feasible = lo, True
        pts = sorted(evals)
        for a, b in zip(pts, pts[1:]):
            assert evals[a] >= evals[b] - 1e-9, "canonical probability rose with release time"
        return idx, evals[idx], feasible

    def search_grid_scan(self, pi_at: Callable[[int], float]) -> tuple[int, float, bool]:
        """Exhaustive-scan oracle with identical semantics to _search."""
        risk = self.params.risk_tolerance
        values = [pi_at(i) for i in range(self.n_steps + 1)]
        passing = [i for i, v in enumerate(values) if v >= risk]
        if not passing:
            return 0, values[0], False
        idx = passing[-1]
        return idx, values[idx], True

    # ------------------------------------------------------------------
    # per-location plans

    def _msp_value(self, region: int, tau: float) -> float:
        return float(np.dot(self._a, np.maximum(tau - self._lag_s[region], 0.0)) + self._b.sum())

    def _ssp_value(self, region: int, relay_idx: int, tau: float) -> float:
        lag = self._lag_s[region, relay_idx]
        return self._a[relay_idx] * max(tau - lag, 0.0) + self._b[relay_idx]

    def msp_plan(self, counts: np.ndarray, region: int, scan: bool = False) -> ReleasePlan:
        nz = np.nonzero(counts)[0]
        cnz = counts[nz]
        n = int(cnz.sum())
        req = required_votes(self.params.threshold, n)
        pi_at = lambda i: self._pi_from_q(cnz, self._q_msp(region, i)[nz], n, req)
        search = self.search_grid_scan if scan else self._search
        idx, pi, _ = search(pi_at)
        tau = float(self.grid[idx])
        return ReleasePlan(tau, pi, pi * self._msp_value(region, tau), region)

    def ssp_plan(
        self, counts: np.ndarray, region: int, relay_idx: int, scan: bool = False
    ) -> ReleasePlan:
        nz = np.nonzero(counts)[0]
        cnz = counts[nz]
        n = int(cnz.sum())
        req = required_votes(self.params.threshold, n)
        pi_at = lambda i: self._pi_from_q(cnz, self._q_ssp(region, relay_idx, i)[nz], n, req)
        search = self.search_grid_scan if scan else self._search
        idx, pi, _ = search(pi_at)
        tau = float(self.grid[idx])
        return ReleasePlan(tau, pi, pi * self._ssp_value(region, relay_idx, tau), relay_idx)

    # ------------------------------------------------------------------
    # committee-level tables

    def tables(self, counts: np.ndarray) -> _Tables:
        if self.paradigm == MSP:
            return self._msp_tables(counts)
        return self._ssp_tables(counts)

    def _msp_tables(self, counts: np.ndarray) -> _Tables:
        best_payoff = np.empty(self.m)
        best_tau = np.empty(self.m, dtype=np.intp)
        best_pi = np.empty(self.m)
        for r in range(self.m):
            plan = self.msp_plan(counts, r)
            best_payoff[r] = plan.payoff
            best_tau[r] = int(round(plan.tau_star / self.params.time_step_s))
            best_pi[r] = plan.canonical_prob
        return _Tables(best_payoff, best_tau, best_pi, None, None, None, None)

    def _ssp_tables(self, counts: np.ndarray) -> _Tables:
        n_relays = len(self.sources)
        co_payoff = np.empty(n_relays)
        co_tau = np.empty(n_relays, dtype=np.intp)
        co_pi = np.empty(n_relays)
        for i, relay in enumerate(self.sources):
            plan = self.ssp_plan(counts, relay.region, i)
            co_payoff[i] = plan.payoff
            co_tau[i] = int(round(plan.tau_star / self.params.time_step_s))
            co_pi[i] = plan.canonical_prob

        co_tau_s = self.grid[co_tau]
        best_payoff = np.empty(self.m)
        best_tau = np.empty(self.m, dtype=np.intp)
        best_pi = np.empty(self.m)
        best_relay = np.empty(self.m, dtype=np.intp)
        for r in range(self.m):
            # Upper bound per relay: probability at most 1, and a longer
            # first leg never lets the proposer release later than the
            # co-located search did.
            bounds = self._a * np.maximum(co_tau_s - self._lag_s[r], 0.0) + self._b
            order = sorted(range(n_relays), key=lambda i: (-bounds[i], i))
            got_payoff, got_tau, got_pi, got_relay = -np.inf, 0, 0.0, -1
            for i in order:
                if bounds[i] < got_payoff:
                    break
                plan = self.ssp_plan(counts, r, i)
                tau_idx = int(round(plan.tau_star / self.params.time_step_s))
                assert tau_idx <= co_tau[i], "first-leg latency extended the release time"
                better = plan.payoff > got_payoff or (
                    plan.payoff == got_payoff and i < got_relay
                )
                if better:
                    got_payoff, got_tau, got_pi, got_relay = plan.payoff, tau_idx, plan.canonical_prob, i
            best_payoff[r] = got_payoff
            best_tau[r] = got_tau
            best_pi[r] = got_pi
            best_relay[r] = got_relay
        return _Tables(best_payoff, best_tau, best_pi, best_relay, co_payoff, co_tau, co_pi)

    # ------------------------------------------------------------------
    # migration decisions

    def decide(self, tables: _Tables, current_region: int, cost: float):
        """Migration decision plus the executed release plan."""
        if self.paradigm == MSP:
            return self._decide_msp(tables, current_region, cost)
        return self._decide_ssp(tables, current_region, cost)

    def _decide_msp(self, t: _Tables, cur: int, cost: float):
        payoffs = t.best_payoff
        others = [r for r in range(self.m) if r != cur]
        dest = min(others, key=lambda r: (-payoffs[r], r)) if others else cur
        benefit = float(payoffs[dest] - payoffs[cur]) if others else 0.0
        decision = MigrationDecision(benefit > cost, dest if benefit > cost else cur, benefit)
        loc = dest if decision.move else cur
        plan = ReleasePlan(
            float(self.grid[t.best_tau_idx[loc]]), float(t.best_pi[loc]), float(payoffs[loc]), loc
        )
        return decision, plan

    def _decide_ssp(self, t: _Tables, cur: int, cost: float):
        n_relays = len(self.sources)
        i_star = min(range(n_relays), key=lambda i: (-t.co_payoff[i], i))
        stay_payoff = float(t.best_payoff[cur])
        benefit = float(t.co_payoff[i_star]) - stay_payoff
        dest_region = self.sources[i_star].region
        move = benefit > cost
        decision = MigrationDecision(move, dest_region if move else cur, benefit)
        if move:
            plan = ReleasePlan(
                float(self.grid[t.co_tau_idx[i_star]]),
                float(t.co_pi[i_star]),
                float(t.co_payoff[i_star]),
                i_star,
            )
        else:
            plan = ReleasePlan(
                float(self.grid[t.best_tau_idx[cur]]),
                float(t.best_pi[cur]),
                stay_payoff,
                int(t.best_relay[cur]),
            )
        return decision, plan


# ----------------------------------------------------------------------
# free-function interface over the evaluator


def _check_committee(committee: Committee, params: ConsensusParams) -> None:
    if committee.threshold_fraction != params.threshold:
        raise ValueError("committee threshold disagrees with consensus parameters")
    if committee.cutoff != params.cutoff_s:
        raise ValueError("committee cutoff disagrees with consensus parameters")


def optimal_release_msp(
    region: int,
    committee: Committee,
    sources: Sequence[InfoSource],
    model: LatencyModel,
    params: ConsensusParams,
) -> ReleasePlan:
    _check_committee(committee, params)
    ev = SlotEvaluator(model, params, MSP, sources)
    return ev.msp_plan(committee.region_counts(len(model.regions)), region)


def payoff_msp(
    region: int,
    committee: Committee,
    sources: Sequence[InfoSource],
    model: LatencyModel,
    params: ConsensusParams,
) -> float:
    return optimal_release_msp(region, committee, sources, model, params).payoff


def migrate_msp(
    current_region: int,
    committee: Committee,
    sources: Sequence[InfoSource],
    model: LatencyModel,
    params: ConsensusParams,
    cost: float,
) -> MigrationDecision:
    _check_committee(committee, params)
    ev = SlotEvaluator(model, params, MSP, sources)
    tables = ev.tables(committee.region_counts(len(model.regions)))
    decision, _ = ev.decide(tables, current_region, cost)
    return decision


def optimal_release_ssp(
    relay: InfoSource,
    proposer_region: int,
    committee: Committee,
    model: LatencyModel,
    params: ConsensusParams,
) -> ReleasePlan:
    _check_committee(committee, params)
    ev = SlotEvaluator(model, params, SSP, [relay])
    return ev.ssp_plan(committee.region_counts(len(model.regions)), proposer_region, 0)


def colocate_ssp(
    current_region: int,
    relays: Sequence[InfoSource],
    committee: Committee,
    model: LatencyModel,
    params: ConsensusParams,
    cost: float,
) -> MigrationDecision:
    _check_committee(committee, params)
    ev = SlotEvaluator(model, params, SSP, relays)
    tables = ev.tables(committee.region_counts(len(model.regions)))
    decision, _ = ev.decide(tables, current_region, cost)
    return decision
