"""Slot-by-slot simulation of validator geography.

Each slot selects a proposer uniformly at random, evaluates the payoff
landscape against the committee of all other validators, lets the proposer
relocate when the gain clears the migration cost, and records the release
outcome together with per-slot geographic decentralization metrics.

The payoff landscape is a pure function of the committee's region counts,
so landscapes are cached on that key; between migrations the population is
static and slots become cheap lookups.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import metrics as metrics_mod
from .sources import InfoSource, SourceKind
from .strategy import (
    MSP,
    SSP,
    ConsensusParams,
    SlotEvaluator,
    marginal_benefit_record,
)
from .topology import (
    LatencyModel,
    Macro,
    RegionTable,
    bundled_dataset_path,
    load_latency_dataset,
    load_region_macros_csv,
)

log = logging.getLogger(__name__)

RELAY_SLOPE = 0.4
RELAY_INTERCEPT = 0.04


class EmptyPopulation(ValueError):
    pass


class SharesDontSum(ValueError):
    pass


@dataclass(frozen=True)
class ValidatorState:
    id: int
    region: int
    stake: float = 1.0


@dataclass(frozen=True)
class SourceSpec:
    """A source location, with optional explicit value parameters."""

    region: str
    a: float | None = None
    b: float | None = None


@dataclass(frozen=True)
class LatencyConfig:
    dataset: str | None = None  # None selects the bundled snapshot
    sigma: float = 0.5
    intra_region_default_ms: float = 2.0
    region_macros: str | None = None  # optional name,macro override CSV


@dataclass(frozen=True)
class ScenarioConfig:
    paradigm: str
    seed: int = 0
    slots: int = 10_000
    validator_count: int = 1_000
    placement: str | tuple[tuple[str, float], ...] = "homogeneous"
    sources: str | tuple[SourceSpec, ...] = "homogeneous"
    migration_cost: float = 0.002
    consensus: ConsensusParams = field(default_factory=ConsensusParams)
    committee_size: int | None = None
    canonical_mode: str = "exact"
    ssp_cdf: str = "fw"
    mc_samples: int = 100_000
    metrics_granularity: str = "gcp"
    latency: LatencyConfig = field(default_factory=LatencyConfig)
    label: str = ""

    def __post_init__(self):
        if self.paradigm not in (MSP, SSP):
            raise ValueError(f"paradigm must be {MSP!r} or {SSP!r}")
        if self.migration_cost < 0:
            raise ValueError("migration cost must be nonnegative")
        if self.metrics_granularity not in ("gcp", "macro"):
            raise ValueError("metrics granularity must be 'gcp' or 'macro'")
        if self.slots < 0:
            raise ValueError("slot count must be nonnegative")


@dataclass(frozen=True)
class SlotOutcome:
    slot: int
    proposer: int
    origin: int
    moved: bool
    destination: int
    marginal_benefit: float  # decision value, may be negative
    recorded_benefit: float  # clamped at zero for reporting
    tau_star: float
    canonical_prob: float
    payoff: float
    relay: int | None  # relay index under single-source building


@dataclass
class SimulationResult:
    config: ScenarioConfig
    table: RegionTable
    outcomes: list[SlotOutcome]
    metrics: list[metrics_mod.MetricsSnapshot]
    initial_regions: np.ndarray
    final_regions: np.ndarray
    macro_histogram: np.ndarray  # (slots, 7) post-slot macro counts
    wall_time_s: float

    @property
    def final_population(self) -> list[ValidatorState]:
        return [ValidatorState(i, int(r)) for i, r in enumerate(self.final_regions)]

    def recorded_benefits(self) -> np.ndarray:
        return np.array([o.recorded_benefit for o in self.outcomes])

    def move_count(self) -> int:
        return sum(1 for o in self.outcomes if o.moved)


def rng_for(seed: int, *key: int) -> np.random.Generator:
    """Deterministic substream of the scenario seed, keyed by integers."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.PCG64(ss))


_STREAM_INIT = 0
_STREAM_PROPOSER = 1
_STREAM_COMMITTEE = 2


def _largest_remainder(quotas: np.ndarray, total: int) -> np.ndarray:
    """Integer apportionment of `total` with quotas summing to `total`."""
    base = np.floor(quotas).astype(int)
    short = total - int(base.sum())
    if short > 0:
        remainders = quotas - np.floor(quotas)
        # ties broken toward lower index
        order = np.lexsort((np.arange(quotas.size), -remainders))
        base[order[:short]] += 1
    return base


def init_population(
    count: int,
    placement: str | tuple[tuple[str, float], ...],
    table: RegionTable,
    rng: np.random.Generator,
) -> np.ndarray:
    """Assign validators to regions; returns an array of region ids."""
    if count <= 0:
        raise EmptyPopulation("validator count must be positive")
    m = len(table)
    if placement == "homogeneous":
        macros = table.present_macros()
        base, rem = divmod(count, len(macros))
        per_macro = {mac: base + (1 if i < rem else 0) for i, mac in enumerate(macros)}
        regions = np.empty(count, dtype=np.intp)
        pos = 0
        for mac in macros:
            ids = [r.id for r in table.by_macro(mac)]
            n_mac = per_macro[mac]
            regions[pos : pos + n_mac] = rng.choice(ids, size=n_mac, replace=True)
            pos += n_mac
        return regions

    shares = np.zeros(m)
    for name, share in placement:
        if share < 0:
            raise SharesDontSum(f"negative share for {name!r}")
        try:
            rid = table.index(name)
            shares[rid] += share
            continue
        except Exception:
            pass
        macro = next((mac for mac in Macro if mac.label == name), None)
        if macro is None:
            raise SharesDontSum(f"{name!r} is neither a region nor a macro-region")
        members = table.by_macro(macro)
        if not members:
            raise SharesDontSum(f"macro-region {name!r} has no regions in this topology")
        for r in members:
            shares[r.id] += share / len(members)
    if abs(shares.sum() - 1.0) > 1e-6:
        raise SharesDontSum(f"shares sum to {shares.sum()!r}, expected 1")
    counts = _largest_remainder(shares * count, count)
    return np.repeat(np.arange(m, dtype=np.intp), counts)


def build_sources(config: ScenarioConfig, table: RegionTable) -> tuple[InfoSource, ...]:
    """Expand the source specification for the scenario's paradigm.

    Homogeneous placement puts one source in every region. Relays are
    identical full-strength bids; signals split the relay baseline so each
    macro-region carries an equal fraction of the total signal value.
    Explicit source lists split the baseline evenly unless parameters are
    given outright.
    """
    kind = SourceKind.SIGNAL if config.paradigm == MSP else SourceKind.RELAY
    if config.sources == "homogeneous":
        out = []
        if kind == SourceKind.RELAY:
            for r in table:
                out.append(InfoSource(kind, r.id, RELAY_SLOPE, RELAY_INTERCEPT))
        else:
            macros = table.present_macros()
            for r in table:
                denom = len(macros) * len(table.by_macro(r.macro))
                out.append(InfoSource(kind, r.id, RELAY_SLOPE / denom, RELAY_INTERCEPT / denom))
        return tuple(out)

    specs: Sequence[SourceSpec] = config.sources  # type: ignore[assignment]
    n = len(specs)
    out = []
    for spec in specs:
        rid = table.index(spec.region)
        if kind == SourceKind.RELAY:
            a = RELAY_SLOPE if spec.a is None else spec.a
            b = RELAY_INTERCEPT if spec.b is None else spec.b
        else:
            a = RELAY_SLOPE / n if spec.a is None else spec.a
            b = RELAY_INTERCEPT / n if spec.b is None else spec.b
        out.append(InfoSource(kind, rid, a, b))
    return tuple(out)


def build_topology(config: ScenarioConfig) -> tuple[RegionTable, LatencyModel]:
    lat = config.latency
    path = lat.dataset or bundled_dataset_path()
    macros = None
    if lat.region_macros is not None:
        macros = load_region_macros_csv(lat.region_macros)
    return load_latency_dataset(
        path, lat.sigma, intra_default_ms=lat.intra_region_default_ms, region_macros=macros
    )


class Simulation:
    """Mutable run state; step() advances one slot."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.table, self.model = build_topology(config)
        self.sources = build_sources(config, self.table)
        self.evaluator = SlotEvaluator(
            self.model,
            config.consensus,
            config.paradigm,
            self.sources,
            canonical_mode=config.canonical_mode,
            ssp_cdf=config.ssp_cdf,
            mc_samples=config.mc_samples,
            mc_seed=config.seed,
        )
        self.n = config.validator_count
        if config.committee_size is not None and not 1 <= config.committee_size <= self.n - 1:
            raise ValueError("committee size must be between 1 and validators - 1")
        self.regions = init_population(
            self.n, config.placement, self.table, rng_for(config.seed, _STREAM_INIT, 0)
        )
        self.initial_regions = self.regions.copy()
        self.counts = np.bincount(self.regions, minlength=len(self.table)).astype(np.intp)
        self.macro_of_region = self.table.macro_ids
        self._tables_cache: dict[bytes, object] = {}
        self._granularity_macros = self.table.present_macros()

    def _committee_counts(self, slot: int, proposer: int) -> np.ndarray:
        cc = self.counts.copy()
        cc[self.regions[proposer]] -= 1
        if self.config.committee_size is None:
            return cc
        # Uniform subsample of the other validators, by region counts.
        rng = rng_for(self.config.seed, _STREAM_COMMITTEE, slot)
        pool = np.repeat(np.arange(len(self.table), dtype=np.intp), cc)
        picked = rng.choice(pool, size=self.config.committee_size, replace=False)
        return np.bincount(picked, minlength=len(self.table)).astype(np.intp)

    def _tables_for(self, cc: np.ndarray):
        key = cc.tobytes()
        tables = self._tables_cache.get(key)
        if tables is None:
            tables = self.evaluator.tables(cc)
            self._tables_cache[key] = tables
        return tables

    def _shares(self) -> np.ndarray:
        if self.config.metrics_granularity == "macro":
            macro_counts = np.bincount(
                self.macro_of_region[self.regions], minlength=len(Macro)
            )
            units = np.array([int(mac) for mac in self._granularity_macros])
            return metrics_mod.shares_from_counts(macro_counts[units])
        return metrics_mod.shares_from_counts(self.counts)

    def step(self, slot: int) -> tuple[SlotOutcome, metrics_mod.MetricsSnapshot]:
        proposer = int(rng_for(self.config.seed, _STREAM_PROPOSER, slot).integers(self.n))
        origin = int(self.regions[proposer])
        cc = self._committee_counts(slot, proposer)
        tables = self._tables_for(cc)
        decision, plan = self.evaluator.decide(tables, origin, self.config.migration_cost)
        if decision.move:
            self.regions[proposer] = decision.destination
            self.counts[origin] -= 1
            self.counts[decision.destination] += 1
        outcome = SlotOutcome(
            slot=slot,
            proposer=proposer,
            origin=origin,
            moved=decision.move,
            destination=decision.destination,
            marginal_benefit=decision.marginal_benefit,
            recorded_benefit=marginal_benefit_record(decision),
            tau_star=plan.tau_star,
            canonical_prob=plan.canonical_prob,
            payoff=plan.payoff,
            relay=plan.location if self.config.paradigm == SSP else None,
        )
        snap = metrics_mod.snapshot(slot, self._shares(), tables.best_payoff)
        return outcome, snap

    def macro_counts(self) -> np.ndarray:
        return np.bincount(self.macro_of_region[self.regions], minlength=len(Macro))


def run_scenario(config: ScenarioConfig) -> SimulationResult:
    """Run a full scenario and collect outcomes, metrics and trajectories."""
    start = time.perf_counter()
    sim = Simulation(config)
    outcomes: list[SlotOutcome] = []
    snaps: list[metrics_mod.MetricsSnapshot] = []
    histogram = np.zeros((config.slots, len(Macro)), dtype=int)
    for slot in range(config.slots):
        outcome, snap = sim.step(slot)
        outcomes.append(outcome)
        snaps.append(snap)
        histogram[slot] = sim.macro_counts()
        if slot and slot % 1000 == 0:
            log.debug("%s slot %d/%d", config.label or config.paradigm, slot, config.slots)
    return SimulationResult(
        config=config,
        table=sim.table,
        outcomes=outcomes,
        metrics=snaps,
        initial_regions=sim.initial_regions,
        final_regions=sim.regions.copy(),
        macro_histogram=histogram,
        wall_time_s=time.perf_counter() - start,
    )


def step_slot(sim: Simulation, slot: int) -> SlotOutcome:
    """Advance one slot; exposed for stepwise inspection in tests."""
    outcome, _ = sim.step(slot)
    return outcome


def select_proposer(config: ScenarioConfig, slot: int, n_validators: int) -> int:
    """Uniform proposer pick for a slot, from that slot's RNG substream."""
    return int(rng_for(config.seed, _STREAM_PROPOSER, slot).integers(n_validators))
