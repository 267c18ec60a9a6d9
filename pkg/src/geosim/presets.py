"""Named experiment setups expanded into scenario configurations."""
from __future__ import annotations

import csv
from importlib import resources
from pathlib import Path

from .engine import LatencyConfig, ScenarioConfig, SourceSpec
from .strategy import ConsensusParams

ALIGNED_SOURCES = ("asia-northeast1", "europe-west1", "us-east4")
MISALIGNED_SOURCES = ("africa-south1", "australia-southeast1", "southamerica-east1")
COST_GRID = (0.0, 0.001, 0.002, 0.003)
GAMMA_GRID = (1 / 3, 1 / 2, 2 / 3, 4 / 5)

PRESET_NAMES = (
    "baseline-homogeneous",
    "sources-aligned",
    "sources-misaligned",
    "real-world",
    "cost-sweep",
    "gamma-sweep",
    "slot-time-6s",
)


class UnknownPreset(ValueError):
    pass


def load_share_csv(path: str | Path) -> tuple[tuple[str, float], ...]:
    """Read a name,share table; names may be regions or macro-regions."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"name", "share"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected columns name,share")
        for row in reader:
            out.append((row["name"], float(row["share"])))
    return tuple(out)


def real_world_share_path() -> Path:
    return Path(str(resources.files("geosim.data").joinpath("real_world_shares.csv")))


def expand_preset(
    name: str,
    paradigm: str,
    *,
    seed: int = 0,
    validators: int = 1_000,
    slots: int = 10_000,
    cost: float | None = None,
    canonical_mode: str = "exact",
) -> list[ScenarioConfig]:
    """Build the scenario list for a named preset.

    Sweeps expand to several configurations; everything else yields one.
    """
    base = dict(
        paradigm=paradigm,
        seed=seed,
        slots=slots,
        validator_count=validators,
        canonical_mode=canonical_mode,
        metrics_granularity="macro",
        latency=LatencyConfig(),
    )
    c = 0.002 if cost is None else cost

    if name == "baseline-homogeneous":
        return [ScenarioConfig(migration_cost=c, label="baseline", **base)]
    if name == "sources-aligned":
        srcs = tuple(SourceSpec(r) for r in ALIGNED_SOURCES)
        return [ScenarioConfig(migration_cost=c, sources=srcs, label="aligned", **base)]
    if name == "sources-misaligned":
        srcs = tuple(SourceSpec(r) for r in MISALIGNED_SOURCES)
        return [ScenarioConfig(migration_cost=c, sources=srcs, label="misaligned", **base)]
    if name == "real-world":
        shares = load_share_csv(real_world_share_path())
        return [
            ScenarioConfig(migration_cost=c, placement=shares, label="real_world", **base)
        ]
    if name == "cost-sweep":
        if cost is not None:
            raise ValueError("cost-sweep fixes its own migration cost grid")
        return [
            ScenarioConfig(migration_cost=ci, label=f"cost_{ci:.3f}", **base)
            for ci in COST_GRID
        ]
    if name == "gamma-sweep":
        return [
            ScenarioConfig(
                migration_cost=c,
                consensus=ConsensusParams(threshold=g),
                label=f"gamma_{g:.4f}",
                **base,
            )
            for g in GAMMA_GRID
        ]
    if name == "slot-time-6s":
        return [
            ScenarioConfig(
                migration_cost=c,
                consensus=ConsensusParams(slot_duration_s=6.0, cutoff_s=3.0),
                label="slot6s",
                **base,
            )
        ]
    raise UnknownPreset(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
