"""Geographic topology: regions, macro-regions, and pairwise latency.

Latency between any ordered pair of regions is modeled as a log-normal
random variable calibrated so that its mean matches an ingested empirical
mean (milliseconds). All regions share a single log-scale parameter sigma.
"""
from __future__ import annotations

import csv
import enum
import io
import math
import os
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping

import numpy as np
from scipy.special import ndtr


class Macro(enum.IntEnum):
    """Continental macro-regions, in fixed id order."""

    AFRICA = 0
    ASIA = 1
    OCEANIA = 2
    EUROPE = 3
    MIDDLE_EAST = 4
    SOUTH_AMERICA = 5
    NORTH_AMERICA = 6

    @property
    def label(self) -> str:
        return _MACRO_LABELS[self]


_MACRO_LABELS = {
    Macro.AFRICA: "Africa",
    Macro.ASIA: "Asia",
    Macro.OCEANIA: "Oceania",
    Macro.EUROPE: "Europe",
    Macro.MIDDLE_EAST: "MiddleEast",
    Macro.SOUTH_AMERICA: "SouthAmerica",
    Macro.NORTH_AMERICA: "NorthAmerica",
}

MACRO_BY_LABEL = {label: macro for macro, label in _MACRO_LABELS.items()}

# Canonical cloud region -> macro-region assignment (40 regions).
GCP_MACROS: dict[str, Macro] = {
    "africa-south1": Macro.AFRICA,
    "asia-east1": Macro.ASIA,
    "asia-east2": Macro.ASIA,
    "asia-northeast1": Macro.ASIA,
    "asia-northeast2": Macro.ASIA,
    "asia-northeast3": Macro.ASIA,
    "asia-south1": Macro.ASIA,
    "asia-south2": Macro.ASIA,
    "asia-southeast1": Macro.ASIA,
    "asia-southeast2": Macro.ASIA,
    "australia-southeast1": Macro.OCEANIA,
    "australia-southeast2": Macro.OCEANIA,
    "europe-central2": Macro.EUROPE,
    "europe-north1": Macro.EUROPE,
    "europe-north2": Macro.EUROPE,
    "europe-southwest1": Macro.EUROPE,
    "europe-west1": Macro.EUROPE,
    "europe-west2": Macro.EUROPE,
    "europe-west3": Macro.EUROPE,
    "europe-west4": Macro.EUROPE,
    "europe-west6": Macro.EUROPE,
    "europe-west8": Macro.EUROPE,
    "europe-west9": Macro.EUROPE,
    "europe-west10": Macro.EUROPE,
    "europe-west12": Macro.EUROPE,
    "me-central1": Macro.MIDDLE_EAST,
    "me-west1": Macro.MIDDLE_EAST,
    "northamerica-northeast1": Macro.NORTH_AMERICA,
    "northamerica-northeast2": Macro.NORTH_AMERICA,
    "southamerica-east1": Macro.SOUTH_AMERICA,
    "southamerica-west1": Macro.SOUTH_AMERICA,
    "us-central1": Macro.NORTH_AMERICA,
    "us-east1": Macro.NORTH_AMERICA,
    "us-east4": Macro.NORTH_AMERICA,
    "us-east5": Macro.NORTH_AMERICA,
    "us-south1": Macro.NORTH_AMERICA,
    "us-west1": Macro.NORTH_AMERICA,
    "us-west2": Macro.NORTH_AMERICA,
    "us-west3": Macro.NORTH_AMERICA,
    "us-west4": Macro.NORTH_AMERICA,
}


class TopologyError(ValueError):
    """Base class for latency dataset problems."""


class MissingPair(TopologyError):
    """An ordered inter-region pair has no latency entry."""


class DuplicatePair(TopologyError):
    """An ordered pair appears more than once in the dataset."""


class NonPositiveLatency(TopologyError):
    """A latency mean is zero or negative."""


class UnknownRegion(TopologyError):
    """A region name has no macro-region assignment."""


@dataclass(frozen=True)
class Region:
    id: int
    name: str
    macro: Macro


class RegionTable:
    """Immutable ordered collection of regions; ids are list positions."""

    def __init__(self, regions: Iterable[Region]):
        self.regions = tuple(regions)
        for i, r in enumerate(self.regions):
            if r.id != i:
                raise ValueError(f"region id {r.id} does not match position {i}")
        self._by_name = {r.name: r for r in self.regions}
        if len(self._by_name) != len(self.regions):
            raise ValueError("duplicate region names")
        self.macro_ids = np.array([int(r.macro) for r in self.regions], dtype=np.intp)

    @classmethod
    def from_names(cls, names: Iterable[str], macros: Mapping[str, Macro]) -> "RegionTable":
        regions = []
        for i, name in enumerate(names):
            if name not in macros:
                raise UnknownRegion(f"region {name!r} has no macro-region assignment")
            regions.append(Region(i, name, macros[name]))
        return cls(regions)

    def __len__(self) -> int:
        return len(self.regions)

    def __iter__(self):
        return iter(self.regions)

    def __getitem__(self, region_id: int) -> Region:
        return self.regions[region_id]

    def index(self, name: str) -> int:
        try:
            return self._by_name[name].id
        except KeyError:
            raise UnknownRegion(f"unknown region {name!r}") from None

    def names(self) -> list[str]:
        return [r.name for r in self.regions]

    def by_macro(self, macro: Macro) -> list[Region]:
        return [r for r in self.regions if r.macro == macro]

    def present_macros(self) -> list[Macro]:
        return sorted({r.macro for r in self.regions})


def calibrated_mu(mean_ms: float, sigma: float) -> float:
    """Location parameter of a log-normal with the given mean and log-scale."""
    return math.log(mean_ms) - 0.5 * sigma * sigma


class LatencyModel:
    """Pairwise log-normal latency over a region table.

    mu is an (m, m) matrix of location parameters in ln-milliseconds and
    sigma is the shared log-scale. ln d(j, k) ~ Normal(mu[j, k], sigma^2),
    so E[d] = exp(mu + sigma^2 / 2).
    """

    def __init__(self, regions: RegionTable, mu: np.ndarray, sigma: float):
        mu = np.asarray(mu, dtype=float)
        m = len(regions)
        if mu.shape != (m, m):
            raise ValueError(f"mu must be ({m}, {m}), got {mu.shape}")
        if sigma < 0:
            raise ValueError("sigma must be nonnegative")
        self.regions = regions
        self.mu = mu
        self.sigma = float(sigma)
        self.expected = np.exp(mu + 0.5 * sigma * sigma)

    @classmethod
    def from_means(cls, regions: RegionTable, means_ms: np.ndarray, sigma: float) -> "LatencyModel":
        means_ms = np.asarray(means_ms, dtype=float)
        if np.any(means_ms <= 0):
            raise NonPositiveLatency("latency means must be positive")
        return cls(regions, np.log(means_ms) - 0.5 * sigma * sigma, sigma)

    def expected_latency(self, j: int, k: int) -> float:
        """Mean latency in ms between regions j and k."""
        return float(self.expected[j, k])

    def latency_cdf(self, j: int, k: int, t_ms: float) -> float:
        """P[d(j, k) <= t_ms]; 0 for t_ms <= 0."""
        if t_ms <= 0.0:
            return 0.0
        if self.sigma == 0.0:
            # degenerate step at the mean; equality counts as delivered and
            # a relative slack absorbs exp/log roundtrip dust
            return 1.0 if math.log(t_ms) >= self.mu[j, k] - 1e-12 else 0.0
        return float(ndtr((math.log(t_ms) - self.mu[j, k]) / self.sigma))

    def sample_latency(self, j: int, k: int, rng: np.random.Generator) -> float:
        z = rng.standard_normal()
        return float(math.exp(self.mu[j, k] + self.sigma * z))

    def macro_median_latency(self) -> np.ndarray:
        """7x7 matrix of median expected latency between macro-regions.

        Entry (A, B) is the median of expected latencies over ordered region
        pairs (j in A, k in B); the diagonal includes intra-region entries.
        Macro-regions with no regions yield NaN rows and columns.
        """
        out = np.full((len(Macro), len(Macro)), np.nan)
        groups = {macro: [r.id for r in self.regions if r.macro == macro] for macro in Macro}
        for a, ids_a in groups.items():
            for b, ids_b in groups.items():
                if ids_a and ids_b:
                    block = self.expected[np.ix_(ids_a, ids_b)]
                    out[int(a), int(b)] = float(np.median(block))
        return out

    def macro_row_averages(self) -> np.ndarray:
        """Average of each macro row's medians to the other macro-regions."""
        med = self.macro_median_latency()
        out = np.full(len(Macro), np.nan)
        for a in Macro:
            row = np.delete(med[int(a)], int(a))
            if not np.all(np.isnan(row)):
                out[int(a)] = float(np.nanmean(row))
        return out


def load_latency_dataset(
    source: str | os.PathLike | io.TextIOBase,
    sigma: float,
    intra_default_ms: float = 2.0,
    region_macros: Mapping[str, Macro] | None = None,
) -> tuple[RegionTable, LatencyModel]:
    """Build a latency model from a CSV of empirical mean latencies.

    The CSV must have a header row source,destination,mean_rtt_ms and one row
    per ordered region pair. Regions are numbered in first-appearance order.
    Every ordered inter-region pair must be present; intra-region entries may
    be omitted and default to intra_default_ms. Values are used as given and
    need not be symmetric.
    """
    macros = GCP_MACROS if region_macros is None else region_macros
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="") as fh:
            rows = list(csv.DictReader(fh))
    else:
        rows = list(csv.DictReader(source))

    names: list[str] = []
    seen: set[str] = set()
    entries: dict[tuple[str, str], float] = {}
    for row in rows:
        src, dst = row["source"].strip(), row["destination"].strip()
        mean = float(row["mean_rtt_ms"])
        if mean <= 0.0:
            raise NonPositiveLatency(f"nonpositive mean {mean} for ({src}, {dst})")
        if (src, dst) in entries:
            raise DuplicatePair(f"pair ({src}, {dst}) listed twice")
        entries[(src, dst)] = mean
        for name in (src, dst):
            if name not in seen:
                seen.add(name)
                names.append(name)

    table = RegionTable.from_names(names, macros)
    m = len(table)
    means = np.empty((m, m))
    for j, rj in enumerate(table):
        for k, rk in enumerate(table):
            if j == k:
                means[j, k] = entries.get((rj.name, rk.name), intra_default_ms)
            else:
                try:
                    means[j, k] = entries[(rj.name, rk.name)]
                except KeyError:
                    raise MissingPair(f"no latency entry for ({rj.name}, {rk.name})") from None
    return table, LatencyModel.from_means(table, means, sigma)


def bundled_dataset_path() -> str:
    """Path of the packaged inter-region latency snapshot."""
    return str(resources.files("geosim.data").joinpath("gcp_latency.csv"))


def load_region_macros_csv(path: str) -> dict[str, Macro]:
    """Read a name,macro override table for non-default region sets."""
    out: dict[str, Macro] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            label = row["macro"].strip()
            if label not in MACRO_BY_LABEL:
                raise UnknownRegion(f"unknown macro-region label {label!r}")
            out[row["name"].strip()] = MACRO_BY_LABEL[label]
    return out
