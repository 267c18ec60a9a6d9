import io

import numpy as np
import pytest

from geosim.topology import Macro, RegionTable, LatencyModel, load_latency_dataset

# Small synthetic worlds used across the unit tests. Region names are
# single letters; macros are assigned round-robin so macro logic stays
# exercised without the full bundled dataset.

TWO_REGION_CSV = """source,destination,mean_rtt_ms
a,b,100
b,a,100
"""

TWO_REGION_MACROS = {"a": Macro.EUROPE, "b": Macro.NORTH_AMERICA}


def make_world(csv_text: str, sigma: float, macros: dict) -> tuple[RegionTable, LatencyModel]:
    return load_latency_dataset(io.StringIO(csv_text), sigma, region_macros=macros)


@pytest.fixture
def two_region_world():
    return make_world(TWO_REGION_CSV, 0.5, TWO_REGION_MACROS)


@pytest.fixture
def two_region_world_det():
    """Same pair matrix with sigma 0: latencies collapse to their means."""
    return make_world(TWO_REGION_CSV, 0.0, TWO_REGION_MACROS)


def random_world(rng: np.random.Generator, n_regions: int, sigma: float = 0.5):
    """A random fully-connected world with asymmetric mean latencies."""
    names = [f"r{i}" for i in range(n_regions)]
    macros = {name: Macro(i % len(Macro)) for i, name in enumerate(names)}
    lines = ["source,destination,mean_rtt_ms"]
    for i, src in enumerate(names):
        for j, dst in enumerate(names):
            if i != j:
                lines.append(f"{src},{dst},{rng.uniform(5.0, 400.0):.4f}")
    return make_world("\n".join(lines) + "\n", sigma, macros)
