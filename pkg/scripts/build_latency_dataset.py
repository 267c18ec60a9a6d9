#!/usr/bin/env python
"""Generate the bundled inter-region latency table.

Builds a fiber-corridor graph over the 40 cloud regions: complete terrestrial
meshes inside each macro-region plus the major submarine corridors between
them (transatlantic, transpacific, Suez/Red Sea, African coastal routes,
Singapore-Sydney, Miami-Sao Paulo, the LA-Chile trunk). Edge weight is
round-trip time at ~204,000 km/s in fiber over an inflated great-circle
distance, plus a fixed per-hop routing penalty. Pairwise mean RTT is the
all-pairs shortest path through that graph.

The output is deterministic and checked against two properties the
simulations depend on: North America has the lowest macro-median row
average and South America the highest. A handful of publicly documented
cloud-to-cloud medians are printed alongside for eyeballing.

Usage: python scripts/build_latency_dataset.py [out.csv]
"""
from __future__ import annotations

import math
import sys
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from geosim.topology import GCP_MACROS, Macro, load_latency_dataset  # noqa: E402

FIBER_KM_PER_MS_RTT = 102.0  # 204,000 km/s one way => RTT ms per km
HOP_PENALTY_MS = 2.0

# Approximate datacenter metro coordinates (lat, lon).
COORDS = {
    "africa-south1": (-26.20, 28.05),          # Johannesburg
    "asia-east1": (24.05, 120.52),             # Changhua County
    "asia-east2": (22.32, 114.17),             # Hong Kong
    "asia-northeast1": (35.68, 139.69),        # Tokyo
    "asia-northeast2": (34.69, 135.50),        # Osaka
    "asia-northeast3": (37.57, 126.98),        # Seoul
    "asia-south1": (19.08, 72.88),             # Mumbai
    "asia-south2": (28.70, 77.10),             # Delhi
    "asia-southeast1": (1.35, 103.82),         # Singapore
    "asia-southeast2": (-6.21, 106.85),        # Jakarta
    "australia-southeast1": (-33.87, 151.21),  # Sydney
    "australia-southeast2": (-37.81, 144.96),  # Melbourne
    "europe-central2": (52.23, 21.01),         # Warsaw
    "europe-north1": (60.57, 27.19),           # Hamina
    "europe-north2": (59.33, 18.07),           # Stockholm
    "europe-southwest1": (40.42, -3.70),       # Madrid
    "europe-west1": (50.45, 3.82),             # St. Ghislain
    "europe-west2": (51.51, -0.13),            # London
    "europe-west3": (50.11, 8.68),             # Frankfurt
    "europe-west4": (53.44, 6.83),             # Eemshaven
    "europe-west6": (47.38, 8.54),             # Zurich
    "europe-west8": (45.46, 9.19),             # Milan
    "europe-west9": (48.86, 2.35),             # Paris
    "europe-west10": (52.52, 13.40),           # Berlin
    "europe-west12": (45.07, 7.69),            # Turin
    "me-central1": (25.29, 51.53),             # Doha
    "me-west1": (32.08, 34.78),                # Tel Aviv
    "northamerica-northeast1": (45.50, -73.57),  # Montreal
    "northamerica-northeast2": (43.65, -79.38),  # Toronto
    "southamerica-east1": (-23.55, -46.63),    # Sao Paulo
    "southamerica-west1": (-33.45, -70.67),    # Santiago
    "us-central1": (41.26, -95.86),            # Council Bluffs
    "us-east1": (33.20, -80.01),               # Moncks Corner
    "us-east4": (39.04, -77.49),               # Ashburn
    "us-east5": (39.96, -83.00),               # Columbus
    "us-south1": (32.78, -96.80),              # Dallas
    "us-west1": (45.59, -121.18),              # The Dalles
    "us-west2": (34.05, -118.24),              # Los Angeles
    "us-west3": (40.76, -111.89),              # Salt Lake City
    "us-west4": (36.17, -115.14),              # Las Vegas
}

# Terrestrial mesh inflation per macro-region: South American backbones
# detour around the Andes. The Middle East pair has no direct fiber (traffic
# hairpins through Europe), so no intra mesh there. Asia is not one mesh
# either: South, Southeast and Northeast Asia are distinct cable clusters
# joined through Singapore, so the mesh applies within clusters only.
INTRA_INFLATION = {
    Macro.AFRICA: 1.25,
    Macro.ASIA: 1.45,
    Macro.OCEANIA: 1.25,
    Macro.EUROPE: 1.25,
    Macro.MIDDLE_EAST: None,
    Macro.SOUTH_AMERICA: 1.35,
    Macro.NORTH_AMERICA: 1.15,
}

ASIA_CLUSTERS = [
    ("asia-south1", "asia-south2"),
    ("asia-southeast1", "asia-southeast2"),
    ("asia-east1", "asia-east2", "asia-northeast1", "asia-northeast2", "asia-northeast3"),
]

# Submarine / long-haul corridors: (endpoint, endpoint, route inflation).
CORRIDORS = [
    # transatlantic
    ("us-east4", "europe-west2", 1.15),
    ("us-east4", "europe-west1", 1.2),
    ("us-east1", "europe-west2", 1.25),
    ("northamerica-northeast1", "europe-west9", 1.45),
    # transpacific
    ("us-west1", "asia-northeast1", 1.15),
    ("us-west2", "asia-northeast1", 1.2),
    ("us-west1", "asia-east1", 1.2),
    ("us-west2", "australia-southeast1", 1.15),
    # trunks between the Asian cable clusters
    ("asia-south1", "asia-southeast1", 1.25),
    ("asia-southeast1", "asia-east2", 1.3),
    ("asia-southeast1", "asia-northeast1", 1.3),
    # Europe to Asia via Suez and the Red Sea; Gulf traffic hairpins through
    # Marseille, so effective inflation on those corridors exceeds 2x
    ("europe-west9", "asia-south1", 1.6),
    ("europe-west8", "me-west1", 2.25),
    ("europe-west8", "me-central1", 2.1),
    ("me-central1", "asia-south1", 1.45),
    ("me-west1", "asia-south1", 1.5),
    # African coastal systems; the east-coast route loops along the seaboard
    ("europe-southwest1", "africa-south1", 1.7),
    ("me-central1", "africa-south1", 2.0),
    # Asia to Oceania
    ("asia-southeast1", "australia-southeast1", 1.45),
    ("asia-southeast2", "australia-southeast1", 1.5),
    # Americas north-south
    ("us-east1", "southamerica-east1", 1.45),
    ("us-west2", "southamerica-west1", 1.15),
]

# Published cloud-to-cloud medians (ms) for eyeballing the calibration.
LANDMARKS = [
    ("us-east4", "europe-west1", 78.0),
    ("us-east4", "asia-northeast1", 157.0),
    ("us-west1", "asia-northeast1", 88.0),
    ("europe-west1", "asia-south1", 110.0),
    ("asia-southeast1", "australia-southeast1", 92.0),
    ("us-east1", "southamerica-east1", 106.0),
    ("africa-south1", "europe-west1", 152.0),
    ("europe-west1", "asia-northeast1", 222.0),
]


def haversine_km(a: tuple[float, float], b: tuple[float, float]) -> float:
    lat1, lon1, lat2, lon2 = map(math.radians, (*a, *b))
    dlat, dlon = lat2 - lat1, lon2 - lon1
    h = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    return 2 * 6371.0 * math.asin(math.sqrt(h))


def edge_rtt_ms(u: str, v: str, inflation: float) -> float:
    return haversine_km(COORDS[u], COORDS[v]) * inflation / FIBER_KM_PER_MS_RTT + HOP_PENALTY_MS


def build_matrix(names: list[str]) -> np.ndarray:
    idx = {n: i for i, n in enumerate(names)}
    n = len(names)
    weights = np.full((n, n), np.inf)
    by_macro: dict[Macro, list[str]] = {}
    for name in names:
        by_macro.setdefault(GCP_MACROS[name], []).append(name)
    for macro, members in by_macro.items():
        infl = INTRA_INFLATION[macro]
        if infl is None:
            continue
        groups = ASIA_CLUSTERS if macro == Macro.ASIA else [tuple(members)]
        for group in groups:
            for i, u in enumerate(group):
                for v in group[i + 1 :]:
                    w = edge_rtt_ms(u, v, infl)
                    weights[idx[u], idx[v]] = weights[idx[v], idx[u]] = w
    for u, v, infl in CORRIDORS:
        w = edge_rtt_ms(u, v, infl)
        weights[idx[u], idx[v]] = weights[idx[v], idx[u]] = min(weights[idx[u], idx[v]], w)
    graph = csr_matrix(np.where(np.isinf(weights), 0.0, weights))
    dist = shortest_path(graph, method="D", directed=False)
    if not np.all(np.isfinite(dist)):
        raise SystemExit("corridor graph is disconnected")
    return dist


def main() -> int:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else (
        Path(__file__).resolve().parents[1] / "src" / "geosim" / "data" / "gcp_latency.csv"
    )
    names = list(GCP_MACROS)
    dist = build_matrix(names)

    lines = ["source,destination,mean_rtt_ms"]
    for i, src in enumerate(names):
        for j, dst in enumerate(names):
            if i != j:
                lines.append(f"{src},{dst},{dist[i, j]:.3f}")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n")
    print(f"wrote {out} ({len(lines) - 1} rows)")

    table, model = load_latency_dataset(out, 0.5)
    row_avg = model.macro_row_averages()
    order = np.argsort(row_avg)
    labels = [mac.label for mac in Macro]
    print("\nmacro-median row averages (ms):")
    for k in order:
        print(f"  {labels[k]:>14s}  {row_avg[k]:7.2f}")
    print("\nlandmark comparison (model vs published):")
    for u, v, ref in LANDMARKS:
        got = model.expected_latency(table.index(u), table.index(v))
        print(f"  {u:>16s} <-> {v:<22s} {got:7.1f} vs {ref:6.1f}")

    if labels[order[0]] != "NorthAmerica":
        raise SystemExit(f"expected NorthAmerica lowest, got {labels[order[0]]}")
    if labels[order[-1]] != "SouthAmerica":
        raise SystemExit(f"expected SouthAmerica highest, got {labels[order[-1]]}")
    print("\nordering checks passed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
