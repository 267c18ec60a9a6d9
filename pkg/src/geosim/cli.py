"""Command line front end: run scenarios, expand presets, export results."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from .engine import (
    LatencyConfig,
    ScenarioConfig,
    SimulationResult,
    SourceSpec,
    build_topology,
    run_scenario,
)
from .presets import PRESET_NAMES, expand_preset
from .strategy import MSP, SSP, ConsensusParams
from .topology import Macro

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


def _fraction(value) -> float:
    """Accept plain numbers or 'p/q' strings for ratios in config files."""
    if isinstance(value, str):
        parts = value.split("/")
        if len(parts) == 2:
            return float(parts[0]) / float(parts[1])
        return float(value)
    return float(value)


def _parse_placement(raw):
    if raw is None or raw == "homogeneous":
        return "homogeneous"
    if isinstance(raw, dict):
        return tuple((str(k), float(v)) for k, v in raw.items())
    raise ConfigError("placement must be 'homogeneous' or a name->share mapping")


def _parse_sources(raw):
    if raw is None or raw == "homogeneous":
        return "homogeneous"
    if not isinstance(raw, list):
        raise ConfigError("sources must be 'homogeneous' or a list")
    out = []
    for item in raw:
        if isinstance(item, str):
            out.append(SourceSpec(item))
        elif isinstance(item, dict):
            if "region" not in item:
                raise ConfigError(f"source entry missing 'region': {item!r}")
            out.append(
                SourceSpec(
                    str(item["region"]),
                    None if item.get("a") is None else float(item["a"]),
                    None if item.get("b") is None else float(item["b"]),
                )
            )
        else:
            raise ConfigError(f"source entry must be a name or mapping: {item!r}")
    return tuple(out)


def parse_config(path: str | Path) -> ScenarioConfig:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    known = {
        "paradigm", "seed", "slots", "validators", "placement", "sources",
        "migration_cost", "committee_size", "canonical_mode", "ssp_cdf",
        "mc_samples", "metrics_granularity", "consensus", "latency", "label",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    if "paradigm" not in raw:
        raise ConfigError(f"{path}: 'paradigm' is required (msp or ssp)")

    cons_raw = raw.get("consensus") or {}
    defaults = ConsensusParams()
    consensus = ConsensusParams(
        slot_duration_s=float(cons_raw.get("slot_duration_s", defaults.slot_duration_s)),
        cutoff_s=float(cons_raw.get("cutoff_s", defaults.cutoff_s)),
        threshold=_fraction(cons_raw.get("threshold", defaults.threshold)),
        risk_tolerance=float(cons_raw.get("risk_tolerance", defaults.risk_tolerance)),
        time_step_s=float(cons_raw.get("time_step_s", defaults.time_step_s)),
    )
    lat_raw = raw.get("latency") or {}
    lat_defaults = LatencyConfig()
    latency = LatencyConfig(
        dataset=lat_raw.get("dataset"),
        sigma=float(lat_raw.get("sigma", lat_defaults.sigma)),
        intra_region_default_ms=float(
            lat_raw.get("intra_region_default_ms", lat_defaults.intra_region_default_ms)
        ),
        region_macros=lat_raw.get("region_macros"),
    )
    try:
        return ScenarioConfig(
            paradigm=str(raw["paradigm"]),
            seed=int(raw.get("seed", 0)),
            slots=int(raw.get("slots", 10_000)),
            validator_count=int(raw.get("validators", 1_000)),
            placement=_parse_placement(raw.get("placement")),
            sources=_parse_sources(raw.get("sources")),
            migration_cost=float(raw.get("migration_cost", 0.002)),
            consensus=consensus,
            committee_size=(
                None if raw.get("committee_size") is None else int(raw["committee_size"])
            ),
            canonical_mode=str(raw.get("canonical_mode", "exact")),
            ssp_cdf=str(raw.get("ssp_cdf", "fw")),
            mc_samples=int(raw.get("mc_samples", 100_000)),
            metrics_granularity=str(raw.get("metrics_granularity", "gcp")),
            latency=latency,
            label=str(raw.get("label", Path(path).stem)),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _apply_overrides(config: ScenarioConfig, args) -> ScenarioConfig:
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.validators is not None:
        changes["validator_count"] = args.validators
    if args.slots is not None:
        changes["slots"] = args.slots
    if getattr(args, "cost", None) is not None:
        changes["migration_cost"] = args.cost
    if args.canonical_mode is not None:
        changes["canonical_mode"] = args.canonical_mode
    return dataclasses.replace(config, **changes) if changes else config


def config_dict(config: ScenarioConfig) -> dict:
    d = dataclasses.asdict(config)
    if isinstance(config.placement, tuple):
        d["placement"] = [list(x) for x in config.placement]
    if isinstance(config.sources, tuple):
        d["sources"] = [dataclasses.asdict(s) for s in config.sources]
    return d


def export_results(result: SimulationResult, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = result.table.names()

    with open(out / "metrics.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot", "gini", "hhi", "cv", "lc"])
        for s in result.metrics:
            w.writerow([s.slot, s.gini, s.hhi, "" if s.cv is None else s.cv, s.lc])

    with open(out / "slots.jsonl", "w") as fh:
        for o in result.outcomes:
            fh.write(
                json.dumps(
                    {
                        "slot": o.slot,
                        "proposer": o.proposer,
                        "origin": names[o.origin],
                        "moved": o.moved,
                        "destination": names[o.destination],
                        "marginal_benefit": o.marginal_benefit,
                        "recorded_benefit": o.recorded_benefit,
                        "tau_star": o.tau_star,
                        "canonical_prob": o.canonical_prob,
                        "payoff": o.payoff,
                        "relay": o.relay,
                    }
                )
                + "\n"
            )

    with open(out / "population_final.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["validator", "region"])
        for i, r in enumerate(result.final_regions):
            w.writerow([i, names[int(r)]])

    with open(out / "region_histogram.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot"] + [mac.label for mac in Macro])
        for slot, row in enumerate(result.macro_histogram):
            w.writerow([slot] + [int(x) for x in row])

    with open(out / "marginal_benefit.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot", "recorded_benefit"])
        for o in result.outcomes:
            w.writerow([o.slot, o.recorded_benefit])

    terminal = result.metrics[-1] if result.metrics else None
    summary = {
        "config": config_dict(result.config),
        "slots_run": len(result.outcomes),
        "moves": result.move_count(),
        "terminal_metrics": None
        if terminal is None
        else {
            "gini": terminal.gini,
            "hhi": terminal.hhi,
            "cv": terminal.cv,
            "lc": terminal.lc,
        },
        "wall_time_s": result.wall_time_s,
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return out


def _run_and_export(config: ScenarioConfig, out_dir: Path) -> tuple[str, Path, float]:
    result = run_scenario(config)
    target = export_results(result, out_dir)
    return config.label, target, result.wall_time_s


def _worker_count(n_jobs: int) -> int:
    raw = os.environ.get("GEOSIM_WORKERS", "1")
    try:
        workers = int(raw)
    except ValueError:
        workers = 1
    return max(1, min(workers, n_jobs))


def _run_many(configs: list[ScenarioConfig], out_root: Path) -> int:
    jobs = [(cfg, out_root / cfg.label) for cfg in configs]
    workers = _worker_count(len(jobs))
    if workers == 1 or len(jobs) == 1:
        results = [_run_and_export(cfg, target) for cfg, target in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_and_export, cfg, target) for cfg, target in jobs]
            results = [f.result() for f in futures]
    for label, target, wall in results:
        print(f"{label}: wrote {target} ({wall:.1f}s)")
    return 0


def _cmd_run(args) -> int:
    config = _apply_overrides(parse_config(args.config), args)
    if args.label:
        config = dataclasses.replace(config, label=args.label)
    out_root = Path(args.out) if args.out else Path("results")
    return _run_many([config], out_root)


def _cmd_preset(args) -> int:
    configs = expand_preset(
        args.name,
        args.paradigm,
        seed=args.seed if args.seed is not None else 0,
        validators=args.validators if args.validators is not None else 1_000,
        slots=args.slots if args.slots is not None else 10_000,
        cost=args.cost,
        canonical_mode=args.canonical_mode if args.canonical_mode else "exact",
    )
    configs = [
        dataclasses.replace(cfg, label=f"{cfg.label}_{cfg.paradigm}") for cfg in configs
    ]
    out_root = Path(args.out) if args.out else Path("results")
    return _run_many(configs, out_root)


def _cmd_validate(args) -> int:
    config = parse_config(args.config)
    build_topology(config)  # surfaces dataset problems too
    print(f"{args.config}: OK ({config.paradigm}, {config.validator_count} validators, "
          f"{config.slots} slots)")
    return 0


def _cmd_latency_heatmap(args) -> int:
    from .topology import bundled_dataset_path, load_latency_dataset, load_region_macros_csv

    path = args.dataset or bundled_dataset_path()
    macros = load_region_macros_csv(args.region_macros) if args.region_macros else None
    table, model = load_latency_dataset(path, args.sigma, region_macros=macros)
    rows = []
    if args.full:
        names = table.names()
        header = ["region"] + list(names)
        for i, name in enumerate(names):
            rows.append([name] + [f"{model.expected[i, j]:.3f}" for j in range(len(names))])
    else:
        med = model.macro_median_latency()
        labels = [mac.label for mac in Macro]
        header = ["macro"] + labels
        for i, label in enumerate(labels):
            rows.append(
                [label]
                + ["" if np.isnan(med[i, j]) else f"{med[i, j]:.3f}" for j in range(len(labels))]
            )
    lines = [",".join(header)] + [",".join(r) for r in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _add_common_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--validators", type=int, default=None)
    p.add_argument("--slots", type=int, default=None)
    p.add_argument("--cost", type=float, default=None, help="migration cost override")
    p.add_argument("--canonical-mode", choices=["exact", "lln"], default=None)
    p.add_argument("--out", default=None, help="output directory (default ./results)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geosim",
        description="Agent-based simulation of validator geography under "
        "multi-source and single-source block building.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario from a YAML config")
    p_run.add_argument("config")
    p_run.add_argument("--label", default=None)
    _add_common_overrides(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_pre = sub.add_parser("preset", help="run a named experiment preset")
    p_pre.add_argument("name", choices=PRESET_NAMES)
    p_pre.add_argument("--paradigm", choices=[MSP, SSP], required=True)
    _add_common_overrides(p_pre)
    p_pre.set_defaults(func=_cmd_preset)

    p_val = sub.add_parser("validate", help="check a config file without running it")
    p_val.add_argument("config")
    p_val.set_defaults(func=_cmd_validate)

    p_heat = sub.add_parser(
        "latency-heatmap", help="print expected-latency tables from a dataset"
    )
    p_heat.add_argument("dataset", nargs="?", default=None)
    p_heat.add_argument("--sigma", type=float, default=0.5)
    p_heat.add_argument("--full", action="store_true", help="all region pairs")
    p_heat.add_argument(
        "--region-macros", default=None, help="name,macro CSV for non-default region sets"
    )
    p_heat.add_argument("--out", default=None)
    p_heat.set_defaults(func=_cmd_latency_heatmap)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
