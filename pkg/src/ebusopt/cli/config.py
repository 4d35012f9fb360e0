"""Run configuration: one TOML file, optionally overridden by command-line flags."""
from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..ils import IlsConfig
from ..ingest import SyntheticSpec
from ..model import CostParams, PricingSchedule

REPORTS = ("cost_breakdown", "charging_events", "station_power", "energy_trace",
           "activity_summary", "convergence")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    source: str  # synthetic | gtfs | instance
    synthetic: SyntheticSpec | None = None
    gtfs_dir: Path | None = None
    instance_path: Path | None = None
    n_depots: int = 5
    speed_kmh: float = 30.0
    detour_factor: float = 1.3
    distance_override: Path | None = None
    params: CostParams = field(default_factory=CostParams)
    ils: IlsConfig = field(default_factory=IlsConfig)
    out_dir: Path = Path("out")
    reports: tuple[str, ...] = REPORTS


def _fields(cls) -> set[str]:
    return {f.name for f in dataclasses.fields(cls)}


def _pick(cls, table: dict, section: str) -> dict:
    unknown = set(table) - _fields(cls)
    if unknown:
        raise ConfigError(f"[{section}] unknown keys: {sorted(unknown)}")
    return dict(table)


def _pricing(table: dict) -> PricingSchedule:
    periods = table.get("periods")
    if not isinstance(periods, list) or not periods:
        raise ConfigError("[pricing] needs periods = [[start_min, end_min, price], ...]")
    try:
        return PricingSchedule(tuple((int(a), int(b), float(p)) for a, b, p in periods))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[pricing] {exc}") from exc


def _synthetic(table: dict) -> SyntheticSpec:
    data = _pick(SyntheticSpec, table, "input.synthetic")
    for key in ("service_span", "trip_duration"):
        if key in data:
            data[key] = tuple(int(v) for v in data[key])
    try:
        return SyntheticSpec(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[input.synthetic] {exc}") from exc


def config_from_dict(data: dict[str, Any], base_dir: Path = Path(".")) -> RunConfig:
    inp = data.get("input", {})
    sources = [k for k in ("synthetic", "gtfs", "instance") if k in inp]
    if len(sources) != 1:
        raise ConfigError("[input] needs exactly one of synthetic, gtfs, instance")
    source = sources[0]
    kw: dict[str, Any] = {"source": source}

    def path(value) -> Path:
        p = Path(value)
        return p if p.is_absolute() else base_dir / p

    if source == "synthetic":
        kw["synthetic"] = _synthetic(inp["synthetic"])
    elif source == "gtfs":
        kw["gtfs_dir"] = path(inp["gtfs"])
    else:
        kw["instance_path"] = path(inp["instance"])
    for key in ("n_depots", "speed_kmh", "detour_factor"):
        if key in inp:
            kw[key] = inp[key]
    if "distance_override" in inp:
        kw["distance_override"] = path(inp["distance_override"])

    params = _pick(CostParams, data.get("params", {}), "params")
    if "pricing" in params:
        raise ConfigError("pricing goes in its own [pricing] table")
    if "pricing" in data:
        params["pricing"] = _pricing(data["pricing"])
    try:
        kw["params"] = CostParams(**params)
        kw["ils"] = IlsConfig(**_pick(IlsConfig, data.get("ils", {}), "ils"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    out = data.get("output", {})
    if "dir" in out:
        kw["out_dir"] = path(out["dir"])
    if "reports" in out:
        bad = set(out["reports"]) - set(REPORTS)
        if bad:
            raise ConfigError(f"[output] unknown reports: {sorted(bad)}")
        kw["reports"] = tuple(r for r in REPORTS if r in out["reports"])
    return RunConfig(**kw)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data, path.parent)


def with_overrides(cfg: RunConfig, mode: str | None = None, seed: int | None = None,
                   out: str | None = None, hybrid_k: int | None = None, zeta: int | None = None,
                   parallel: bool | None = None) -> RunConfig:
    ils = cfg.ils
    changes: dict[str, Any] = {}
    if mode is not None:
        changes["mode"] = mode
    if seed is not None:
        changes["seed"] = seed
    if hybrid_k is not None:
        changes["hybrid_k"] = hybrid_k
    if zeta is not None:
        changes["zeta"] = zeta
    if parallel is not None:
        changes["parallel"] = parallel
    try:
        ils = dataclasses.replace(ils, **changes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    top: dict[str, Any] = {"ils": ils}
    if seed is not None and cfg.synthetic is not None:
        top["synthetic"] = dataclasses.replace(cfg.synthetic, seed=seed)
    if out is not None:
        top["out_dir"] = Path(out)
    return dataclasses.replace(cfg, **top)
