"""ebusopt command line: run, compare, validate, export-lp, gen."""
from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from pathlib import Path

from ..csp import (CAG, CEE, SizeGuardError, build_cee_model, build_joint_milp, build_split_model,
                   build_uniform_model, charge_free, collapse, extract_opportunities)
from ..ils import FleetResult, Search, UnservableTripError, concurrent_scheduler, final_schedule, \
    optimize_ebus_fleet
from ..ingest import (GtfsError, IngestError, SyntheticSpec, build_instance, generate_synthetic, load_instance,
                      parse_gtfs, read_distance_override, save_instance, unserviceable_trips)
from ..model import Instance, ModelError, to_dollars
from ..solver import write_lp
from .config import ConfigError, RunConfig, load_config, with_overrides
from .reports import cost_components, dump_json, r6, read_rotations, write_reports
from .validate import validate_dir


def load_instance_for(cfg: RunConfig) -> Instance:
    if cfg.source == "synthetic":
        return generate_synthetic(cfg.synthetic, cfg.params)
    if cfg.source == "instance":
        return load_instance(cfg.instance_path)
    bundle = parse_gtfs(cfg.gtfs_dir, cfg.params.consumption_rate)
    for w in bundle.warnings:
        print(f"warning: {w}", file=sys.stderr)
    override = read_distance_override(cfg.distance_override) if cfg.distance_override else None
    return build_instance(bundle.timetable, bundle.coordinates(), n_depots=cfg.n_depots, speed_kmh=cfg.speed_kmh,
                          detour_factor=cfg.detour_factor, params=cfg.params, override=override,
                          name=cfg.gtfs_dir.name)


def _check_serviceable(instance: Instance, cfg: RunConfig) -> None:
    bad = unserviceable_trips(instance, cfg.params)
    if bad:
        t = instance.trips[bad[0]]
        raise UnservableTripError(t.id, t.label)


def solve(instance: Instance, cfg: RunConfig) -> FleetResult:
    _check_serviceable(instance, cfg)
    return optimize_ebus_fleet(instance, cfg.params, cfg.ils)


def cmd_run(cfg: RunConfig) -> int:
    instance = load_instance_for(cfg)
    res = solve(instance, cfg)
    st = res.state
    extra = {"search_objective_milli": int(res.search_objective), "kept_initial": res.kept_initial,
             "schedule_status": res.schedule.status}
    files = write_reports(cfg.out_dir, instance, cfg.params, cfg.ils.mode, list(st.rotations), st.open_stations,
                          res.schedule, res.log, res.total, extra, cfg.reports)
    print(f"{cfg.ils.mode}: {len(st.rotations)} buses, {len(st.open_stations)} stations, "
          f"total ${to_dollars(res.total):,.2f}")
    print(f"wrote {len(files)} files to {cfg.out_dir}")
    return 0


COMPONENTS = ("bus_acquisition", "facility_opening", "deadhead", "csp")


def _pct(ref: int, value: int) -> float:
    return r6(100.0 * (ref - value) / ref) if ref else 0.0


def cmd_compare(cfg: RunConfig) -> int:
    instance = load_instance_for(cfg)
    _check_serviceable(instance, cfg)
    rows: dict[str, dict] = {}
    t0 = time.perf_counter()
    search = Search(instance, cfg.params, dataclasses.replace(cfg.ils, mode="sequential", parallel=False))
    cs = concurrent_scheduler(instance, cfg.params, search.config)
    cs_sched = final_schedule(search, cs.rotations, cs.open_stations)
    rows["CS"] = {"components": cost_components(cs.rotations, cs.open_stations, cs_sched, instance, cfg.params),
                  "runtime_s": time.perf_counter() - t0}
    for mode in ("sequential", "joint"):
        t0 = time.perf_counter()
        res = optimize_ebus_fleet(instance, cfg.params, dataclasses.replace(cfg.ils, mode=mode))
        comp = cost_components(res.state.rotations, res.state.open_stations, res.schedule, instance, cfg.params)
        rows[mode.capitalize()] = {"components": comp, "runtime_s": time.perf_counter() - t0}
    for row in rows.values():
        row["total"] = sum(row["components"].values())

    def savings(ref: str) -> dict:
        base = rows[ref]
        out = {}
        for name, row in rows.items():
            if name == ref:
                continue
            out[name] = {"overall": _pct(base["total"], row["total"]),
                         **{c: _pct(base["components"][c], row["components"][c]) for c in COMPONENTS},
                         "runtime_s": r6(row["runtime_s"])}
        return out

    report = {
        "instance": instance.name,
        "costs_usd": {name: {"total": r6(to_dollars(row["total"])),
                             **{c: r6(to_dollars(v)) for c, v in row["components"].items()}}
                      for name, row in rows.items()},
        "savings_vs_cs_pct": savings("CS"),
        "savings_vs_sequential_pct": {"Joint": savings("Sequential")["Joint"]},
    }
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    dump_json(report, cfg.out_dir / "compare.json")
    head = f"{'% savings':<22}{'Overall':>10}{'Bus':>10}{'Facility':>10}{'Deadhead':>10}{'CSP':>10}{'Runtime s':>11}"
    print(head)
    for title, table in (("vs CS", report["savings_vs_cs_pct"]),
                         ("vs Sequential", report["savings_vs_sequential_pct"])):
        for name, s in table.items():
            print(f"{name + ' ' + title:<22}{s['overall']:>10.2f}{s['bus_acquisition']:>10.2f}"
                  f"{s['facility_opening']:>10.2f}{s['deadhead']:>10.2f}{s['csp']:>10.2f}{s['runtime_s']:>11.2f}")
    return 0


def cmd_validate(path: str) -> int:
    issues = validate_dir(path)
    for msg in issues:
        print(f"violation: {msg}")
    if issues:
        return 1
    print(f"{path}: all invariants hold")
    return 0


def cmd_export_lp(cfg: RunConfig, model: str, out: str, solution: str | None) -> int:
    instance = load_instance_for(cfg)
    if model == "joint":
        lp = build_joint_milp(instance, cfg.params).model
    else:
        if solution:
            import json
            rotations = read_rotations(Path(solution) / "rotations.csv")
            stations = frozenset(json.loads((Path(solution) / "solution.json").read_text())["open_stations"])
        else:
            _check_serviceable(instance, cfg)
            cs = concurrent_scheduler(instance, cfg.params, cfg.ils)
            rotations, stations = list(cs.rotations), cs.open_stations
        buses = extract_opportunities(rotations, stations, instance, CEE)
        buses = [b for b in buses if not charge_free(b, cfg.params.l_max, cfg.params.l_min)]
        if model == "cee":
            lp = build_cee_model(buses, cfg.params).m
        elif model == "split":
            lp = build_split_model(collapse(buses, CAG), cfg.params).m
        else:
            lp = build_uniform_model(collapse(buses, CAG), cfg.params)[0]
    Path(out).write_text(write_lp(lp), encoding="utf-8")
    print(f"wrote {model} model ({lp.num_vars} columns, {lp.num_rows} rows) to {out}")
    return 0


def cmd_gen(args) -> int:
    spec = SyntheticSpec(seed=args.seed, n_trips=args.n_trips, n_terminals=args.n_terminals,
                         n_depots=args.n_depots)
    inst = generate_synthetic(spec)
    save_instance(inst, args.out)
    print(f"wrote {inst.n_trips} trips, {inst.n_depots} depots to {args.out}")
    return 0


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ebusopt", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def tuning(sp):
        sp.add_argument("config", help="TOML run configuration")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--hybrid-k", type=int)
        sp.add_argument("--zeta", type=int)
        sp.add_argument("--parallel", action="store_true", default=None,
                        help="evaluate candidate moves on a thread pool (EBUSOPT_THREADS caps it)")

    run = sub.add_parser("run", help="optimize one instance and write the reports")
    tuning(run)
    run.add_argument("--mode", choices=("sequential", "joint"))
    cmp_ = sub.add_parser("compare", help="CS vs Sequential vs Joint savings table")
    tuning(cmp_)
    val = sub.add_parser("validate", help="re-check every invariant of a run directory")
    val.add_argument("directory")
    exp = sub.add_parser("export-lp", help="write a CSP or joint model in LP format")
    tuning(exp)
    exp.add_argument("--model", choices=("cee", "split", "uniform", "joint"), default="cee")
    exp.add_argument("--solution", help="run directory whose rotations to use (default: CS solution)")
    exp.add_argument("--lp", default="model.lp", help="LP file to write")
    gen = sub.add_parser("gen", help="write a synthetic instance")
    gen.add_argument("--seed", type=int, default=1)
    gen.add_argument("--n-trips", type=int, default=50)
    gen.add_argument("--n-terminals", type=int, default=8)
    gen.add_argument("--n-depots", type=int, default=2)
    gen.add_argument("--out", default="instance.json")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate":
            return cmd_validate(args.directory)
        if args.command == "gen":
            return cmd_gen(args)
        cfg = with_overrides(load_config(args.config), mode=getattr(args, "mode", None), seed=args.seed,
                             out=args.out, hybrid_k=args.hybrid_k, zeta=args.zeta, parallel=args.parallel)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "compare":
            return cmd_compare(cfg)
        return cmd_export_lp(cfg, args.model, args.lp, args.solution)
    except SizeGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except UnservableTripError as exc:
        print(f"error: infeasible instance: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, IngestError, GtfsError, ModelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
