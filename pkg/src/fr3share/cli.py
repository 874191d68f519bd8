"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
import argparse
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import scenario
from .arrays import build_channel_set
from .config import ScenarioConfig, dump_config, load_config, override
from .errors import ConfigError, Fr3ShareError, SlotFailure
from .nulling import array_gain_db, beamformed_gain, gain_map, solve_nulling, write_gain_map
from .power_control import utility_curve, write_utility_curves

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

SWEEP_DEFAULTS = {
    "lambda": ["0", "0.1", "1", "10"],
    "array_size": ["4x4", "8x8", "16x16", "32x32"],
    "n_sat": ["2", "10", "40"],
    "epsilon": ["0.85", "0.9", "0.95", "0.98"],
}


def _common(p):
    p.add_argument("-c", "--config", help="YAML scenario file (defaults built in)")
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=["nulling_only", "power_control_only", "joint"])
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--repeats", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config field, e.g. arrays.gnb_n_az=16")


def build_parser():
    parser = argparse.ArgumentParser(prog="fr3share", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario over one or more seeds")
    _common(p)
    p.add_argument("--dump-channels", action="store_true",
                   help="also write per-slot channels as JSON lines (first seed)")

    for name, dim in (("sweep-lambda", "lambda"), ("sweep-array", "array_size"),
                      ("sweep-nsat", "n_sat"), ("sweep-epsilon", "epsilon")):
        p = sub.add_parser(name, help=f"one run per {dim} value")
        _common(p)
        p.add_argument("--values", nargs="+", default=SWEEP_DEFAULTS[dim])
        p.set_defaults(dimension=dim)

    p = sub.add_parser("gainmap", help="transmit beam pattern for one slot and UE")
    _common(p)
    p.add_argument("--slot", type=int, default=0)
    p.add_argument("--ue", type=int, help="UE index (default: scheduled UE)")
    p.add_argument("--step", type=float, default=1.0, help="grid step in degrees")

    p = sub.add_parser("utility-curve", help="utility versus power for chosen slots")
    _common(p)
    p.add_argument("--slots", type=int, nargs="+", default=[0])

    p = sub.add_parser("validate", help="check a config file without running")
    _common(p)
    p.add_argument("--print", dest="show", action="store_true", help="print the resolved config")
    return parser


def resolve_config(args):
    cfg = load_config(args.config) if args.config else ScenarioConfig().validate()
    sets = list(args.set)
    for flag, key in (("seed", "seed"), ("mode", "mode"), ("lam", "lambda"),
                      ("epsilon", "power.epsilon"), ("repeats", "repeats"),
                      ("out", "output.directory")):
        val = getattr(args, flag, None)
        if val is not None:
            sets.append(f"{key}={val}")
    return override(cfg, sets) if sets else cfg


def _stamp(cfg, outputs, t0):
    return scenario.make_manifest(cfg, outputs, time.perf_counter() - t0)


def cmd_run(cfg, args):
    t0 = time.perf_counter()
    out = cfg.output.directory
    results, pooled = scenario.run_repeats(cfg)
    outputs = {}
    for i, (records, summary, _) in enumerate(results):
        c = replace(cfg, seed=cfg.seed + i)
        sub = f"seed_{c.seed}"
        rel = scenario.write_run(c, records, summary, os.path.join(out, sub))
        outputs[sub] = {k: os.path.join(sub, v) for k, v in rel.items()}
    scenario.write_json(os.path.join(out, "pooled_summary.json"), pooled)
    outputs["pooled"] = "pooled_summary.json"
    if args.dump_channels or cfg.output.channel_dump:
        name = cfg.output.channel_dump or "channels.jsonl"
        scenario.write_channel_dump(os.path.join(out, name), cfg, scenario.build_topology(cfg))
        outputs["channels"] = name
    scenario.write_json(os.path.join(out, cfg.output.manifest), _stamp(cfg, outputs, t0))
    print(f"seeds {cfg.seed}..{cfg.seed + cfg.repeats - 1}  "
          f"power decrease {pooled['power_decrease']:.2f}%  jfi {pooled['jfi']:.3f}  "
          f"worst dRSS {pooled['worst_case_rss']:.2f} dB  -> {out}")


def cmd_sweep(cfg, args):
    t0 = time.perf_counter()
    out = cfg.output.directory
    os.makedirs(out, exist_ok=True)
    rows = scenario.sweep(cfg, args.dimension, args.values, repeats=cfg.repeats)
    name = f"sweep_{args.dimension}.json"
    scenario.write_json(os.path.join(out, name),
                        {"dimension": args.dimension, "repeats": cfg.repeats,
                         "results": [{"value": v, "summary": s} for v, s in rows]})
    scenario.write_json(os.path.join(out, cfg.output.manifest), _stamp(cfg, {"sweep": name}, t0))
    for v, s in rows:
        print(f"{args.dimension}={v}: worst dRSS {s['worst_case_rss']:.3f} dB  jfi {s['jfi']:.3f}  "
              f"power decrease {s['power_decrease']:.2f}%")


def cmd_gainmap(cfg, args):
    t0 = time.perf_counter()
    topo = scenario.build_topology(cfg)
    if not 0 <= args.slot < cfg.n_slots:
        raise ConfigError(f"slot must lie in [0, {cfg.n_slots})")
    ue = scenario.schedule(args.slot, cfg.k) if args.ue is None else args.ue
    if not 0 <= ue < cfg.k:
        raise ConfigError(f"ue must lie in [0, {cfg.k})")
    try:
        cs = build_channel_set(topo, args.slot, ue_ids=[ue])
        pair = solve_nulling(cs.H_ter_normalized[0], cs.h_sat_normalized, cfg.lam, method=cfg.solver)
    except Fr3ShareError as exc:
        raise SlotFailure(args.slot, exc) from exc
    els = np.arange(-90.0, 90.0 + 1e-9, args.step)
    azs = np.arange(-90.0, 90.0 + 1e-9, args.step)
    gmap = gain_map(pair, topo.gnb, els, azs)
    ue_el, ue_az = cs.ue_local_angles[0]
    i_pk, k_pk = np.unravel_index(gmap.argmax(), gmap.shape)
    markers = {
        "slot": args.slot, "ue_id": ue, "lambda": cfg.lam,
        "ue": [ue_el, ue_az],
        "ue_gain_db": float(array_gain_db(pair.w_t, topo.gnb, ue_el, ue_az)),
        "peak": [float(els[i_pk]), float(azs[k_pk])],
        "satellites": [[el, az] for el, az in cs.sat_local_angles],
    }
    out = cfg.output.directory
    os.makedirs(out, exist_ok=True)
    name = f"gainmap_slot{args.slot}_ue{ue}.csv"
    sidecar = write_gain_map(os.path.join(out, name), els, azs, gmap, markers)
    scenario.write_json(os.path.join(out, cfg.output.manifest),
                        _stamp(cfg, {"gainmap": name, "markers": os.path.basename(sidecar)}, t0))
    print(f"UE {ue} gain {markers['ue_gain_db']:.2f} dB, {len(cs.sat_ids)} satellites -> {name}")


def cmd_utility(cfg, args):
    t0 = time.perf_counter()
    topo = scenario.build_topology(cfg)
    ctx = cfg.power_context()
    curves = {}
    for slot in args.slots:
        if not 0 <= slot < cfg.n_slots:
            raise ConfigError(f"slot must lie in [0, {cfg.n_slots})")
        lam = 0.0 if cfg.mode == "power_control_only" else cfg.lam
        ue = scenario.schedule(slot, cfg.k)
        try:
            cs = build_channel_set(topo, slot, ue_ids=[ue])
            pair = solve_nulling(cs.H_ter_normalized[0], cs.h_sat_normalized, lam, method=cfg.solver)
            gain = beamformed_gain(pair, cs.H_ter[0])
            curves[slot] = utility_curve(gain, pair.w_t, cs.h_sat, ctx)
        except Fr3ShareError as exc:
            raise SlotFailure(slot, exc) from exc
    out = cfg.output.directory
    os.makedirs(out, exist_ok=True)
    name = "utility_curves.csv"
    write_utility_curves(os.path.join(out, name), curves)
    scenario.write_json(os.path.join(out, cfg.output.manifest), _stamp(cfg, {"utility": name}, t0))
    print(f"{len(curves)} curve(s) -> {os.path.join(out, name)}")


def cmd_validate(cfg, args):
    print(f"ok  config_hash={cfg.config_hash()}")
    if args.show:
        print(dump_config(cfg), end="")


COMMANDS = {"run": cmd_run, "gainmap": cmd_gainmap, "utility-curve": cmd_utility,
            "validate": cmd_validate}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    handler = cmd_sweep if args.command.startswith("sweep-") else COMMANDS[args.command]
    try:
        handler(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SlotFailure as exc:
        print(f"numerical failure at slot {exc.slot}: {exc.cause}", file=sys.stderr)
        return EXIT_NUMERIC
    except (Fr3ShareError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
