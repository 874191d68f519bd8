"""End-to-end slot loop: schedule, build channels, beamform, set power, score."""
import csv
import json
import math
import os
import time
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .arrays import Topology, build_channel_set, channel_set_to_json, place_ues
from .errors import Fr3ShareError, InfeasibleLink, SlotFailure
from .metrics import SlotRecord, pool_summaries, rss_degradation, summarize
from .nulling import beamformed_gain, solve_nulling
from .orbits import build_constellation, ecef_positions, look_angles, propagate, write_states_csv
from .power_control import decision_at, feasible_interval, solve_power

SWEEP_DIMENSIONS = ("lambda", "epsilon", "array_size", "n_sat")


def schedule(slot, k):
    """Round-robin TDM: the UE served in ``slot``."""
    if k < 1:
        raise ValueError("K must be at least 1")
    return slot % k


def satellite_tracks(cfg):
    """(elevation, azimuth, range) arrays of shape n_sat x n_slots."""
    c = cfg.constellation
    n = cfg.n_slots
    if c.n_sat == 0:
        empty = np.zeros((0, n))
        return empty, empty.copy(), empty.copy()
    site = cfg.ground_site()
    times = cfg.start_time() + c.slot_duration * np.arange(n)
    el, az, rg = [], [], []
    for elements in build_constellation(cfg.base_elements(), c.n_sat, c.delta_inclination):
        e, a, r = look_angles(site, ecef_positions(elements, times))
        el.append(e)
        az.append(a)
        rg.append(r)
    return np.array(el), np.array(az), np.array(rg)


def satellite_states(cfg):
    c = cfg.constellation
    if c.n_sat == 0:
        return []
    site = cfg.ground_site()
    cons = build_constellation(cfg.base_elements(), c.n_sat, c.delta_inclination)
    return [propagate(e, site, cfg.n_slots, c.slot_duration, cfg.start_time(), j)
            for j, e in enumerate(cons)]


def build_topology(cfg, seed=None, tracks=None):
    """Static UE drop plus satellite tracks for one run."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    a = cfg.arrays
    ues = place_ues(cfg.k, rng, a.cell_radius, a.min_ue_distance, a.boresight_azimuth,
                    a.sector_width, a.ue_height)
    el, az, rg = satellite_tracks(cfg) if tracks is None else tracks
    return Topology(
        gnb=cfg.gnb_geometry(),
        ue=cfg.ue_geometry(),
        gnb_height=cfg.site.gnb_height,
        ue_positions=ues,
        carrier=a.carrier,
        sat_elevation=el,
        sat_azimuth=az,
        sat_range=rg,
        elevation_mask=cfg.constellation.elevation_mask,
        satellite_gain_db=a.satellite_gain_dbi if a.apply_satellite_gain else 0.0,
    )


@dataclass
class SlotOutcome:
    record: SlotRecord
    pair: object
    reference: object
    channels: object
    decision: object = None


def run_slot(cfg, topo, slot, ctx=None):
    """Solve one slot. Module errors surface as SlotFailure."""
    ctx = ctx or cfg.power_context()
    ue = schedule(slot, cfg.k)
    try:
        cs = build_channel_set(topo, slot, ue_ids=[ue])
        H, Hn = cs.H_ter[0], cs.H_ter_normalized[0]
        sats_n = cs.h_sat_normalized

        ref = solve_nulling(Hn, sats_n, 0.0, method=cfg.solver)
        if cfg.mode == "power_control_only" or cfg.lam == 0.0:
            pair = ref
        else:
            pair = solve_nulling(Hn, sats_n, cfg.lam, method=cfg.solver)
        gain = beamformed_gain(pair, H)

        infeasible = False
        if cfg.mode == "nulling_only":
            dec = decision_at(ctx.p_max_dbm, gain, pair.w_t, cs.h_sat, ctx, "p_max")
        else:
            try:
                dec = solve_power(gain, pair.w_t, cs.h_sat, ctx)
            except InfeasibleLink:
                if cfg.power.infeasible_policy == "error":
                    raise
                # honour the INR cap first, even below P_min
                _, _, p_rate, p_inr = feasible_interval(gain, pair.w_t, cs.h_sat, ctx)
                p = min(p_inr, ctx.p_max_dbm)
                dec = decision_at(p, gain, pair.w_t, cs.h_sat, ctx, "inr_cap", p_rate, p_inr, True)
                infeasible = True

        drss, clamped = rss_degradation(ctx.p_max_dbm, ref.w_t, dec.p_opt, pair.w_t, ref.w_r, H)
    except Fr3ShareError as exc:
        raise SlotFailure(slot, exc) from exc
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        raise SlotFailure(slot, exc) from exc

    rec = SlotRecord(
        slot=slot,
        ue_id=ue,
        lam=0.0 if cfg.mode == "power_control_only" else float(cfg.lam),
        p_selected=float(dec.p_opt),
        beamformed_gain=float(gain),
        rss_degradation=float(drss),
        inr_per_sat=[float(x) for x in dec.inr_per_satellite],
        degeneracy_flag=bool(pair.degenerate),
        infeasible_flag=infeasible,
        rss_clamped_flag=clamped,
    )
    return SlotOutcome(rec, pair, ref, cs, dec)


def run(cfg, topo=None):
    """Full run: (records, summary, manifest). Slots are processed in order."""
    t0 = time.perf_counter()
    topo = topo or build_topology(cfg)
    ctx = cfg.power_context()
    records = [run_slot(cfg, topo, s, ctx).record for s in range(cfg.n_slots)]
    summary = summarize(records, p_max_dbm=ctx.p_max_dbm)
    return records, summary, make_manifest(cfg, {}, time.perf_counter() - t0)


def run_repeats(cfg, repeats=None):
    """Runs over seeds seed, seed+1, ...; returns (per-seed results, pooled dict)."""
    n = cfg.repeats if repeats is None else repeats
    tracks = satellite_tracks(cfg)
    results = []
    for i in range(n):
        c = replace(cfg, seed=cfg.seed + i)
        results.append(run(c, build_topology(c, tracks=tracks)))
    return results, pool_summaries([r[1] for r in results])


def _parse_array_size(value):
    if isinstance(value, str):
        a, b = value.lower().split("x")
        return int(a), int(b)
    if isinstance(value, int):
        return value, value
    return int(value[0]), int(value[1])


def sweep_value(dimension, value):
    """Typed sweep value: float for lambda/epsilon, int for n_sat, 'AxB' for arrays."""
    if dimension in ("lambda", "epsilon"):
        return float(value)
    if dimension == "n_sat":
        return int(value)
    if dimension == "array_size":
        return "%dx%d" % _parse_array_size(value)
    raise ValueError(f"unknown sweep dimension {dimension!r}; expected one of {SWEEP_DIMENSIONS}")


def config_for(cfg, dimension, value):
    """Copy of cfg with one sweep dimension set to ``value``."""
    if dimension == "lambda":
        return replace(cfg, lam=float(value)).validate()
    if dimension == "epsilon":
        return replace(cfg, power=replace(cfg.power, epsilon=float(value))).validate()
    if dimension == "array_size":
        n_az, n_el = _parse_array_size(value)
        return replace(cfg, arrays=replace(cfg.arrays, gnb_n_az=n_az, gnb_n_el=n_el)).validate()
    if dimension == "n_sat":
        return replace(cfg, constellation=replace(cfg.constellation, n_sat=int(value))).validate()
    raise ValueError(f"unknown sweep dimension {dimension!r}; expected one of {SWEEP_DIMENSIONS}")


def sweep(cfg, dimension, values, repeats=1):
    """One run per value with a shared seed. Returns [(value, pooled summary dict)]."""
    if not values:
        raise ValueError("sweep needs at least one value")
    out = []
    for v in values:
        c = config_for(cfg, dimension, v)
        results, pooled = run_repeats(c, repeats)
        if repeats == 1:
            pooled = results[0][1].to_dict()
        out.append((sweep_value(dimension, v), pooled))
    return out


# writers -------------------------------------------------------------------

def _fmt(x):
    if x is None or (isinstance(x, float) and math.isinf(x)):
        return "" if x is None else ("inf" if x > 0 else "-inf")
    return f"{x:.9f}"


def _flags(r):
    names = [n for n, on in (("degenerate", r.degeneracy_flag), ("infeasible", r.infeasible_flag),
                             ("rss_clamped", r.rss_clamped_flag)) if on]
    return "|".join(names)


def write_records(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["slot", "ue_id", "lambda", "p_dbm", "gain_db", "drss_db", "inr_worst_db", "flags"])
        for r in records:
            w.writerow([r.slot, r.ue_id, _fmt(r.lam), _fmt(r.p_selected), _fmt(r.beamformed_gain),
                        _fmt(r.rss_degradation), _fmt(r.inr_worst), _flags(r)])


def _round_floats(obj, digits=12):
    # fixed precision keeps JSON stable across platforms
    if isinstance(obj, float):
        return None if math.isnan(obj) else round(obj, digits)
    if isinstance(obj, dict):
        return {k: _round_floats(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v, digits) for v in obj]
    return obj


def write_json(path, data):
    with open(path, "w") as fh:
        json.dump(_round_floats(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_run(cfg, records, summary, out_dir):
    """Records CSV and summary JSON (plus optional satellite tracks) for one seed.

    Returns {kind: path relative to out_dir}.
    """
    o = cfg.output
    os.makedirs(out_dir, exist_ok=True)
    rel = {"records": o.records, "summary": o.summary}
    write_records(os.path.join(out_dir, o.records), records)
    write_json(os.path.join(out_dir, o.summary),
               {"seed": cfg.seed, "mode": cfg.mode, "lambda": cfg.lam,
                "epsilon": cfg.power.epsilon, "summary": summary.to_dict()})
    if o.satellites_csv:
        rel["satellites"] = o.satellites_csv
        write_states_csv(os.path.join(out_dir, o.satellites_csv), satellite_states(cfg))
    return rel


def write_channel_dump(path, cfg, topo):
    """One JSON object per line, one line per slot."""
    with open(path, "w") as fh:
        for slot in range(cfg.n_slots):
            fh.write(channel_set_to_json(build_channel_set(topo, slot)) + "\n")


def make_manifest(cfg, outputs, wall_clock_s):
    return {
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "version": __version__,
        "outputs": outputs,
        "wall_clock_s": wall_clock_s,
    }
