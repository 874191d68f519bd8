"""Acceptance suite: one PASS/FAIL line per criterion.

Run with pytest (lines appear in the terminal summary) or directly as a
script. Tolerances are pinned below and never loosened to make a check pass.
"""
import filecmp
import json
import math
import os
import time
from dataclasses import replace

import numpy as np
import pytest

from fr3share import cli, metrics, numerics, orbits, scenario
from fr3share.arrays import ArrayGeometry, array_response, build_channel_set, los_channel, steering_vector
from fr3share.config import ScenarioConfig, override
from fr3share.errors import InfeasibleLink
from fr3share.nulling import DEFAULT_LAMBDAS, array_gain_db, beamformed_gain, objective_terms, solve_nulling
from fr3share.power_control import PowerControlContext, feasible_interval, inr, rate, solve_power, utility

from conftest import ACCEPTANCE_LINES, crandn, unit

# pinned tolerances
ARRAY_CEILING_DB, ARRAY_CEILING_TOL = 10 * math.log10(64), 0.01
SVD_REL_TOL = 1e-9
NULL_MIN_UE_GAIN_DB, NULL_MIN_LEAK_DROP_DB = 17.4, 15.0
MONOTONE_TOL = 1e-10
POWER_GRID_STEP, POWER_TOL_DB, BOUND_TOL = 0.001, 0.02, 1e-9
JFI_TOL = 1e-12
PC_JFI_MIN, INR_CAP_DB, DRSS_TOL = 0.95, -6.0, 1e-9
DECREASE_LOOSE_MIN, DECREASE_TIGHT_MIN = 50.0, 10.0
DOF_MAX_DB = 1.0
SYMMETRY_TOL = 1e-12
ZENITH_TOL_DEG, RADIUS_REL_TOL = 1e-6, 1e-6
SEEDS = 5


def report(n, ok, detail, t0=None, limit=None):
    """Record one line; a runtime limit, when given, is part of the verdict."""
    if t0 is not None:
        dt = time.perf_counter() - t0
        detail += f"; runtime {dt:.2f} s"
        if limit is not None:
            detail += f" (limit {limit} s)"
            ok = ok and dt < limit
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def default_topology():
    cfg = ScenarioConfig().validate()
    return cfg, scenario.build_topology(cfg)


def test_criterion_01_array_ceiling():
    t0 = time.perf_counter()
    gnb = ArrayGeometry(8, 8)
    # route 1: beamformed gain over the LOS path gain, single-element receiver
    H, path_db = los_channel(gnb, ArrayGeometry(1, 1), (-7.0, 23.0), (0.0, 0.0), 60.0, 7.125e9)
    pair = solve_nulling(H / np.linalg.norm(H), [], 0.0)
    g1 = beamformed_gain(pair, H) - path_db
    # route 2: array-factor gain of the same beam toward the UE direction
    g2 = float(array_gain_db(pair.w_t, gnb, -7.0, 23.0))
    err = max(abs(g1 - ARRAY_CEILING_DB), abs(g2 - ARRAY_CEILING_DB))
    report(1, err <= ARRAY_CEILING_TOL,
           f"gain {g1:.4f} dB (channel) / {g2:.4f} dB (pattern) vs {ARRAY_CEILING_DB:.4f}, "
           f"tol {ARRAY_CEILING_TOL} dB", t0, 1)


def test_criterion_02_lambda_zero_is_svd():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for i in range(100):
        n_r, n_t = int(rng.integers(1, 5)), int(rng.choice([4, 16, 64]))
        H = crandn(rng, n_r, n_t)
        Hn = H / np.linalg.norm(H)
        sats = [unit(crandn(rng, n_t, 1)) for _ in range(int(rng.integers(0, 6)))]
        sigma1 = np.linalg.svd(Hn, compute_uv=False)[0]
        for method in ("lapack", "jacobi"):
            p = solve_nulling(Hn, sats, 0.0, method=method)
            g = abs((p.w_r.conj().T @ Hn @ p.w_t)[0, 0]) ** 2
            worst = max(worst, abs(g - sigma1**2) / sigma1**2)
    report(2, worst <= SVD_REL_TOL, f"max rel err {worst:.2e} over 100 sets x 2 backends, "
           f"tol {SVD_REL_TOL}", t0, 10)


def test_criterion_03_nulling_endpoint(default_topology):
    t0 = time.perf_counter()
    cfg, topo = default_topology
    cs = build_channel_set(topo, 0)
    sat_el, sat_az = np.array(cs.sat_local_angles).T
    ue_gain, leak = {0.0: [], 10.0: []}, {0.0: [], 10.0: []}
    for i in range(topo.n_ue):
        for lam in ue_gain:
            p = solve_nulling(cs.H_ter_normalized[i], cs.h_sat_normalized, lam)
            el, az = cs.ue_local_angles[i]
            ue_gain[lam].append(float(array_gain_db(p.w_t, topo.gnb, el, az)))
            leak[lam].append(10 ** (array_gain_db(p.w_t, topo.gnb, sat_el, sat_az) / 10))
    g10 = float(np.median(ue_gain[10.0]))
    drop = 10 * math.log10(np.mean(leak[0.0]) / np.mean(leak[10.0]))
    ok = len(cs.sat_ids) == 40 and g10 >= NULL_MIN_UE_GAIN_DB and drop >= NULL_MIN_LEAK_DROP_DB
    report(3, ok, f"{len(cs.sat_ids)} satellites; median UE gain at lambda=10 {g10:.3f} dB "
           f"(min {min(ue_gain[10.0]):.3f}, need >= {NULL_MIN_UE_GAIN_DB}); mean leakage drop "
           f"{drop:.2f} dB (need >= {NULL_MIN_LEAK_DROP_DB})", t0, 30)


def test_criterion_04_lambda_monotonicity():
    rng = np.random.default_rng(4)
    violations, n_checks = 0, 0
    for _ in range(50):
        n_t = int(rng.choice([16, 64]))
        H = crandn(rng, 2, n_t)
        Hn = H / np.linalg.norm(H)
        sats = [unit(crandn(rng, n_t, 1)) for _ in range(int(rng.integers(1, 41)))]
        terms = [objective_terms(solve_nulling(Hn, sats, lam), Hn, sats) for lam in DEFAULT_LAMBDAS]
        for (g0, l0), (g1, l1) in zip(terms, terms[1:]):
            n_checks += 2
            violations += (g1 > g0 + MONOTONE_TOL) + (l1 > l0 + MONOTONE_TOL)
    report(4, violations == 0, f"{violations} violations in {n_checks} checks, tol {MONOTONE_TOL}")


def _random_context(rng):
    ctx = PowerControlContext(
        interference_dbm=float(rng.uniform(-80, -65)),
        epsilon=float(rng.uniform(0.5, 0.99)),
        inr_max_db=float(rng.uniform(-10, -3)),
        g_over_t_db=float(rng.uniform(5, 15)),
    )
    gain = float(rng.uniform(-85, -45))
    n_t = 16
    w_t = unit(crandn(rng, n_t, 1))
    sats = [unit(crandn(rng, n_t, 1)) * 10 ** (rng.uniform(-190, -170) / 20)
            for _ in range(int(rng.integers(0, 5)))]
    return ctx, gain, w_t, sats


def test_criterion_05_power_solver_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    worst_gap, bound_err, n, interior, tried = 0.0, 0, 0, 0, 0
    while n < 200:
        tried += 1
        ctx, gain, w_t, sats = _random_context(rng)
        try:
            dec = solve_power(gain, w_t, sats, ctx)
        except InfeasibleLink:
            continue
        n += 1
        lo, hi, _, _ = feasible_interval(gain, w_t, sats, ctx)
        grid = np.append(np.arange(lo, hi, POWER_GRID_STEP), hi)
        p_grid = grid[np.argmax(utility(grid, gain, ctx))]
        worst_gap = max(worst_gap, abs(dec.p_opt - p_grid))
        interior += dec.binding_constraint == "utility_peak"
        # closed-form constraint check on the returned decision
        r_floor = ctx.epsilon * rate(ctx.p_max_dbm, gain, ctx)
        bound_err += not (ctx.p_min_dbm <= dec.p_opt <= ctx.p_max_dbm)
        bound_err += not (dec.rate_at_opt >= r_floor * (1 - BOUND_TOL))
        bound_err += any(inr(dec.p_opt, w_t, h, ctx) > ctx.inr_max_db + BOUND_TOL for h in sats)
    ok = worst_gap <= POWER_TOL_DB and bound_err == 0
    report(5, ok, f"max |p_opt - grid argmax| {worst_gap:.4f} dB (tol {POWER_TOL_DB}) over 200 "
           f"feasible contexts ({tried} drawn, {interior} interior optima); "
           f"{bound_err} bound violations", t0, 20)


def test_criterion_06_jfi_algebra():
    rng = np.random.default_rng(6)
    eq = metrics.jain_index([3.7] * 30)
    one_hot = metrics.jain_index([1.0] + [0.0] * 29)
    worst = 0.0
    for _ in range(1000):
        v = rng.exponential(size=int(rng.integers(1, 60)))
        c = 10 ** rng.uniform(-3, 3)
        worst = max(worst, abs(metrics.jain_index(c * v) - metrics.jain_index(v)))
    ok = abs(eq - 1) <= JFI_TOL and abs(one_hot - 1 / 30) <= JFI_TOL and worst <= JFI_TOL
    report(6, ok, f"equal {eq:.15f}, one-hot {one_hot:.15f} (1/30), max scale drift "
           f"{worst:.1e}, tol {JFI_TOL}")


def test_criterion_07_power_control_only():
    t0 = time.perf_counter()
    cfg = override(ScenarioConfig(), ["mode=power_control_only"])
    results, pooled = scenario.run_repeats(cfg, SEEDS)
    p_max = cfg.power.p_max_dbm
    worst_inr, worst_id, n_inf = -math.inf, 0.0, 0
    for records, _, _ in results:
        for r in records:
            worst_inr = max(worst_inr, r.inr_worst)
            worst_id = max(worst_id, abs(r.rss_degradation - (p_max - r.p_selected)))
            n_inf += r.infeasible_flag
    jfis = [s.jfi for _, s, _ in results]
    ok = min(jfis) >= PC_JFI_MIN and worst_inr <= INR_CAP_DB + BOUND_TOL and worst_id <= DRSS_TOL
    report(7, ok, f"JFI min {min(jfis):.4f} / mean {np.mean(jfis):.4f} over {SEEDS} seeds "
           f"(need >= {PC_JFI_MIN}); worst INR {worst_inr:.3f} dB (cap {INR_CAP_DB}); "
           f"max |dRSS - (Pmax - P)| {worst_id:.1e} (tol {DRSS_TOL}); {n_inf} fallback slots", t0)


def test_criterion_08_power_savings():
    t0 = time.perf_counter()
    loose = override(ScenarioConfig(), ["mode=joint", "lambda=0", "power.epsilon=0.85"])
    tight = override(ScenarioConfig(), ["mode=joint", "lambda=0.1", "power.epsilon=0.98"])
    d_loose = scenario.run_repeats(loose, SEEDS)[1]["power_decrease"]
    d_tight = scenario.run_repeats(tight, SEEDS)[1]["power_decrease"]
    ok = d_loose >= DECREASE_LOOSE_MIN and DECREASE_TIGHT_MIN <= d_tight < d_loose
    report(8, ok, f"mean power decrease {d_loose:.2f}% at eps=0.85 (need >= {DECREASE_LOOSE_MIN}), "
           f"{d_tight:.2f}% at eps=0.98 (need >= {DECREASE_TIGHT_MIN} and below), "
           f"{SEEDS} seeds pooled", t0, 300)


def test_criterion_09_array_size_sweep():
    t0 = time.perf_counter()
    cfg = override(ScenarioConfig(), ["mode=nulling_only", "lambda=1"])
    worst = []
    for size in ("4x4", "8x8", "16x16", "32x32"):
        c = scenario.config_for(cfg, "array_size", size)
        results, _ = scenario.run_repeats(c, SEEDS)
        worst.append(max(s.worst_case_rss for _, s, _ in results))
    ok = all(b < a for a, b in zip(worst, worst[1:])) and worst[-1] <= DOF_MAX_DB
    report(9, ok, "worst dRSS over %d seeds " % SEEDS
           + " > ".join(f"{w:.3f}" for w in worst)
           + f" dB for 4x4..32x32 (32x32 need <= {DOF_MAX_DB})", t0, 600)


def test_criterion_10_symmetry_identity():
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(1000):
        geom = ArrayGeometry(int(rng.integers(1, 17)), int(rng.integers(1, 17)),
                             float(rng.uniform(0.1, 1.0)))
        az, el = rng.uniform(-180, 180), rng.uniform(-180, 180)
        a, b = array_response(geom, az, el), array_response(geom, -az, -el)
        worst = max(worst, float(np.max(np.abs(a - b))))
    # the co-elevation form is the same vector as the elevation-angle form
    g = ArrayGeometry(8, 8)
    cross = float(np.max(np.abs(array_response(g, 31.0, 70.0) - steering_vector(g, 20.0, 31.0))))
    ok = worst <= SYMMETRY_TOL and cross <= SYMMETRY_TOL
    report(10, ok, f"max entrywise diff {worst:.1e} over 1000 pairs, form cross-check "
           f"{cross:.1e}, tol {SYMMETRY_TOL}")


def _outputs(root):
    out = []
    for d, _, files in os.walk(root):
        out += [os.path.relpath(os.path.join(d, f), root) for f in files]
    return sorted(out)


def test_criterion_11_determinism(tmp_path):
    t0 = time.perf_counter()
    dirs = [tmp_path / "a", tmp_path / "b"]
    codes = [cli.main(["run", "--out", str(d), "--set", "output.satellites_csv=satellites.csv"])
             for d in dirs]
    files = _outputs(dirs[0])
    same_set = files == _outputs(dirs[1])
    compared, differ = 0, []
    for rel in files:
        if rel == "manifest.json":
            continue
        compared += 1
        if not filecmp.cmp(dirs[0] / rel, dirs[1] / rel, shallow=False):
            differ.append(rel)
    # the manifest differs only in its wall-clock field
    m = [json.load(open(d / "manifest.json")) for d in dirs]
    for x in m:
        x.pop("wall_clock_s")
    ok = codes == [0, 0] and same_set and not differ and m[0] == m[1] and compared > 0
    report(11, ok, f"{compared} CSV/JSON files byte-identical across two default runs "
           f"({len(differ)} differ); manifest equal apart from wall_clock_s", t0)


def test_criterion_12_orbit_sanity():
    t0 = time.perf_counter()
    # zenith: orbit whose sub-satellite point at epoch is the site, via spherical trig
    lat, lon, inc = 38.85, -5.0, 70.0
    u = math.degrees(math.asin(math.sin(math.radians(lat)) / math.sin(math.radians(inc))))
    dlon = math.degrees(math.atan2(math.cos(math.radians(inc)) * math.sin(math.radians(u)),
                                   math.cos(math.radians(u))))
    el = orbits.OrbitalElements(600e3, inc, lon - dlon, u)
    zen_err = abs(orbits.propagate(el, orbits.GroundSite(lat, lon), 1)[0].elevation - 90.0)

    cfg = ScenarioConfig().validate()
    times = cfg.start_time() + np.arange(cfg.n_slots) * cfg.constellation.slot_duration
    cons = orbits.build_constellation(cfg.base_elements(), 40, cfg.constellation.delta_inclination)
    r_err = max(float(np.max(np.abs(np.linalg.norm(orbits.ecef_positions(e, times), axis=1)
                                    / e.radius - 1))) for e in cons)
    stats = orbits.elevation_statistics([s for t in scenario.satellite_states(cfg) for s in t],
                                        cfg.constellation.elevation_mask)
    ok = zen_err <= ZENITH_TOL_DEG and r_err <= RADIUS_REL_TOL and stats["median"] < stats["mean"]
    report(12, ok, f"zenith error {zen_err:.1e} deg (tol {ZENITH_TOL_DEG}); radius drift "
           f"{r_err:.1e} (tol {RADIUS_REL_TOL}); elevation median {stats['median']:.2f} < mean "
           f"{stats['mean']:.2f} deg", t0)


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-s"]))
