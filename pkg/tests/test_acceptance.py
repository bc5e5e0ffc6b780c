"""Acceptance criteria, one test each. Every test records a PASS/FAIL line
before asserting, so the summary lists all criteria even when some fail."""

import io
import itertools
import math
import random
import time
from contextlib import redirect_stderr
from fractions import Fraction

import numpy as np

from _oracles import grid_box, grid_lp_min
from fogcache import analysis, formulas
from fogcache.bounds import cutset_constraints, pipelined_lower_bound, serial_lower_bound
from fogcache.cli import main
from fogcache.core import SystemConfig, worst_case_demands
from fogcache.delivery import latency_from_report, run_delivery
from fogcache.placement import (
    empirical_fragment_stats,
    exact_fragment_moments,
    partition_files,
    place_caches,
)


def test_criterion_1_gap_sweep(record_acceptance, tmp_path):
    out = tmp_path / "sweep.csv"
    start = time.perf_counter()
    with redirect_stderr(io.StringIO()):
        code = main(["sweep", "--kr", "100", "--r", "1", "--step", "0.01", "-o", str(out)])
    elapsed = time.perf_counter() - start
    rows = out.read_text().splitlines()[1:]
    gap_s = max(float(line.split(",")[7]) for line in rows)
    gap_p = max(float(line.split(",")[8]) for line in rows)
    ok = code == 0 and elapsed < 60 and 16 <= gap_s <= 24 and 8 <= gap_p <= 12
    record_acceptance(
        1, ok,
        f"sweep {elapsed:.1f}s, {len(rows)} rows, max gap_s {gap_s:.4g} (want [16,24]), "
        f"max gap_p {gap_p:.4g} (want [8,12])",
    )
    assert ok


def test_criterion_2_tight_point(record_acceptance):
    cfg = SystemConfig(kt=2, kr=2, mu_t=0.0, mu_r=0.0, r=1.0)
    s, p = formulas.serial_ndt(cfg), formulas.pipelined_ndt(cfg)
    s_lb, p_lb = serial_lower_bound(cfg).delta_lb, pipelined_lower_bound(cfg)
    ok = all(abs(v - 2) <= 1e-9 for v in (s, s_lb)) and all(abs(v - 1) <= 1e-9 for v in (p, p_lb))
    record_acceptance(2, ok, f"serial {s:.12g} / bound {s_lb:.12g}, pipelined {p:.12g} / bound {p_lb:.12g}")
    assert ok


def test_criterion_3_optimality_regions(record_acceptance):
    start = time.perf_counter()
    reports = [analysis.optimality_check(kr, mu_t_points=101, r_points=50) for kr in (2, 10, 100)]
    elapsed = time.perf_counter() - start
    parts = []
    for rep in reports:
        worst_p = max(c.max_ratio for c in rep.regions if c.transmission == "pipelined")
        worst_s = max(c.max_ratio for c in rep.regions if c.transmission == "serial")
        n_bad = sum(len(c.violations) for c in rep.regions)
        parts.append(f"Kr={rep.kr}: pipelined max ratio {worst_p:.4g}, serial max ratio {worst_s:.4g}, "
                     f"{n_bad} violations")
    ok = elapsed < 10 and all(rep.p1_passed and rep.p2_passed for rep in reports)
    record_acceptance(3, ok, f"{elapsed:.1f}s; " + "; ".join(parts))
    assert ok


def test_criterion_4_closed_forms(record_acceptance):
    rng = random.Random(4)
    worst = 0.0
    for _ in range(1000):
        kr = rng.randint(2, 200)
        mt = rng.uniform(0, 1) or 0.5
        mr = rng.uniform(0, 1) or 0.5
        r = 300 * (1 - rng.random())  # (0, 300]
        cfg = SystemConfig(kt=2, kr=kr, mu_t=mt, mu_r=mr, r=r)
        fmt, fmr, fr = Fraction(mt), Fraction(mr), Fraction(r)
        pairs = [
            (formulas.multicast_rate_r2(cfg), float(formulas.closed_form_r2(kr, fmt, fmr))),
            (formulas.multicast_rate_r3(cfg), float(formulas.closed_form_r3(kr, fmt, fmr))),
        ]
        exact = formulas.closed_form_scheme(kr, fmt, fmr, fr)
        for got, want in zip(formulas.scheme_ndt(cfg, "a") + formulas.scheme_ndt(cfg, "b"),
                             exact[0] + exact[1]):
            pairs.append((got, float(want)))
        for got, want in pairs:
            if want != 0:
                worst = max(worst, abs(got - want) / abs(want))
            elif got != 0:
                worst = math.inf
    ok = worst <= 1e-12
    record_acceptance(4, ok, f"1000 configs, max relative error {worst:.3g} (want <= 1e-12)")
    assert ok


def test_criterion_5_placement_concentration(record_acceptance):
    checked = beyond_sigma = beyond_pct = 0
    max_rel = max_z = 0.0
    for seed in range(10):
        cfg = SystemConfig(kt=2, kr=4, mu_t=0.5, mu_r=0.5, file_bits=10**6, seed=seed)
        for row in empirical_fragment_stats(partition_files(place_caches(cfg)), cfg):
            if row.rel_error is None:
                continue
            mean, sd = exact_fragment_moments(cfg, row.key)
            z = abs(row.observed_bits - mean) / sd
            checked += 1
            beyond_sigma += z > 3
            beyond_pct += row.rel_error > 0.02
            max_rel, max_z = max(max_rel, row.rel_error), max(max_z, z)
    ok = checked > 0 and beyond_sigma == 0 and beyond_pct == 0
    record_acceptance(
        5, ok,
        f"{checked} fragments; {beyond_sigma} beyond 3 sigma (max z {max_z:.3g}, "
        f"~{checked * 0.0027:.1f} expected by chance); {beyond_pct} above 2% (max {100 * max_rel:.3g}%)",
    )
    assert ok


def test_criterion_6_delivery(record_acceptance):
    grid = (0.0, 0.3, 0.7, 1.0)
    runs = failures = 0
    for kr, mt, mr, variant, seed in itertools.product((2, 3, 4), grid, grid, "ab", range(3)):
        cfg = SystemConfig(kt=2, kr=kr, mu_t=mt, mu_r=mr, file_bits=10**4, seed=seed)
        state = place_caches(cfg)
        try:
            rep = run_delivery(state, partition_files(state), worst_case_demands(cfg), variant)
            failures += not rep.all_decoded
        except Exception:
            failures += 1
        runs += 1
    spot = SystemConfig(kt=2, kr=4, mu_t=0.5, mu_r=0.5, file_bits=10**6, seed=0, r=1.0)
    state = place_caches(spot)
    emp = latency_from_report(run_delivery(state, partition_files(state), worst_case_demands(spot)), spot)
    worst = 0.0
    for s in formulas.ndt_breakdown(spot).per_stage:
        got = emp.stage(s.stage)
        for g, w in ((got.fronthaul, s.fronthaul), (got.edge, s.edge)):
            if w:
                worst = max(worst, abs(g - w) / w)
    ok = failures == 0 and worst <= 0.03
    record_acceptance(6, ok, f"{runs} runs, {failures} decode failures; F=1e6 spot check max stage error "
                             f"{100 * worst:.3g}% (want <= 3%)")
    assert ok


def test_criterion_7_dominance(record_acceptance):
    rng = np.random.default_rng(7)
    n = 10**4
    min_gap_s = min_gap_p = math.inf
    max_violation = max_grid_err = 0.0
    for _ in range(n):
        cfg = SystemConfig(
            kt=2, kr=int(rng.integers(2, 41)), mu_t=float(rng.random()), mu_r=float(rng.random()),
            r=float(np.exp(rng.uniform(np.log(0.1), np.log(300)))),
        )
        lb = serial_lower_bound(cfg)
        min_gap_s = min(min_gap_s, formulas.serial_ndt(cfg) - lb.delta_lb)
        min_gap_p = min(min_gap_p, formulas.pipelined_ndt(cfg) - pipelined_lower_bound(cfg))
        cons = [(c.fronthaul_coeff, c.edge_coeff, c.rhs) for c in cutset_constraints(cfg)]
        cons.append((0.0, 1.0, 1 - cfg.mu_r))
        for a, b, c in cons:
            max_violation = max(max_violation, c - (a * lb.delta_f + b * lb.delta_e))
        max_violation = max(max_violation, -lb.delta_f)
        brute = grid_lp_min(cons, grid_box(cons, cfg.kr))
        max_grid_err = max(max_grid_err, abs(brute - lb.delta_lb))
    ok = min_gap_s >= -1e-9 and min_gap_p >= -1e-9 and max_violation <= 1e-9 and max_grid_err <= 2e-3
    record_acceptance(
        7, ok,
        f"{n} configs; min gap_s {min_gap_s:.3g}, min gap_p {min_gap_p:.3g}, "
        f"max constraint violation {max_violation:.3g}, max |LP - grid| {max_grid_err:.3g}",
    )
    assert ok


def test_criterion_8_baseline_identity(record_acceptance):
    rows = analysis.compare_baseline(10, 0.01)
    worst = max(abs(w.difference - 5 * (1 - w.mu_r) ** 10) for w in rows)
    last = rows[-1]
    ok = worst <= 1e-12 and last.mu_r == 1.0 and last.two_antenna == 0 and last.single_antenna == 0
    record_acceptance(8, ok, f"{len(rows)} grid points, max identity error {worst:.3g}; "
                             f"at mu_r=1: {last.two_antenna}, {last.single_antenna}")
    assert ok
