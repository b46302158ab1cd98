"""Acceptance criteria, one PASS/FAIL line each.

The lines are printed as the tests run and repeated in the pytest summary.
The three 9x7 maps take a few minutes on one core; set PIPF_LANDING_WORKERS
to spread them over more processes.
"""
import math
import os

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from pipf_landing.capture import min_horizontal_speed, truncate2
from pipf_landing.dynamics import ControlInput, ModelParams, PipfState, mechanical_energy, simulate
from pipf_landing.serialize import write_map
from pipf_landing.stabilizer import LandingCase, first_stance_step, feasibility_bounds
from pipf_landing.sweep import SweepSpec, build_grid, factor_study, fit_boundary, rod_inertia, run_sweep
from pipf_landing.trajopt import discount_sequence, z_dot_nd

WORKERS = int(os.environ.get("PIPF_LANDING_WORKERS", os.cpu_count() or 1))
I_LEVELS = (0.04, 0.08, 0.12)


def report(name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


@pytest.fixture(scope="module")
def inertia_maps():
    rows = factor_study(SweepSpec(grid=(9, 7)), I_levels=I_LEVELS, worker_count=WORKERS)
    return {r.I_nd: r for r in rows}


def test_capture_point_spans():
    got = [truncate2(min_horizontal_speed(math.radians(a), 1.5)) for a in (60, 55, 50)]
    report("capture-point spans", got == [0.80, 0.95, 1.10], f"lower bounds {got}")


def test_rod_inertia():
    got = [round(rod_inertia(e), 2) for e in (0.7, 1.0, 1.2)]
    report("rod inertia", got == [0.04, 0.08, 0.12], f"{got}")


def test_feasibility_bound_algebra():
    T_lb, T_ub, a_ub, _ = feasibility_bounds(-0.2, math.radians(100), 0.5, 0.8, 0.04, 2.0)
    deg = math.degrees(a_ub)
    ok = deg == pytest.approx(150.0, abs=1e-12) and abs(T_lb - 0.20627) <= 1e-4 and abs(T_ub - 1.4605) <= 1e-4
    report("feasibility-bound algebra", ok,
           f"alpha_ub={deg:.12f} deg, T_lb={T_lb:.5f} T_C, T_ub={T_ub:.5f} T_C")


def test_preliminary_case():
    o = first_stance_step(LandingCase(3.0, 1.2, -0.3, 0.04, math.radians(60)))
    S, U, _ = o.trajectory()
    x1 = o.pitch.terminal_state
    zd = float(z_dot_nd(o.terminal_state)[0])
    checks = {
        "success": o.success,
        "alpha>=pi/2 at pitch exit": x1[1] + x1[2] >= math.pi / 2,
        "|z_dot-0.01|<0.02": abs(zd - 0.01) < 0.02,
        "|gamma|<=pi/2": bool(np.all(np.abs(S[:, 2]) <= math.pi / 2 + 1e-6)),
        "|F|<=2": bool(np.all(np.abs(U[:, 0]) <= 2 + 1e-6)),
        "|tau|<=1": bool(np.all(np.abs(U[:, 1]) <= 1 + 1e-6)),
    }
    bad = [k for k, v in checks.items() if not v]
    report("preliminary case", not bad,
           f"z_dot={zd:.4f}, alpha1={math.degrees(x1[1] + x1[2]):.1f} deg" + (f", failed {bad}" if bad else ""))


def test_desk_scale_map(inertia_maps):
    pm = inertia_maps[0.04].map
    low = pm.outcome_at(1.0, 0.8).success
    high = pm.outcome_at(5.0, 2.0).success
    b = pm.boundary
    ok = low and not high and b is not None and b.slope < 0 and b.r_squared > 0.6
    detail = f"{int(pm.success.sum())}/63 success, (1,0.8)={low}, (5,2.0)={high}, "
    if b is None:
        detail += "no boundary"
    else:
        soft = abs(b.slope + 2.28) < 0.9 and abs(b.intercept - 7.31) < 2.5
        detail += (f"slope={b.slope:.3f} intercept={b.intercept:.3f} R2={b.r_squared:.3f}; "
                   f"advisory soft check {'met' if soft else 'missed'}")
    report("desk-scale performance map", ok, detail)


def test_inertia_trend(inertia_maps):
    rows = [inertia_maps[I] for I in I_LEVELS]
    fits = [r.boundary for r in rows]
    parts = []
    for I, r in zip(I_LEVELS, rows):
        b = r.boundary
        parts.append(f"I={I}: " + ("no boundary" if b is None else f"|m|={abs(b.slope):.3f} b={b.intercept:.3f}")
                     + f" ({int(r.map.success.sum())} successes)")
    fitted = [f for f in fits if f is not None]
    m = [abs(f.slope) for f in fitted]
    c = [f.intercept for f in fitted]
    monotone = all(x >= y for x, y in zip(m, m[1:])) and all(x >= y for x, y in zip(c, c[1:]))
    if len(fitted) < len(fits):
        parts.append(f"nonincreasing across the {len(fitted)} fitted levels: {monotone}")
    report("inertia trend", len(fitted) == len(fits) and monotone, "; ".join(parts))


def _successes(inertia_maps):
    return [o for r in inertia_maps.values() for o in r.map.outcomes if o.success]


def test_bound_ordering(inertia_maps):
    succ = _successes(inertia_maps)
    order = [o.feasibility.T_lb < o.feasibility.T_ub and o.feasibility.T_lb <= o.T_vs_star for o in succ]
    eta = [o.feasibility.eta_T for o in succ if o.feasibility.T_lb > 0]
    below = sum(e < 10 for e in eta)
    required = sum(o.feasibility.required for o in succ)
    ok = bool(succ) and all(order) and below >= 1
    report("bound ordering", ok,
           f"{sum(order)}/{len(succ)} successes ordered; vertical phase needed in {required}; "
           f"{below} cases with T_lb>0 and eta_T<10")


def test_grf_properties(inertia_maps):
    succ = _successes(inertia_maps)
    fz = np.array([o.min_F_fz for o in succ])
    mu = np.array([o.max_mu for o in succ])
    frac = float(np.mean(mu < 3)) if mu.size else 0.0
    ok = bool(succ) and bool(np.all(fz > 0)) and frac >= 0.8
    report("GRF properties", ok, f"min F_fz={fz.min():.3f}, mu<3 on {frac:.0%} of {len(succ)} successes")


def test_property_suites(tmp_path):
    p = ModelParams()
    # passive energy over 1 s at dt = 1e-3
    s = PipfState(1.0, 1.3, 0.0, 0.0, 0.4, 2.0)
    e0 = mechanical_energy(s, p)
    traj = simulate(s, [ControlInput()] * 1000, 1e-3, p)
    energy = abs(mechanical_energy(traj[-1], p) - e0) / abs(e0)
    # zero torque keeps the pitch rate
    traj = simulate(PipfState(0.9, 1.0, 0.1, 0.1, 0.5, -1.7), [ControlInput(500.0, 0.0)] * 300, 1e-3, p)
    spin = max(abs(x.gamma_dot + 1.7) for x in traj)
    # scale invariance
    rng = np.random.default_rng(0)
    U = np.column_stack([rng.uniform(0, 2, 50), rng.uniform(-1, 1, 50)])
    outs = []
    for q in (ModelParams.from_nondim_inertia(0.06), ModelParams.from_nondim_inertia(0.06, m=55.0, r0=1.7)):
        x = PipfState(q.r0, 0.9, 0.2, -0.5 * math.sqrt(q.g * q.r0), 0.8 / q.T_C, 2.0 / q.T_C)
        tr = simulate(x, [ControlInput(u[0] * q.m * q.g, u[1] * q.m * q.g * q.r0) for u in U], 0.01 * q.T_C, q)
        outs.append(np.array([[y.r / q.r0, y.beta, y.gamma, y.r_dot / math.sqrt(q.g * q.r0),
                               y.beta_dot * q.T_C, y.gamma_dot * q.T_C] for y in tr]))
    scale = float(np.max(np.abs(outs[0] - outs[1])))
    # least squares against normal equations
    x = rng.uniform(0.8, 2.0, 8)
    y = rng.uniform(1, 5, 8)
    f = fit_boundary(np.column_stack([x, y]))
    n, sx, sy, sxx, sxy = 8, x.sum(), y.sum(), (x * x).sum(), (x * y).sum()
    m = (n * sxy - sx * sy) / (n * sxx - sx * sx)
    fit = max(abs(f.slope - m), abs(f.intercept - (sy - m * sx) / n))
    # discount sums
    uni = math.fsum(discount_sequence("uniform", 20))
    rp = discount_sequence("reversed_poisson", 20).sum()
    # worker determinism
    spec = SweepSpec(grid=(2, 2))
    cases = build_grid(spec)
    write_map(tmp_path / "one.csv", run_sweep(cases, worker_count=1, spec=spec))
    write_map(tmp_path / "two.csv", run_sweep(cases, worker_count=2, spec=spec))
    same = (tmp_path / "one.csv").read_bytes() == (tmp_path / "two.csv").read_bytes()
    ok = (energy < 1e-5 and spin == 0.0 and scale < 1e-9 and fit < 1e-10 and uni == 1.0
          and 0.9999 < rp <= 1.0 and same)
    report("property suites", ok,
           f"energy drift {energy:.1e}, pitch-rate change {spin:.1e}, scale gap {scale:.1e}, "
           f"fit gap {fit:.1e}, uniform sum {uni!r}, reversed-Poisson sum {rp:.6f}, byte-identical CSV {same}")
