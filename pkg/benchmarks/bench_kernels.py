"""Numba vs numpy kernels on a representative horizon.

    python benchmarks/bench_kernels.py            # kernel timings
    python benchmarks/bench_kernels.py --e2e      # plus one landing case per backend

The end-to-end run starts a fresh interpreter per backend and selects the
numpy path with PIPF_LANDING_NO_NUMBA=1.
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from pipf_landing import kernels
from pipf_landing._jit import USE_NUMBA
from pipf_landing.stabilizer import LandingCase, touchdown_state
from pipf_landing.trajopt import CostConfig, hover_controls, ConstraintConfig


def problem(p=20, seed=0):
    rng = np.random.default_rng(seed)
    s0 = touchdown_state(LandingCase(3.0, 1.2))
    h = 0.2 / 1.2 / p
    U = hover_controls(s0, p, ConstraintConfig()) + rng.normal(0, 0.05, (p, 2))
    S = kernels.rollout_numpy(s0, U, h, 0.04)[1:] + rng.normal(0, 1e-3, (p, 6))
    z = np.concatenate([S.ravel(), U.ravel()])
    cc = CostConfig(1.0, 1e4, 1e5)
    wz, wg, wgd = (w / 1e5 for w in cc.weights(p))
    lam = rng.normal(0, 1e-2, (p, 6))
    lo = np.concatenate([np.tile([0.4, 0, -np.pi / 2, -np.inf, -np.inf, -np.inf], p), np.tile([0, -1], p)])
    hi = np.concatenate([np.tile([1, np.pi, np.pi / 2, np.inf, np.inf, np.inf], p), np.tile([2, 1], p)])
    wu = np.full(2, 1e-9)
    uref = np.array([1.0, 0.0])
    return dict(z=z, s0=s0, h=h, I=0.04, w=(wz, wg, wgd), lam=lam, rho=100.0, lo=lo, hi=hi, U=U,
                wu=wu, uref=uref)


def timeit(fn, repeat):
    fn()  # warm-up (and JIT compile)
    best = np.inf
    for _ in range(5):
        t = time.perf_counter()
        for _ in range(repeat):
            fn()
        best = min(best, (time.perf_counter() - t) / repeat)
    return best


def kernel_table(repeat):
    P = problem()
    wz, wg, wgd = P["w"]
    sz, sg, sgd = np.sqrt(2 * wz), np.sqrt(2 * wg), np.sqrt(2 * wgd)
    su = np.sqrt(2 * P["wu"])
    ev = (P["s0"], P["h"], P["I"], wz, wg, wgd, 0.01, 0.0, 0.0, P["wu"], P["uref"], P["lam"], P["rho"])
    rs = (P["s0"], P["h"], P["I"], sz, sg, sgd, 0.01, 0.0, 0.0, su, P["uref"], P["lam"], P["rho"])
    rows = [
        ("al_eval", lambda: kernels.al_eval_numba(P["z"], *ev), lambda: kernels.al_eval_numpy(P["z"], *ev)),
        ("al_residuals", lambda: kernels.al_residuals_numba(P["z"], *rs),
         lambda: kernels.al_residuals_numpy(P["z"], *rs)),
        ("rollout", lambda: kernels.rollout_numba(P["s0"], P["U"], P["h"], P["I"]),
         lambda: kernels.rollout_numpy(P["s0"], P["U"], P["h"], P["I"])),
        ("gauss_newton", lambda: kernels.pgn_numba(P["z"], P["lo"], P["hi"], *rs, 1e-6, 50),
         lambda: kernels.pgn_numpy(P["z"], P["lo"], P["hi"], *rs, 1e-6, 50)),
    ]
    print(f"numba enabled: {USE_NUMBA}")
    print(f"{'kernel':<14}{'numba [us]':>12}{'numpy [us]':>12}{'speedup':>9}")
    for name, fa, fb in rows:
        r = max(1, repeat // 20) if name == "gauss_newton" else repeat
        ta, tb = timeit(fa, r), timeit(fb, r)
        print(f"{name:<14}{ta * 1e6:>12.1f}{tb * 1e6:>12.1f}{tb / ta:>9.1f}")
    # the two backends must agree
    La, ga, _, _ = kernels.al_eval_numba(P["z"], *ev)
    Lb, gb, _, _ = kernels.al_eval_numpy(P["z"], *ev)
    print(f"max |grad numba - grad numpy| = {np.max(np.abs(ga - gb)):.2e}")


E2E = """
import time
from pipf_landing.stabilizer import LandingCase, first_stance_step
first_stance_step(LandingCase(1.0, 0.8))
t = time.perf_counter()
o = first_stance_step(LandingCase(3.0, 1.2))
print(f"{time.perf_counter() - t:.3f} {o.success}")
"""


def end_to_end():
    for label, flag in (("numba", ""), ("numpy", "1")):
        env = dict(os.environ, PIPF_LANDING_NO_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", E2E], env=env, capture_output=True, text=True, check=True)
        secs, ok = out.stdout.split()
        print(f"landing case (3, 1.2) with {label:<5}: {float(secs):8.3f} s  success={ok}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--e2e", action="store_true")
    a = ap.parse_args()
    kernel_table(a.repeat)
    if a.e2e:
        end_to_end()
