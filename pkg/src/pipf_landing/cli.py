"""Command line: ``simulate``, ``sweep`` and ``analyze``.

Exit codes: 0 run complete, 2 input error, 3 internal error.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import traceback

import numpy as np

from . import serialize as io
from .capture import lip_handoff, n_step_capture
from .errors import InvalidInputError, PipfError
from .stabilizer import first_stance_step
from .sweep import build_grid, fit_boundary, fit_map, monotonicity_flags, run_sweep

log = logging.getLogger("pipf_landing")

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 2, 3

FACTOR_KEYS = {"I": "I_nd", "I_nd": "I_nd", "vz0": "vz0", "alpha0": "alpha0_deg", "alpha0_deg": "alpha0_deg"}
CASE_KEYS = ("omega0", "vx0", "vz0", "I_nd", "alpha0_deg")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_INPUT)


def parse_factors(text: str | None) -> dict:
    """``"I=0.04,0.08,vz0=-0.3"`` -> ``{"I": [0.04, 0.08], "vz0": [-0.3]}``.

    A bare value continues the list of the preceding key.
    """
    out: dict = {}
    if not text:
        return out
    key = None
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if "=" in tok:
            key, tok = (s.strip() for s in tok.split("=", 1))
            if not key:
                raise InvalidInputError(f"empty factor name in {text!r}")
            out.setdefault(key, [])
        elif key is None:
            raise InvalidInputError(f"factor value {tok!r} has no name")
        try:
            out[key].append(float(tok))
        except ValueError:
            raise InvalidInputError(f"factor {key}: {tok!r} is not a number") from None
    return out


def _config(args) -> io.RunConfig:
    cfg = io.load_config(args.config) if args.config else io.RunConfig.default()
    run = cfg.data["run"]
    if args.workers is not None:
        if args.workers < 1:
            raise InvalidInputError("--workers must be at least 1")
        run["workers"] = args.workers
    if getattr(args, "nsteps", None) is not None:
        if args.nsteps < 0:
            raise InvalidInputError("--nsteps must be nonnegative")
        run["nsteps"] = args.nsteps
    if args.out is not None:
        run["out"] = args.out
    return cfg


def cmd_simulate(args) -> int:
    cfg = _config(args)
    for k, v in parse_factors(args.factors).items():
        if k not in CASE_KEYS or len(v) != 1:
            raise InvalidInputError(f"simulate takes single case values for {CASE_KEYS}, got {k}")
        cfg.data["case"][k] = v[0]
    cfg.validate()
    case = cfg.case()
    params = cfg.model_params(case.I_nd)
    out = cfg.data["run"]["out"]
    io.ensure_dir(out)
    o = first_stance_step(case, cfg.stabilizer_config(), params)
    io.write_csv(os.path.join(out, "trajectory.csv"), io.TRAJ_HEADER, io.trajectory_rows(o, case.I_nd))
    row = dict(zip(io.MAP_HEADER, io.outcome_row(0, None, o)))
    for k in ("index", "i_omega", "j_vx"):
        row.pop(k)
    summary = {"outcome": row, "config": cfg.to_dict(), "capture": None}
    N = int(cfg.data["run"]["nsteps"])
    if N > 0 and o.success:
        st = cfg.data["capture"]["step_time_tc"] * params.T_C
        reach = params.r0 * math.cos(cfg.stabilizer_config().alpha_min)
        lip = lip_handoff(o.terminal_state, params)
        plan = n_step_capture(lip, N, reach, params.g, st, foot=0.0, r0=params.r0)
        summary["capture"] = {"N": N, "captured": plan.captured, "steps": plan.steps,
                              "reach": reach, "step_time": st, "handoff": vars(lip)}
        io.write_csv(os.path.join(out, "footholds.csv"), ["step", "x_foot", "x_dot_before"],
                     [[n + 1, f, v] for n, (f, v) in enumerate(zip(plan.footholds, plan.velocities))])
    io.write_json(os.path.join(out, "summary.json"), summary)
    log.info("case %s: success=%s %s", (case.omega0, case.vx0), o.success, o.reason)
    return EXIT_OK


def _factor_specs(cfg, factors):
    unknown = set(factors) - set(FACTOR_KEYS)
    if unknown:
        raise InvalidInputError(f"unknown factors {sorted(unknown)}; use {sorted(FACTOR_KEYS)}")
    levels = {FACTOR_KEYS[k]: v for k, v in factors.items()}
    I_l = levels.get("I_nd", [None])
    vz_l = levels.get("vz0", [None])
    a_l = levels.get("alpha0_deg", [None])
    tagged = bool(levels)
    for a in a_l:
        for vz in vz_l:
            for I in I_l:
                d = dict(cfg.data["sweep"])
                parts = []
                if I is not None:
                    d["I_nd"] = I
                    parts.append(f"I{I:g}")
                if vz is not None:
                    d["vz0"] = vz
                    parts.append(f"vz{vz:g}")
                if a is not None:
                    if a != d["alpha0_deg"]:
                        d["vx0_range"] = None
                    d["alpha0_deg"] = a
                    parts.append(f"a{a:g}")
                sub = io.RunConfig.from_dict({**cfg.to_dict(), "sweep": d})
                yield ("_" + "_".join(parts) if tagged else ""), sub.sweep_spec()


def cmd_sweep(args) -> int:
    cfg = _config(args)
    factors = parse_factors(args.factors)
    out = cfg.data["run"]["out"]
    io.ensure_dir(out)
    stab = cfg.stabilizer_config()
    params = cfg.model_params()
    workers = int(cfg.data["run"]["workers"])
    for tag, spec in _factor_specs(cfg, factors):
        pm = fit_map(run_sweep(build_grid(spec), stab, params, workers, spec))
        io.write_map(os.path.join(out, f"map{tag}.csv"), pm)
        extra = {"I_nd": spec.I_nd, "vz0": spec.vz0, "alpha0_deg": math.degrees(spec.alpha_0),
                 "omega0_range": list(spec.omega0_range), "vx0_range": list(spec.vx_range),
                 "monotonicity_flags": monotonicity_flags(pm),
                 "errors": sum(o.tag == "error" for o in pm.outcomes)}
        io.write_json(os.path.join(out, f"boundary{tag}.json"), io.boundary_summary(pm, extra))
        b = pm.boundary
        log.info("map%s: %d/%d success, boundary %s", tag, int(np.sum(pm.success)), len(pm.outcomes),
                 "none" if b is None else f"m={b.slope:.3f} b={b.intercept:.3f} R2={b.r_squared:.3f}")
    return EXIT_OK


def _load_map(path):
    try:
        header, rows = io.read_csv(path)
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc
    missing = set(io.MAP_HEADER) - set(header)
    if missing:
        raise InvalidInputError(f"{path}: missing columns {sorted(missing)}")
    return [dict(zip(header, r)) for r in rows]


def _num(v):
    return math.nan if v is None or isinstance(v, str) else float(v)


def _histogram(values, edges):
    counts, _ = np.histogram(values, bins=edges)
    return [[edges[k], edges[k + 1], int(counts[k])] for k in range(len(counts))]


def _frontier(records):
    """Refit the boundary from map rows using the same frontier rule as sweeps."""
    from .sweep import PerformanceMap, select_boundary_neighbors
    from .stabilizer import LandingCase, LandingOutcome

    if not records or any(r["i_omega"] is None or r["i_omega"] < 0 for r in records):
        return None, []
    n_w = max(r["i_omega"] for r in records) + 1
    n_v = max(r["j_vx"] for r in records) + 1
    if n_w * n_v != len(records):
        return None, []
    rec = sorted(records, key=lambda r: (r["i_omega"], r["j_vx"]))
    cases = [LandingCase(_num(r["omega0"]), _num(r["vx0"])) for r in rec]
    outs = [LandingOutcome(c, bool(r["success"]), None, None, None) for c, r in zip(cases, rec)]
    pm = PerformanceMap(None, cases, outs, (n_w, n_v))
    idx = select_boundary_neighbors(pm)
    pts = [(cases[k].vx0, cases[k].omega0) for k in idx]
    if len(pts) < 3 or len({p[0] for p in pts}) < 2:
        return None, pts
    return fit_boundary(pts), pts


def cmd_analyze(args) -> int:
    if not args.maps:
        raise InvalidInputError("analyze needs at least one map CSV")
    out = args.out or "out"
    io.ensure_dir(out)
    for path in args.maps:
        records = _load_map(path)
        stem = os.path.splitext(os.path.basename(path))[0]
        succ = [r for r in records if r["success"] is True]
        series = sorted(succ, key=lambda r: (_num(r["T_lb"]), r["index"]))
        io.write_csv(os.path.join(out, f"{stem}_tvs.csv"),
                     ["index", "omega0", "vx0", "vs_required", "T_lb", "T_ub", "T_vs_star", "eta_T"],
                     [[r["index"], r["omega0"], r["vx0"], r["vs_required"], _num(r["T_lb"]),
                       _num(r["T_ub"]), _num(r["T_vs_star"]), _num(r["eta_T"])] for r in series])
        mu = np.array([_num(r["max_mu"]) for r in succ])
        fz = np.array([_num(r["min_F_fz"]) for r in succ])
        mu_edges = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, math.inf]
        fz_edges = [-math.inf, 0.0, 0.2, 0.4, 0.6, 0.8, 1.0, math.inf]
        io.write_csv(os.path.join(out, f"{stem}_grf_mu_hist.csv"), ["lo", "hi", "count"],
                     _histogram(mu[np.isfinite(mu)], mu_edges))
        io.write_csv(os.path.join(out, f"{stem}_grf_fz_hist.csv"), ["lo", "hi", "count"],
                     _histogram(fz[np.isfinite(fz)], fz_edges))
        fit, pts = _frontier(records)
        eta = [_num(r["eta_T"]) for r in succ]
        eta = [e for e in eta if math.isfinite(e)]
        io.write_json(os.path.join(out, f"{stem}_analysis.json"), {
            "source": os.path.basename(path),
            "cases": len(records),
            "successes": len(succ),
            "vertical_phase_required": sum(bool(r["vs_required"]) for r in succ),
            "eta_T_below_10": sum(e < 10 for e in eta),
            "min_F_fz": float(np.min(fz)) if fz.size else None,
            "fraction_mu_below_3": float(np.mean(mu < 3)) if mu.size else None,
            "boundary": None if fit is None else {"slope": fit.slope, "intercept": fit.intercept,
                                                  "r_squared": fit.r_squared, "points": fit.n},
            "neighbor_points": [list(p) for p in pts],
        })
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pipf-landing", description="Landing evaluation on the PIPF template.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    def common(sp, workers=True):
        sp.add_argument("--config", metavar="PATH", help="JSON run configuration")
        sp.add_argument("--out", metavar="DIR", help="output directory")
        if workers:
            sp.add_argument("--workers", type=int, metavar="N", help="parallel worker processes")

    s = sub.add_parser("simulate", help="one first stance step, optional LIP follow-up")
    common(s)
    s.add_argument("--nsteps", type=int, metavar="N", help="LIP capture steps after the stance")
    s.add_argument("--factors", metavar="K=V,...", help="override case fields, e.g. omega0=3,vx0=1.2")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", help="performance map over the configured grid")
    common(s)
    s.add_argument("--nsteps", type=int, metavar="N", help=argparse.SUPPRESS)
    s.add_argument("--factors", metavar="K=V,...", help="factor levels, e.g. I=0.04,0.08,0.12")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("analyze", help="T_vs series, bound ratios and GRF histograms from map CSVs")
    s.add_argument("maps", nargs="*", metavar="MAP_CSV")
    common(s)
    s.add_argument("--nsteps", type=int, metavar="N", help=argparse.SUPPRESS)
    s.add_argument("--factors", metavar="K=V,...", help=argparse.SUPPRESS)
    s.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (InvalidInputError, PipfError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except Exception:  # noqa: BLE001
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
