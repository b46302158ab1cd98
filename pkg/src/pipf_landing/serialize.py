"""Run configuration (nested JSON) and bit-stable CSV / JSON result files."""
from __future__ import annotations

import copy
import csv
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .dynamics import ModelParams
from .errors import InvalidInputError
from .stabilizer import LandingCase, LandingOutcome, StabilizerConfig
from .sweep import PerformanceMap, SweepSpec
from .trajopt import ConstraintConfig, SolverOptions

SCHEMA = 1

DEFAULTS = {
    "model": {"m": 80.0, "g": 9.8, "r0": 1.0},
    "bounds": {
        "r": [0.4, 1.0],
        "beta": [0.0, math.pi],
        "gamma": [-0.5 * math.pi, 0.5 * math.pi],
        "F": [0.0, 2.0],
        "tau": [-1.0, 1.0],
    },
    "stabilizer": {
        "eta": 0.2,
        "p": 20,
        "alpha_min_deg": 10.0,
        "alpha_max_deg": 170.0,
        "eps_gamma": 0.05,
        "eps_gamma_dot": 0.05,
        "eps_z_dot": 0.02,
        "k1_pitch": [1.0, 10.0, 100.0, 1000.0],
        "k2_pitch": 1e4,
        "k3_pitch": 1e5,
        "k1_vertical": [1e6, 1e7, 1e8],
        "k2_vertical": 1e3,
        "k3_vertical": 1e3,
        "z_dot_des": 0.01,
        "gamma_des": 0.0,
        "gamma_dot_des": 0.0,
        "max_iterations": 50,
    },
    "solver": {
        "tol_constraint": 1e-6,
        "tol_optimality": 1e-5,
        "max_outer": 200,
        "max_inner": 500,
        "rho0": 100.0,
        "stall_limit": 8,
        "inner": "gauss_newton",
        "control_reg": 1e-9,
    },
    "case": {"omega0": 3.0, "vx0": 1.2, "vz0": -0.3, "I_nd": 0.04, "alpha0_deg": 60.0},
    "sweep": {
        "omega0_range": [1.0, 5.0],
        "vx0_range": None,
        "vz0": -0.3,
        "I_nd": 0.04,
        "alpha0_deg": 60.0,
        "grid": [21, 13],
        "eta_vx": 1.5,
    },
    "capture": {"step_time_tc": 0.5},
    "run": {"workers": 1, "nsteps": 0, "out": "out"},
}


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        where = f"{path}.{k}" if path else k
        if k not in base:
            raise InvalidInputError(f"unknown config key {where!r}")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise InvalidInputError(f"config key {where!r} must be a table")
            out[k] = _merge(base[k], v, where)
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    data: dict

    @classmethod
    def default(cls) -> "RunConfig":
        return cls(copy.deepcopy(DEFAULTS))

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise InvalidInputError("config root must be an object")
        cfg = cls(_merge(DEFAULTS, d))
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def section(self, name: str) -> dict:
        return self.data[name]

    def validate(self):
        try:
            for k, (lo, hi) in self.data["bounds"].items():
                if not float(lo) < float(hi):
                    raise InvalidInputError(f"bounds.{k}: need min < max")
            self.model_params()
            self.stabilizer_config()
            self.sweep_spec()
            self.case()
            if int(self.data["run"]["workers"]) < 1 or int(self.data["run"]["nsteps"]) < 0:
                raise InvalidInputError("run.workers must be >= 1 and run.nsteps >= 0")
        except InvalidInputError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise InvalidInputError(f"bad config value: {exc}") from exc

    def model_params(self, I_nd: float | None = None) -> ModelParams:
        m = self.data["model"]
        I_nd = self.data["case"]["I_nd"] if I_nd is None else I_nd
        return ModelParams.from_nondim_inertia(float(I_nd), float(m["m"]), float(m["g"]), float(m["r0"]))

    def constraints(self) -> ConstraintConfig:
        b = self.data["bounds"]
        return ConstraintConfig(
            Q_min=(float(b["r"][0]), float(b["beta"][0]), float(b["gamma"][0])),
            Q_max=(float(b["r"][1]), float(b["beta"][1]), float(b["gamma"][1])),
            U_min=(float(b["F"][0]), float(b["tau"][0])),
            U_max=(float(b["F"][1]), float(b["tau"][1])),
        )

    def stabilizer_config(self) -> StabilizerConfig:
        s = self.data["stabilizer"]
        v = self.data["solver"]
        solver = SolverOptions(float(v["tol_constraint"]), float(v["tol_optimality"]), int(v["max_outer"]),
                               float(v["rho0"]), max_inner=int(v["max_inner"]),
                               stall_limit=int(v["stall_limit"]), inner=str(v["inner"]),
                               control_reg=float(v["control_reg"]))
        return StabilizerConfig(
            eta=float(s["eta"]), p=int(s["p"]),
            alpha_min=math.radians(float(s["alpha_min_deg"])),
            alpha_max=math.radians(float(s["alpha_max_deg"])),
            eps_gamma=float(s["eps_gamma"]), eps_gamma_dot=float(s["eps_gamma_dot"]),
            eps_z_dot=float(s["eps_z_dot"]),
            k1_pitch=tuple(map(float, s["k1_pitch"])), k2_pitch=float(s["k2_pitch"]),
            k3_pitch=float(s["k3_pitch"]),
            k1_vertical=tuple(map(float, s["k1_vertical"])), k2_vertical=float(s["k2_vertical"]),
            k3_vertical=float(s["k3_vertical"]),
            z_dot_des=float(s["z_dot_des"]), gamma_des=float(s["gamma_des"]),
            gamma_dot_des=float(s["gamma_dot_des"]), max_iterations=int(s["max_iterations"]),
            constraints=self.constraints(), solver=solver,
        )

    def sweep_spec(self) -> SweepSpec:
        s = self.data["sweep"]
        vx = s["vx0_range"]
        return SweepSpec(
            omega0_range=tuple(map(float, s["omega0_range"])),
            vx0_range=None if vx is None else tuple(map(float, vx)),
            vz0=float(s["vz0"]), I_nd=float(s["I_nd"]),
            alpha_0=math.radians(float(s["alpha0_deg"])),
            grid=tuple(map(int, s["grid"])), eta_vx=float(s["eta_vx"]),
        )

    def case(self) -> LandingCase:
        c = self.data["case"]
        return LandingCase(float(c["omega0"]), float(c["vx0"]), float(c["vz0"]), float(c["I_nd"]),
                           math.radians(float(c["alpha0_deg"])))


def parse_config(text: str) -> RunConfig:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"config is not valid JSON: {exc}") from exc
    return RunConfig.from_dict(d)


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InvalidInputError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def serialize_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# numbers and files

def fmt(v) -> str:
    """Locale-independent text that parses back to the identical value."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def parse_value(s: str):
    if s in ("true", "false"):
        return s == "true"
    if s == "":
        return None
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path):
    """Return ``(header, rows)`` with values parsed back to bool/int/float/str."""
    with open(path, encoding="utf-8", newline="") as fh:
        r = csv.reader(fh)
        try:
            header = next(r)
        except StopIteration:
            raise InvalidInputError(f"{path}: empty file") from None
        rows = []
        for n, row in enumerate(r, start=2):
            if len(row) != len(header):
                raise InvalidInputError(f"{path}:{n}: expected {len(header)} fields, got {len(row)}")
            rows.append([parse_value(v) for v in row])
    return header, rows


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def write_json(path, obj: dict):
    body = {"schema": SCHEMA}
    body.update(_jsonable(obj))
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(body, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc
    if not isinstance(d, dict) or d.get("schema") != SCHEMA:
        raise InvalidInputError(f"{path}: missing or unsupported schema")
    return d


# ---------------------------------------------------------------------------
# landing records

MAP_HEADER = ["index", "i_omega", "j_vx", "omega0", "vx0", "vz0", "I_nd", "alpha0_deg", "success",
              "vs_required", "T_lb", "T_ub", "T_vs_star", "eta_T", "min_F_fz", "max_mu", "k1_pitch",
              "k1_vertical", "pitch_iterations", "vertical_iterations", "T1", "tag", "reason"]


def _tc(v, T):
    return v / T if v is not None and math.isfinite(v) else math.nan


def outcome_row(k: int, shape, o: LandingOutcome) -> list:
    """One map row; all times in units of ``T_C``."""
    c, f = o.case, o.feasibility
    T = o.T_C
    i, j = divmod(k, shape[1]) if shape else (-1, -1)
    T_lb = _tc(f.T_lb, T) if f else math.nan
    T_ub = _tc(f.T_ub, T) if f else math.nan
    eta_T = T_ub / T_lb if T_lb > 0 else math.nan
    p, v = o.pitch, o.vertical
    return [k, i, j, c.omega0, c.vx0, c.vz0, c.I_nd, math.degrees(c.alpha0), o.success,
            bool(f.required) if f else False, T_lb, T_ub, _tc(o.T_vs_star, T), eta_T,
            o.min_F_fz, o.max_mu,
            p.k1 if p else math.nan, v.k1 if v else math.nan,
            p.iterations if p else 0, v.iterations if v else 0,
            _tc(p.times[-1], T) if p else math.nan, o.tag, o.reason]


def write_map(path, pm: PerformanceMap):
    write_csv(path, MAP_HEADER, [outcome_row(k, pm.shape, o) for k, o in enumerate(pm.outcomes)])


def boundary_summary(pm: PerformanceMap, extra: dict | None = None) -> dict:
    b = pm.boundary
    d = {
        "cases": len(pm.outcomes),
        "grid": list(pm.shape) if pm.shape else None,
        "successes": int(np.sum(pm.success)),
        "success_rate": pm.success_rate,
        "boundary": None if b is None else {"slope": b.slope, "intercept": b.intercept,
                                            "r_squared": b.r_squared, "points": b.n},
        "neighbor_set": list(pm.neighbor_set),
        "neighbor_points": [[pm.cases[k].vx0, pm.cases[k].omega0] for k in pm.neighbor_set],
    }
    if extra:
        d.update(extra)
    return d


TRAJ_HEADER = ["t", "t_nd", "phase", "r", "beta", "gamma", "r_dot", "beta_dot", "gamma_dot", "alpha",
               "x", "z", "x_dot", "z_dot", "F", "tau", "F_fx", "F_fz", "mu"]


def trajectory_rows(o: LandingOutcome, I_nd: float) -> list:
    """Non-dimensional state at every knot plus the control held from it."""
    from .stabilizer import grf_nd

    S, U, t = o.trajectory()
    if S.shape[0] == 0:
        return []
    n_pitch = o.pitch.controls.shape[0] if o.pitch is not None else 0
    fx, fz = grf_nd(S[:-1], U, I_nd) if U.shape[0] else (np.empty(0), np.empty(0))
    rows = []
    for n in range(S.shape[0]):
        s = S[n]
        a, ad = s[1] + s[2], s[4] + s[5]
        ca, sa = math.cos(a), math.sin(a)
        if n < U.shape[0]:
            u, gx, gz = U[n], fx[n], fz[n]
            mu = abs(gx / gz) if gz != 0 else math.inf
        else:
            u, gx, gz, mu = (math.nan, math.nan), math.nan, math.nan, math.nan
        phase = "pitch" if n < n_pitch or o.vertical is None or o.vertical.iterations == 0 else "vertical"
        rows.append([t[n], t[n] / o.T_C, phase, *s.tolist(), a, -s[0] * ca, s[0] * sa,
                     -(s[3] * ca - s[0] * ad * sa), s[3] * sa + s[0] * ad * ca,
                     u[0], u[1], gx, gz, mu])
    return rows


def ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise InvalidInputError(f"cannot create output directory {path}: {exc}") from exc
