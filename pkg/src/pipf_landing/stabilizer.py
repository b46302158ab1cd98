"""First-stance-step landing: iterative pitch stabilization, the vertical
stabilization feasibility check and iterative vertical stabilization."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dynamics import ModelParams
from .errors import InvalidInputError, PreconditionError
from .trajopt import (REVERSED_POISSON, UNIFORM, ConstraintConfig, CostConfig, HorizonSpec,
                      IterationResult, SolverOptions, Status, solve_iteration, z_dot_nd)

HALF_PI = 0.5 * math.pi


class Phase(str, enum.Enum):
    PITCH = "pitch_stabilization"
    VERTICAL = "vertical_stabilization"


class Exit(str, enum.Enum):
    SUCCESS = "success"
    FAILURE = "failure"
    EXHAUSTED = "exhausted"


@dataclass(frozen=True)
class LandingCase:
    """Touchdown conditions, all non-dimensional; ``alpha0`` in radians."""
    omega0: float
    vx0: float
    vz0: float = -0.3
    I_nd: float = 0.04
    alpha0: float = math.radians(60.0)

    @property
    def theta0(self) -> float:
        return math.atan2(-self.vz0, self.vx0)


@dataclass(frozen=True)
class StabilizerConfig:
    eta: float = 0.2
    p: int = 20
    alpha_min: float = math.radians(10.0)
    alpha_max: float = math.radians(170.0)
    eps_gamma: float = 0.05
    eps_gamma_dot: float = 0.05
    eps_z_dot: float = 0.02
    k1_pitch: tuple = (1.0, 10.0, 100.0, 1000.0)
    k2_pitch: float = 1e4
    k3_pitch: float = 1e5
    k1_vertical: tuple = (1e6, 1e7, 1e8)
    k2_vertical: float = 1e3
    k3_vertical: float = 1e3
    z_dot_des: float = 0.01
    gamma_des: float = 0.0
    gamma_dot_des: float = 0.0
    max_iterations: int = 50
    constraints: ConstraintConfig = ConstraintConfig()
    solver: SolverOptions = SolverOptions()

    def __post_init__(self):
        if not 0.0 < self.alpha_min < HALF_PI < self.alpha_max < math.pi:
            raise InvalidInputError("need 0 < alpha_min < pi/2 < alpha_max < pi")
        if min(self.eps_gamma, self.eps_gamma_dot, self.eps_z_dot) <= 0:
            raise InvalidInputError("stabilization thresholds must be positive")
        if not self.eta > 0:
            raise InvalidInputError("eta must be positive")

    def pitch_cost(self, k1: float) -> CostConfig:
        return CostConfig(k1, self.k2_pitch, self.k3_pitch, self.z_dot_des, self.gamma_des,
                          self.gamma_dot_des, REVERSED_POISSON, REVERSED_POISSON, REVERSED_POISSON)

    def vertical_cost(self, k1: float) -> CostConfig:
        return CostConfig(k1, self.k2_vertical, self.k3_vertical, self.z_dot_des, self.gamma_des,
                          self.gamma_dot_des, REVERSED_POISSON, UNIFORM, UNIFORM)


@dataclass
class FeasibilityReport:
    """Bounds on the vertical-stabilization duration (seconds) from the
    state at the end of pitch stabilization."""
    T_lb: float
    T_ub: float
    alpha_ub_vs: float
    alpha_ddot_lb_vs: float
    feasible: bool
    preconditions_met: bool = True
    required: bool = True
    T_C: float = 1.0

    @property
    def eta_T(self) -> float:
        return self.T_ub / self.T_lb if self.T_lb > 0 else math.nan


@dataclass
class PhaseResult:
    phase: Phase
    exit: Exit
    states: np.ndarray
    controls: np.ndarray
    times: np.ndarray
    duration: float
    iterations: int
    k1: float = math.nan
    reason: str = ""
    solves: list = field(default_factory=list, repr=False)

    @property
    def terminal_state(self) -> np.ndarray:
        return self.states[-1]


@dataclass
class LandingOutcome:
    case: LandingCase
    success: bool
    pitch: PhaseResult | None
    vertical: PhaseResult | None
    feasibility: FeasibilityReport | None
    T_vs_star: float = math.nan
    terminal_state: np.ndarray | None = None
    min_F_fz: float = math.nan
    max_mu: float = math.nan
    reason: str = ""
    tag: str = "dynamic"
    T_C: float = 1.0

    @property
    def phase_results(self):
        return [r for r in (self.pitch, self.vertical) if r is not None]

    def trajectory(self):
        """Concatenated ``(states, controls, times)`` of both phases; times in seconds."""
        parts = self.phase_results
        if not parts:
            return np.empty((0, 6)), np.empty((0, 2)), np.empty(0)
        S = [parts[0].states]
        U = [parts[0].controls]
        t = [parts[0].times]
        for ph in parts[1:]:
            if ph.iterations:
                S.append(ph.states[1:])
                U.append(ph.controls)
                t.append(ph.times[1:])
        return np.vstack(S), np.vstack(U), np.concatenate(t)


def touchdown_state(case: LandingCase) -> np.ndarray:
    """Non-dimensional stance state at touchdown with ``r = r0``, the foot at
    the origin and the initial pitch equal to the incidence angle."""
    a = case.alpha0
    if not 0.0 < a < math.pi:
        raise InvalidInputError(f"attack angle must be in (0, pi), got {a}")
    gamma = case.theta0
    ca, sa = math.cos(a), math.sin(a)
    # [xd, zd] = [[-cos a, r sin a], [sin a, r cos a]] [rd, ad]  with r = 1
    A = np.array([[-ca, sa], [sa, ca]])
    rd, ad = np.linalg.solve(A, [case.vx0, case.vz0])
    return np.array([1.0, a - gamma, gamma, rd, ad - case.omega0, case.omega0])


def pitch_horizon(v_x0_nd: float, eta: float, params: ModelParams, t0: float = 0.0, p: int = 20) -> HorizonSpec:
    """``T_h = eta * T_C / v_x0`` (seconds)."""
    if not v_x0_nd > 0:
        raise InvalidInputError(f"horizontal touchdown speed must be positive, got {v_x0_nd}")
    return HorizonSpec(eta / v_x0_nd * params.T_C, p, t0)


def vertical_horizon(report: FeasibilityReport, eta: float, t0: float = 0.0, p: int = 20) -> HorizonSpec:
    """``T_h = eta * T_lb`` (seconds)."""
    if not report.feasible:
        raise PreconditionError("vertical stabilization is infeasible for this report")
    return HorizonSpec(eta * report.T_lb, p, t0)


def feasibility_bounds(v_z1: float, alpha1: float, alpha_dot1: float, r1: float, I_nd: float,
                       F_max: float):
    """Closed-form bounds, all non-dimensional (time in units of ``T_C``).

    Returns ``(T_lb, T_ub, alpha_ub_vs, alpha_ddot_lb_vs)``; undefined values
    come back as nan.
    """
    alpha_ub = HALF_PI + math.acos(1.0 / F_max) if F_max >= 1.0 else math.nan
    acc_lb = -math.cos(alpha1) / (1.0 + I_nd) * r1
    net = F_max * math.sin(alpha1) - 1.0
    T_lb = -v_z1 / net if net > 0 else math.nan
    disc = alpha_dot1**2 + 2.0 * acc_lb * (alpha_ub - alpha1)
    if acc_lb != 0.0 and disc >= 0.0 and math.isfinite(alpha_ub):
        T_ub = (-alpha_dot1 + math.sqrt(disc)) / acc_lb
    else:
        T_ub = math.nan
    return T_lb, T_ub, alpha_ub, acc_lb


def vertical_feasibility(x1, params: ModelParams, F_max_nd: float = 2.0) -> FeasibilityReport:
    """Feasibility of vertical stabilization from the non-dimensional state ``x1``.

    Raises PreconditionError when ``alpha1 <= pi/2``.
    """
    x1 = np.asarray(x1, dtype=float)
    alpha1 = x1[1] + x1[2]
    alpha_dot1 = x1[4] + x1[5]
    if not alpha1 > HALF_PI:
        raise PreconditionError(f"attack angle {math.degrees(alpha1):.2f} deg has not passed pi/2")
    a = alpha1
    vx1 = -(x1[3] * math.cos(a) - x1[0] * alpha_dot1 * math.sin(a))
    vz1 = float(z_dot_nd(x1)[0])
    pre = vx1 > 0 and vz1 < 0 and alpha_dot1 > 0
    T_lb, T_ub, a_ub, acc_lb = feasibility_bounds(vz1, alpha1, alpha_dot1, x1[0], params.I_nd, F_max_nd)
    feasible = bool(T_lb > 0 and T_ub > 0 and T_lb < T_ub)
    T = params.T_C
    return FeasibilityReport(T_lb * T, T_ub * T, a_ub, acc_lb / T**2, feasible, bool(pre), True, T)


def _leg_must_extend(x, con: ConstraintConfig) -> bool:
    """True when the leg is extending and even the smallest leg force cannot
    stop it before full length (instantaneous deceleration estimate)."""
    a, ad = x[1] + x[2], x[4] + x[5]
    if not x[3] > 0:
        return False
    acc = x[0] * ad * ad - math.sin(a) + con.U_min[0]
    room = con.Q_max[0] - x[0]
    return bool(acc >= 0 or x[3] * x[3] / (-2.0 * acc) > room)


def _run_phase(phase, x0, t0, T_h, cost_cfg, cfg: StabilizerConfig, params, alpha_hi, stabilized):
    """Iterate horizons until ``stabilized(state)`` or alpha leaves the window."""
    states = [np.asarray(x0, dtype=float)[None, :]]
    controls = []
    times = [np.array([t0])]
    solves = []
    x, t, warm = np.asarray(x0, dtype=float), t0, None
    exit_, reason, it = Exit.EXHAUSTED, "iteration limit", 0
    T = params.T_C
    for it in range(1, cfg.max_iterations + 1):
        res = solve_iteration(x, HorizonSpec(T_h, cfg.p, t), cost_cfg, cfg.constraints, warm,
                              params=params, options=cfg.solver)
        if res.status is not Status.CONVERGED:
            exit_, reason = Exit.FAILURE, f"solver {res.status.value}"
            if _leg_must_extend(x, cfg.constraints):
                reason += " (leg force cannot hold stance: body lifts off)"
            break
        solves.append(res)
        states.append(res.states[1:])
        controls.append(res.controls)
        times.append(res.times[1:] * T)
        alpha = res.states[:, 1] + res.states[:, 2]
        left_window = bool(np.any(alpha <= cfg.alpha_min) or np.any(alpha >= alpha_hi))
        end = res.states[-1]
        if stabilized(end) and not left_window:
            exit_, reason = Exit.SUCCESS, ""
            break
        if left_window:
            exit_, reason = Exit.FAILURE, "attack angle left feasible window"
            break
        x, t, warm = end, t + T_h, res
    S = np.vstack(states)
    U = np.vstack(controls) if controls else np.empty((0, 2))
    tt = np.concatenate(times)
    return PhaseResult(phase, exit_, S, U, tt, float(tt[-1] - tt[0]), len(solves), cost_cfg.k1, reason, solves)


def pitch_stabilize(x0, cfg: StabilizerConfig, params: ModelParams, v_x0_nd: float, k1: float | None = None,
                    t0: float = 0.0) -> PhaseResult:
    """Pitch stabilization from the touchdown state ``x0`` (non-dimensional).

    Succeeds once pitch and pitch rate sit within their thresholds at the end
    of an iteration with ``alpha >= pi/2``; fails when alpha leaves
    ``(alpha_min, alpha_max)`` first.
    """
    k1 = cfg.k1_pitch[0] if k1 is None else k1
    H = pitch_horizon(v_x0_nd, cfg.eta, params, t0, cfg.p)

    def done(s):
        return (abs(s[2] - cfg.gamma_des) < cfg.eps_gamma
                and abs(s[5] - cfg.gamma_dot_des) < cfg.eps_gamma_dot
                and s[1] + s[2] >= HALF_PI)

    x0 = np.asarray(x0, dtype=float)
    if done(x0):
        return PhaseResult(Phase.PITCH, Exit.SUCCESS, x0[None, :], np.empty((0, 2)),
                           np.array([t0]), 0.0, 0, k1)
    return _run_phase(Phase.PITCH, x0, t0, H.T_h, cfg.pitch_cost(k1), cfg, params, cfg.alpha_max, done)


def vertical_stabilize(x1, report: FeasibilityReport, cfg: StabilizerConfig, params: ModelParams,
                       k1: float | None = None, t0: float = 0.0) -> PhaseResult:
    """Vertical stabilization from ``x1``; alpha is additionally capped by
    the zero-net-vertical-force angle of the report."""
    k1 = cfg.k1_vertical[0] if k1 is None else k1
    x1 = np.asarray(x1, dtype=float)

    def done(s):
        return abs(float(z_dot_nd(s)[0]) - cfg.z_dot_des) < cfg.eps_z_dot

    if done(x1):
        return PhaseResult(Phase.VERTICAL, Exit.SUCCESS, x1[None, :], np.empty((0, 2)),
                           np.array([t0]), 0.0, 0, k1)
    H = vertical_horizon(report, cfg.eta, t0, cfg.p)
    alpha_hi = min(cfg.alpha_max, report.alpha_ub_vs)
    return _run_phase(Phase.VERTICAL, x1, t0, H.T_h, cfg.vertical_cost(k1), cfg, params, alpha_hi, done)


def grf_nd(states, controls, I_nd: float):
    """Non-dimensional ground reaction ``(F_fx, F_fz)`` at each (state, control) pair."""
    S = np.atleast_2d(states)
    U = np.atleast_2d(controls)
    f = kernels.rhs_batch(S, U, I_nd)
    r, rd = S[:, 0], S[:, 3]
    a = S[:, 1] + S[:, 2]
    ad = S[:, 4] + S[:, 5]
    rdd, add = f[:, 3], f[:, 4] + f[:, 5]
    ca, sa = np.cos(a), np.sin(a)
    xdd = -rdd * ca + 2.0 * rd * ad * sa + r * add * sa + r * ad * ad * ca
    zdd = rdd * sa + 2.0 * rd * ad * ca + r * add * ca - r * ad * ad * sa
    return xdd, zdd + 1.0


def first_stance_step(case: LandingCase, cfg: StabilizerConfig = StabilizerConfig(),
                      params: ModelParams | None = None) -> LandingOutcome:
    """Pitch stabilization, feasibility check and vertical stabilization.

    Each phase tries its k1 candidates in ascending order and keeps the first
    success.  When the vertical velocity already sits within its threshold
    at the end of pitch stabilization the vertical phase is not needed and
    the report is marked ``required=False``.
    """
    if params is None:
        params = ModelParams.from_nondim_inertia(case.I_nd)
    elif not math.isclose(params.I_nd, case.I_nd, rel_tol=1e-12):
        raise InvalidInputError("case inertia does not match model parameters")
    T = params.T_C
    x0 = touchdown_state(case)
    out = LandingOutcome(case, False, None, None, None, T_C=T)

    pitch = None
    for k1 in cfg.k1_pitch:
        pitch = pitch_stabilize(x0, cfg, params, case.vx0, k1)
        if pitch.exit is Exit.SUCCESS:
            break
    out.pitch = pitch
    out.terminal_state = pitch.terminal_state
    if pitch.exit is not Exit.SUCCESS:
        out.reason = f"pitch stabilization {pitch.exit.value}: {pitch.reason}"
        return out

    x1 = pitch.terminal_state
    t1 = float(pitch.times[-1])
    vertical_done = abs(float(z_dot_nd(x1)[0]) - cfg.z_dot_des) < cfg.eps_z_dot
    try:
        report = vertical_feasibility(x1, params, cfg.constraints.F_max)
    except PreconditionError as exc:
        report = FeasibilityReport(math.nan, math.nan, math.nan, math.nan, False, False, True, T)
        if not vertical_done:
            out.feasibility = report
            out.reason = f"feasibility precondition: {exc}"
            return out
    if vertical_done:
        report.required = False
        out.feasibility = report
        out.vertical = PhaseResult(Phase.VERTICAL, Exit.SUCCESS, x1[None, :], np.empty((0, 2)),
                                   np.array([t1]), 0.0, 0)
        out.T_vs_star = 0.0
        out.success = True
        _attach_grf(out, params)
        return out
    out.feasibility = report
    if not report.feasible:
        out.reason = "vertical stabilization infeasible"
        return out

    vertical = None
    for k1 in cfg.k1_vertical:
        vertical = vertical_stabilize(x1, report, cfg, params, k1, t1)
        if vertical.exit is Exit.SUCCESS:
            break
    out.vertical = vertical
    out.terminal_state = vertical.terminal_state
    if vertical.exit is not Exit.SUCCESS:
        out.reason = f"vertical stabilization {vertical.exit.value}: {vertical.reason}"
        return out
    out.T_vs_star = vertical.duration
    out.success = True
    _attach_grf(out, params)
    return out


def _attach_grf(out: LandingOutcome, params: ModelParams):
    S, U, _ = out.trajectory()
    if U.shape[0] == 0:
        return
    fx, fz = grf_nd(S[:-1], U, params.I_nd)
    out.min_F_fz = float(np.min(fz))
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = np.abs(fx / fz)
    out.max_mu = float(np.max(mu))
