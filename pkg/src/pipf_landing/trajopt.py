"""Direct-transcription trajectory optimization over one short horizon.

States and controls at every knot are decision variables; consecutive knots
are tied by RK4 defect constraints under zero-order-hold controls.  The NLP
is solved by a bound-constrained augmented Lagrangian (outer loop).  Because
the tracking cost is a weighted sum of squares, each inner subproblem is a
bound-constrained nonlinear least-squares problem, solved by projected
Gauss-Newton (default) or, optionally, L-BFGS-B / scipy's TRF.  Everything here is non-dimensional.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, minimize

from . import kernels
from .dynamics import ModelParams, PipfState, state_to_nd
from .errors import InvalidInputError

PI = math.pi


class Status(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class HorizonSpec:
    T_h: float
    p: int = 20
    t0: float = 0.0

    def __post_init__(self):
        if not (self.T_h > 0 and math.isfinite(self.T_h)):
            raise InvalidInputError(f"horizon length must be positive, got {self.T_h}")
        if self.p < 2:
            raise InvalidInputError(f"need at least 2 steps, got {self.p}")

    @property
    def T_s(self) -> float:
        return self.T_h / self.p


@dataclass(frozen=True)
class Discount:
    kind: str = "reversed_poisson"
    lam: float = 1.0


UNIFORM = Discount("uniform")
REVERSED_POISSON = Discount("reversed_poisson", 1.0)


def discount_sequence(kind, p: int, lam: float = 1.0) -> np.ndarray:
    """Per-step weights ``xi_1..xi_p``.

    ``uniform`` gives ``1/p`` each.  ``reversed_poisson`` gives
    ``xi_n = exp(-lam) lam^(p-n) / (p-n)!`` so the last step carries the
    largest weight; the sum is the Poisson CDF at ``p - 1`` and never exceeds 1.
    """
    if isinstance(kind, Discount):
        kind, lam = kind.kind, kind.lam
    if p < 1:
        raise InvalidInputError(f"p must be >= 1, got {p}")
    if kind == "uniform":
        return np.full(p, 1.0 / p)
    if kind in ("reversed_poisson", "poisson"):
        if not lam > 0:
            raise InvalidInputError(f"lambda must be positive, got {lam}")
        k = np.arange(p - 1, -1, -1)
        logpmf = -lam + k * math.log(lam) - np.array([math.lgamma(j + 1) for j in k])
        return np.exp(logpmf)
    raise InvalidInputError(f"unknown discount kind {kind!r}")


@dataclass(frozen=True)
class CostConfig:
    k1: float = 1.0
    k2: float = 1e4
    k3: float = 1e5
    z_dot_des: float = 0.01
    gamma_des: float = 0.0
    gamma_dot_des: float = 0.0
    xi_z_dot: Discount = REVERSED_POISSON
    xi_gamma: Discount = REVERSED_POISSON
    xi_gamma_dot: Discount = REVERSED_POISSON

    def __post_init__(self):
        if min(self.k1, self.k2, self.k3) <= 0:
            raise InvalidInputError("cost weights must be positive")

    def weights(self, p: int):
        """Per-knot weights on ``(z_dot, gamma, gamma_dot)`` for knots 1..p."""
        return (self.k1 * discount_sequence(self.xi_z_dot, p),
                self.k2 * discount_sequence(self.xi_gamma, p),
                self.k3 * discount_sequence(self.xi_gamma_dot, p))


@dataclass(frozen=True)
class ConstraintConfig:
    Q_min: tuple = (0.4, 0.0, -PI / 2)
    Q_max: tuple = (1.0, PI, PI / 2)
    U_min: tuple = (0.0, -1.0)
    U_max: tuple = (2.0, 1.0)

    def __post_init__(self):
        if any(lo > hi for lo, hi in zip(self.Q_min, self.Q_max)) or \
                any(lo > hi for lo, hi in zip(self.U_min, self.U_max)):
            raise InvalidInputError("bounds must satisfy min <= max")

    @property
    def F_max(self) -> float:
        return float(self.U_max[0])

    def state_bounds(self):
        lo = np.array(list(self.Q_min) + [-np.inf] * 3)
        hi = np.array(list(self.Q_max) + [np.inf] * 3)
        return lo, hi

    def control_bounds(self):
        return np.array(self.U_min, dtype=float), np.array(self.U_max, dtype=float)


@dataclass(frozen=True)
class SolverOptions:
    tol_constraint: float = 1e-6
    tol_optimality: float = 1e-5
    max_outer: int = 200
    rho0: float = 100.0
    rho_max: float = 1e10
    max_inner: int = 500
    stall_limit: int = 8
    inner: str = "gauss_newton"
    # tiny pull toward (F, tau) = control_ref; breaks ties between controls the
    # tracking cost cannot distinguish.  Weight is relative to max(k1, k2, k3)
    # and is excluded from the reported objective.
    control_reg: float = 1e-9
    control_ref: tuple = (1.0, 0.0)


@dataclass
class IterationResult:
    """One solved horizon.  ``states`` is ``(p+1, 6)``, ``controls`` ``(p, 2)``,
    ``times`` ``(p+1,)`` in units of ``T_C``."""
    states: np.ndarray
    controls: np.ndarray
    times: np.ndarray
    objective: float
    status: Status
    max_defect: float = 0.0
    optimality: float = 0.0
    outer_iterations: int = 0
    inner_iterations: int = 0
    multipliers: np.ndarray | None = field(default=None, repr=False)
    rho: float = 0.0

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


def z_dot_nd(states) -> np.ndarray:
    """Non-dimensional vertical body velocity of each state row (foot pinned)."""
    S = np.atleast_2d(states)
    a = S[:, 1] + S[:, 2]
    return S[:, 3] * np.sin(a) + S[:, 0] * (S[:, 4] + S[:, 5]) * np.cos(a)


def cost(states, cost_cfg: CostConfig, p: int | None = None) -> float:
    """Tracking cost ``J_L + J_M`` over knots ``1..p`` of a ``(p+1, 6)`` state array."""
    S = np.asarray(states, dtype=float)
    if p is None:
        p = S.shape[0] - 1
    if S.ndim != 2 or S.shape[0] != p + 1:
        raise InvalidInputError(f"expected {p + 1} states, got {S.shape[0] if S.ndim else 0}")
    wz, wg, wgd = cost_cfg.weights(p)
    ez = z_dot_nd(S[1:]) - cost_cfg.z_dot_des
    eg = S[1:, 2] - cost_cfg.gamma_des
    egd = S[1:, 5] - cost_cfg.gamma_dot_des
    return float(np.sum(wz * ez**2) + np.sum(wg * eg**2) + np.sum(wgd * egd**2))


def hover_controls(x0, p: int, con_cfg: ConstraintConfig) -> np.ndarray:
    """Leg force balancing gravity along the leg, zero torque."""
    F = math.sin(x0[1] + x0[2]) * x0[0]
    lo, hi = con_cfg.control_bounds()
    u = np.clip(np.array([F, 0.0]), lo, hi)
    return np.tile(u, (p, 1))


def _as_nd(x0, params):
    if isinstance(x0, PipfState):
        if params is None:
            raise InvalidInputError("params required for a dimensional state")
        return state_to_nd(x0, params)
    return np.asarray(x0, dtype=float)


def _guess_from(x0, warm: IterationResult | None, p, h, inertia, con_cfg):
    slo, shi = con_cfg.state_bounds()
    if warm is None:
        S = np.tile(x0, (p, 1))
        U = hover_controls(x0, p, con_cfg)
    else:
        U = np.asarray(warm.controls, dtype=float)
        if U.shape[0] != p:
            U = hover_controls(x0, p, con_cfg)
        with np.errstate(all="ignore"):
            S = kernels.rollout(x0, np.ascontiguousarray(U), h, inertia)[1:]
        if not np.all(np.isfinite(S)):
            S = np.tile(x0, (p, 1))
    return np.clip(S, slo, shi), U


def solve_iteration(x0, horizon: HorizonSpec, cost_cfg: CostConfig, con_cfg: ConstraintConfig,
                    warm_start: IterationResult | None = None, *, params: ModelParams | None = None,
                    inertia_nd: float | None = None, options: SolverOptions = SolverOptions()) -> IterationResult:
    """Solve one horizon from ``x0`` (non-dimensional 6-vector or a PipfState).

    ``horizon.T_h`` and ``horizon.t0`` are in seconds, so ``params`` is needed
    unless the caller works in ``T_C`` units and passes ``inertia_nd``.
    A ``warm_start`` whose first knot equals ``x0`` resumes from its iterate
    and multipliers; any other warm start seeds the controls and re-rolls
    the states from ``x0``.
    """
    x0 = _as_nd(x0, params)
    if params is not None:
        inertia = params.I_nd
        tscale = params.T_C
    else:
        if inertia_nd is None:
            raise InvalidInputError("need params or inertia_nd")
        inertia = float(inertia_nd)
        tscale = 1.0
    p = horizon.p
    h = horizon.T_s / tscale
    t0 = horizon.t0 / tscale
    times = t0 + h * np.arange(p + 1)
    if not np.all(np.isfinite(x0)):
        raise InvalidInputError("non-finite initial state")

    slo, shi = con_cfg.state_bounds()
    ulo, uhi = con_cfg.control_bounds()
    if np.any(x0 < slo - 1e-9) or np.any(x0 > shi + 1e-9) or x0[0] <= 0:
        S = np.tile(x0, (p, 1))
        return IterationResult(np.vstack([x0, S]), hover_controls(x0, p, con_cfg), times, math.nan,
                               Status.INFEASIBLE)

    scale = max(cost_cfg.k1, cost_cfg.k2, cost_cfg.k3)
    wz, wg, wgd = (w / scale for w in cost_cfg.weights(p))
    targets = (cost_cfg.z_dot_des, cost_cfg.gamma_des, cost_cfg.gamma_dot_des)

    resume = (warm_start is not None and warm_start.multipliers is not None
              and warm_start.states.shape[0] == p + 1
              and np.array_equal(warm_start.states[0], x0))
    if resume:
        S, U = warm_start.states[1:], warm_start.controls
        lam = warm_start.multipliers.copy()
        rho = warm_start.rho
    else:
        S, U = _guess_from(x0, warm_start, p, h, inertia, con_cfg)
        lam = np.zeros((p, kernels.NX))
        rho = options.rho0
    z = np.concatenate([np.ascontiguousarray(S).ravel(), np.ascontiguousarray(U).ravel()])
    lo = np.concatenate([np.tile(slo, p), np.tile(ulo, p)])
    hi = np.concatenate([np.tile(shi, p), np.tile(uhi, p)])
    z = np.clip(z, lo, hi)
    bounds = list(zip(np.where(np.isfinite(lo), lo, None), np.where(np.isfinite(hi), hi, None)))

    z, lam, rho, status, viol, opt, outer, inner = _augmented_lagrangian(
        z, x0, h, inertia, wz, wg, wgd, targets, lam, rho, lo, hi, bounds, options)

    S = z[:p * kernels.NX].reshape(p, kernels.NX)
    U = z[p * kernels.NX:].reshape(p, kernels.NU)
    states = np.vstack([x0, S])
    return IterationResult(states, U.copy(), times, cost(states, cost_cfg, p), status,
                           max_defect=viol, optimality=opt, outer_iterations=outer,
                           inner_iterations=inner, multipliers=lam, rho=rho)


class _Inner:
    def __init__(self, x):
        self.x = x


def _projected_gradient(z, g, lo, hi):
    return np.max(np.abs(z - np.clip(z - g, lo, hi)))


def _augmented_lagrangian(z, s0, h, inertia, wz, wg, wgd, targets, lam, rho, lo, hi, bounds, opts):
    """Bound-constrained augmented Lagrangian loop (Conn, Gould & Toint style).

    Returns ``(z, lam, rho, status, max_violation, optimality, outer, inner)``.
    """
    zd, gd, gdd = targets
    sz, sg, sgd = np.sqrt(2.0 * wz), np.sqrt(2.0 * wg), np.sqrt(2.0 * wgd)
    wu = np.full(kernels.NU, float(opts.control_reg))
    su = np.sqrt(2.0 * wu)
    uref = np.asarray(opts.control_ref, dtype=float)
    eta_star, omega_star = opts.tol_constraint, opts.tol_optimality
    omega = max(1.0 / rho, omega_star)
    eta = max(1.0 / rho**0.1, eta_star)
    inner_total = 0
    stalled = 0
    best = viol = opt = math.inf
    for outer in range(1, opts.max_outer + 1):
        lam_c, rho_c = lam, rho

        if opts.inner == "lbfgsb":
            def fun(x):
                L, g, _, _ = kernels.al_eval(x, s0, h, inertia, wz, wg, wgd, zd, gd, gdd, wu, uref, lam_c, rho_c)
                return L, g

            with np.errstate(all="ignore"):
                res = minimize(fun, z, jac=True, method="L-BFGS-B", bounds=bounds,
                               options=dict(maxiter=opts.max_inner, gtol=0.1 * omega, ftol=1e-16,
                                            maxcor=30, maxls=40))
            inner_total += int(res.nit)
        elif opts.inner == "scipy_trf":
            def resid(x):
                return kernels.al_residuals(x, s0, h, inertia, sz, sg, sgd, zd, gd, gdd, su, uref, lam_c, rho_c)[0]

            def jac(x):
                return kernels.al_residuals(x, s0, h, inertia, sz, sg, sgd, zd, gd, gdd, su, uref, lam_c, rho_c)[1]

            with np.errstate(all="ignore"):
                res = least_squares(resid, z, jac=jac, bounds=(lo, hi), method="trf",
                                    ftol=1e-15, xtol=1e-15, gtol=0.1 * omega,
                                    max_nfev=opts.max_inner, x_scale="jac")
            inner_total += int(res.nfev)
        else:
            with np.errstate(all="ignore"):
                znew, nit, _ = kernels.projected_gauss_newton(
                    z, lo, hi, s0, h, inertia, sz, sg, sgd, zd, gd, gdd, su, uref, lam_c, rho_c,
                    0.1 * omega, opts.max_inner)
            inner_total += int(nit)
            res = _Inner(znew)
        if np.all(np.isfinite(res.x)):
            z = np.clip(res.x, lo, hi)
        _, g, _, c = kernels.al_eval(z, s0, h, inertia, wz, wg, wgd, zd, gd, gdd, wu, uref, lam, rho)
        viol = float(np.max(np.abs(c)))
        opt = float(_projected_gradient(z, g, lo, hi))
        if not math.isfinite(viol):
            return z, lam, rho, Status.MAX_ITERATIONS, viol, opt, outer, inner_total
        if viol < 0.9 * best:
            best, stalled = viol, 0
        else:
            stalled += 1
            if stalled >= opts.stall_limit:
                return z, lam, rho, Status.MAX_ITERATIONS, viol, opt, outer, inner_total
        if viol <= eta:
            if viol <= eta_star and opt <= omega_star:
                return z, lam, rho, Status.CONVERGED, viol, opt, outer, inner_total
            lam = lam + rho * c
            eta = max(eta / rho**0.9, eta_star)
            omega = max(omega / rho, omega_star)
        else:
            rho = min(rho * 10.0, opts.rho_max)
            eta = max(1.0 / rho**0.1, eta_star)
            omega = max(1.0 / rho, omega_star)
    return z, lam, rho, Status.MAX_ITERATIONS, viol, opt, opts.max_outer, inner_total
