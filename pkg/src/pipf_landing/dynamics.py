"""Planar inverted pendulum with flywheel (PIPF): equations of motion,
Cartesian mapping, ground reaction and non-dimensional scaling.

Sign conventions: the foot is pinned at the origin, ``x`` points forward and
``z`` up.  The attack angle ``alpha = beta + gamma`` is measured from the
backward ground direction, so the body sits at ``(-r cos(alpha), r sin(alpha))``
and increasing ``alpha`` vaults the body forward over the foot.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import InvalidInputError, SingularDynamicsError


def _check_finite(*values):
    for v in values:
        if not math.isfinite(v):
            raise InvalidInputError(f"non-finite value {v!r}")


@dataclass(frozen=True)
class ModelParams:
    m: float = 80.0
    I: float = 3.2
    g: float = 9.8
    r0: float = 1.0

    def __post_init__(self):
        _check_finite(self.m, self.I, self.g, self.r0)
        for name in ("m", "I", "g", "r0"):
            if getattr(self, name) <= 0:
                raise InvalidInputError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def T_C(self) -> float:
        """Characteristic time sqrt(r0 / g) in seconds."""
        return math.sqrt(self.r0 / self.g)

    @property
    def I_nd(self) -> float:
        return self.I / (self.m * self.r0**2)

    @classmethod
    def from_nondim_inertia(cls, I_nd: float, m: float = 80.0, g: float = 9.8, r0: float = 1.0) -> "ModelParams":
        return cls(m=m, I=I_nd * m * r0**2, g=g, r0=r0)


@dataclass(frozen=True)
class PipfState:
    r: float
    beta: float
    gamma: float
    r_dot: float = 0.0
    beta_dot: float = 0.0
    gamma_dot: float = 0.0
    t: float = 0.0

    @property
    def alpha(self) -> float:
        return self.beta + self.gamma

    @property
    def alpha_dot(self) -> float:
        return self.beta_dot + self.gamma_dot

    @property
    def omega(self) -> float:
        return self.gamma_dot

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.beta, self.gamma, self.r_dot, self.beta_dot, self.gamma_dot])

    @classmethod
    def from_array(cls, x, t: float = 0.0) -> "PipfState":
        x = np.asarray(x, dtype=float)
        return cls(*map(float, x[:6]), t=float(t))

    def check(self):
        _check_finite(self.r, self.beta, self.gamma, self.r_dot, self.beta_dot, self.gamma_dot, self.t)


@dataclass(frozen=True)
class ControlInput:
    F: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        _check_finite(self.F, self.tau)


@dataclass(frozen=True)
class FootState:
    x_f: float = 0.0
    z_f: float = 0.0
    x_f_dot: float = 0.0
    z_f_dot: float = 0.0


@dataclass(frozen=True)
class CartesianBodyState:
    x: float
    z: float
    x_dot: float
    z_dot: float

    @property
    def speed(self) -> float:
        return math.hypot(self.x_dot, self.z_dot)

    @property
    def theta(self) -> float:
        """Tilting-down angle of the velocity; positive while descending."""
        return math.atan2(-self.z_dot, self.x_dot)


class GroundReaction(NamedTuple):
    F_fx: float
    F_fz: float
    mu_req: float


class StepResult(NamedTuple):
    state: PipfState
    leg_in_range: bool


def eom_terms(state: PipfState, params: ModelParams):
    """Return ``(M, b, g_vec)`` of ``M Qdd + b + g = F(U)``.

    ``M`` is the upper-triangular matrix exactly as derived; it is not
    symmetrised.
    """
    state.check()
    m, I, g = params.m, params.I, params.g
    r, rd = state.r, state.r_dot
    ad = state.alpha_dot
    M = np.array([[m, 0.0, 0.0],
                  [0.0, m * r * r, m * r * r],
                  [0.0, 0.0, I]])
    b = np.array([-m * r * ad * ad, 2.0 * m * r * rd * ad, 0.0])
    gb, gg = state.beta, state.gamma
    g_vec = np.array([g * m * math.sin(gb + gg),
                      g * (m * math.cos(gb) * math.cos(gg) * r - m * math.sin(gb) * math.sin(gg) * r),
                      0.0])
    return M, b, g_vec


def generalized_force(u: ControlInput) -> np.ndarray:
    return np.array([u.F, u.tau, -u.tau])


def forward_dynamics(state: PipfState, u: ControlInput, params: ModelParams) -> np.ndarray:
    """State derivative ``[Qd, M^-1 (F(U) - b - g)]``."""
    if not state.r > 0:
        raise SingularDynamicsError(f"mass matrix singular for r={state.r}")
    M, b, g_vec = eom_terms(state, params)
    qdd = np.linalg.solve(M, generalized_force(u) - b - g_vec)
    return np.concatenate([[state.r_dot, state.beta_dot, state.gamma_dot], qdd])


def cartesian_body_state(state: PipfState, foot: FootState = FootState()) -> CartesianBodyState:
    a, ad = state.alpha, state.alpha_dot
    r, rd = state.r, state.r_dot
    ca, sa = math.cos(a), math.sin(a)
    return CartesianBodyState(
        x=foot.x_f - r * ca,
        z=foot.z_f + r * sa,
        x_dot=foot.x_f_dot - (rd * ca - r * ad * sa),
        z_dot=foot.z_f_dot + (rd * sa + r * ad * ca),
    )


def body_acceleration(state: PipfState, u: ControlInput, params: ModelParams):
    """Cartesian acceleration ``(xdd, zdd)`` of the body centre during stance."""
    f = forward_dynamics(state, u, params)
    rdd, add = f[3], f[4] + f[5]
    r, rd, a, ad = state.r, state.r_dot, state.alpha, state.alpha_dot
    ca, sa = math.cos(a), math.sin(a)
    xdd = -rdd * ca + 2.0 * rd * ad * sa + r * add * sa + r * ad * ad * ca
    zdd = rdd * sa + 2.0 * rd * ad * ca + r * add * ca - r * ad * ad * sa
    return xdd, zdd


def ground_reaction(state: PipfState, u: ControlInput, params: ModelParams) -> GroundReaction:
    """Foot reaction from Newton's law on the body: ``F_f = m a + m g e_z``."""
    xdd, zdd = body_acceleration(state, u, params)
    fx = params.m * xdd
    fz = params.m * (zdd + params.g)
    mu = abs(fx / fz) if fz != 0.0 else math.inf
    return GroundReaction(fx, fz, mu)


def _rk4(state: PipfState, u: ControlInput, dt: float, params: ModelParams) -> np.ndarray:
    x = state.as_array()

    def f(y):
        return forward_dynamics(PipfState.from_array(y), u, params)

    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_step(state: PipfState, u: ControlInput, dt: float, params: ModelParams) -> StepResult:
    """One classical RK4 step with the control held constant.

    ``leg_in_range`` is False when the leg length leaves ``(0, r0]``; the
    state is returned unclipped.
    """
    if not dt > 0:
        raise InvalidInputError(f"dt must be positive, got {dt}")
    state.check()
    x = _rk4(state, u, dt, params)
    new = PipfState.from_array(x, t=state.t + dt)
    in_range = 0.0 < new.r <= params.r0 * (1.0 + 1e-12)
    return StepResult(new, bool(in_range))


def simulate(state: PipfState, controls, dt: float, params: ModelParams):
    """Integrate a sequence of zero-order-hold controls; returns the list of states."""
    out = [state]
    for u in controls:
        state = integrate_step(state, u, dt, params).state
        out.append(state)
    return out


def mechanical_energy(state: PipfState, params: ModelParams, foot: FootState = FootState()) -> float:
    c = cartesian_body_state(state, foot)
    return (0.5 * params.m * (c.x_dot**2 + c.z_dot**2)
            + 0.5 * params.I * state.gamma_dot**2
            + params.m * params.g * c.z)


# ---------------------------------------------------------------------------
# non-dimensional scaling

_KINDS = ("length", "velocity", "angular_velocity", "force", "torque", "inertia", "angle",
          "time", "acceleration", "angular_acceleration")


def _scale(kind: str, params: ModelParams) -> float:
    m, g, r0 = params.m, params.g, params.r0
    if kind == "length":
        return r0
    if kind == "velocity":
        return math.sqrt(g * r0)
    if kind == "angular_velocity":
        return math.sqrt(g / r0)
    if kind == "force":
        return m * g
    if kind == "torque":
        return m * g * r0
    if kind == "inertia":
        return m * r0 * r0
    if kind == "angle":
        return 1.0
    if kind == "time":
        return params.T_C
    if kind == "acceleration":
        return g
    if kind == "angular_acceleration":
        return g / r0
    raise InvalidInputError(f"unknown quantity kind {kind!r}; expected one of {_KINDS}")


def nondimensionalize(value, kind: str, params: ModelParams):
    return value / _scale(kind, params)


def dimensionalize(value, kind: str, params: ModelParams):
    return value * _scale(kind, params)


_STATE_KINDS = ("length", "angle", "angle", "velocity", "angular_velocity", "angular_velocity", "angular_velocity")


def state_to_nd(state: PipfState, params: ModelParams) -> np.ndarray:
    """``[r~, beta, gamma, r~', beta~', gamma~']`` with rates per unit ``T_C``.

    The leg rate is scaled as a velocity, i.e. ``r_dot / sqrt(g r0)``, which
    equals ``d r~ / d t~``.
    """
    T = params.T_C
    return np.array([state.r / params.r0, state.beta, state.gamma,
                     state.r_dot * T / params.r0, state.beta_dot * T, state.gamma_dot * T])


def state_from_nd(x, params: ModelParams, t_nd: float = 0.0) -> PipfState:
    T = params.T_C
    x = np.asarray(x, dtype=float)
    return PipfState(float(x[0] * params.r0), float(x[1]), float(x[2]),
                     float(x[3] * params.r0 / T), float(x[4] / T), float(x[5] / T), t=float(t_nd * T))


def control_to_nd(u: ControlInput, params: ModelParams) -> np.ndarray:
    return np.array([u.F / (params.m * params.g), u.tau / (params.m * params.g * params.r0)])


def control_from_nd(u, params: ModelParams) -> ControlInput:
    return ControlInput(float(u[0] * params.m * params.g), float(u[1] * params.m * params.g * params.r0))


def with_time(state: PipfState, t: float) -> PipfState:
    return replace(state, t=t)
