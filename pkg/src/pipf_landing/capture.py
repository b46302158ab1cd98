"""Linear inverted pendulum (LIP) capture point and a greedy N-step
capturability follower used after the first stance step."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ModelParams
from .errors import InvalidInputError


@dataclass(frozen=True)
class LipState:
    """Body position ``x`` (m), velocity ``x_dot`` (m/s) and constant height ``z`` (m)."""
    x: float
    x_dot: float
    z: float

    def __post_init__(self):
        for v in (self.x, self.x_dot, self.z):
            if not math.isfinite(v):
                raise InvalidInputError(f"non-finite LIP state value {v!r}")


@dataclass(frozen=True)
class CaptureSpec:
    eta_vx: float = 1.5
    alpha_0: float = math.radians(60.0)
    reach: float = math.cos(math.radians(10.0))

    def __post_init__(self):
        if not self.eta_vx > 1.0:
            raise InvalidInputError(f"amplifying factor must exceed 1, got {self.eta_vx}")
        if not self.reach > 0:
            raise InvalidInputError("reach must be positive")

    @property
    def min_speed(self) -> float:
        return min_horizontal_speed(self.alpha_0, self.eta_vx)


@dataclass
class StepPlan:
    """Foot placements (m) and the LIP state just before each placement."""
    captured: bool
    footholds: list = field(default_factory=list)
    velocities: list = field(default_factory=list)
    final: LipState | None = None

    @property
    def steps(self) -> int:
        return len(self.footholds)


def capture_point(s: LipState, g: float = 9.8) -> float:
    """``x + x_dot * sqrt(z / g)``."""
    if not s.z > 0:
        raise InvalidInputError(f"pendulum height must be positive, got {s.z}")
    if not g > 0:
        raise InvalidInputError("gravity must be positive")
    return s.x + s.x_dot * math.sqrt(s.z / g)


def min_horizontal_speed(alpha_0: float, eta_vx: float = 1.5) -> float:
    """Smallest non-dimensional touchdown speed whose capture point lies
    ``eta_vx`` times beyond the horizontal leg reach at touchdown."""
    if not 0.0 < alpha_0 < 0.5 * math.pi:
        raise InvalidInputError(f"attack angle must lie in (0, pi/2), got {alpha_0}")
    return eta_vx * math.cos(alpha_0) / math.sqrt(math.sin(alpha_0))


def truncate2(v: float) -> float:
    """Cut to two decimals toward zero; the grid speed spans use this convention."""
    return math.trunc(round(v * 100.0, 9)) / 100.0


def lip_evolve(s: LipState, foot: float, t: float, g: float = 9.8) -> LipState:
    """Closed-form LIP motion about a fixed foot for time ``t``."""
    w = math.sqrt(g / s.z)
    d0 = s.x - foot
    ch, sh = math.cosh(w * t), math.sinh(w * t)
    return LipState(foot + d0 * ch + s.x_dot / w * sh, d0 * w * sh + s.x_dot * ch, s.z)


def n_step_capture(s: LipState, N: int, reach: float, g: float = 9.8, step_time: float | None = None,
                   foot: float | None = None, r0: float = 1.0) -> StepPlan:
    """Greedy stepping toward the instantaneous capture point.

    ``foot`` is the current stance foot (defaults to directly under the body).
    Each step lands at the capture point when it is within ``reach`` of the
    body, otherwise at full reach toward it; the LIP then evolves for
    ``step_time`` (default half of ``sqrt(r0 / g)``) before the next step.
    """
    if N < 0:
        raise InvalidInputError("N must be nonnegative")
    if not reach > 0:
        raise InvalidInputError("reach must be positive")
    if step_time is None:
        step_time = 0.5 * math.sqrt(r0 / g)
    foot = s.x if foot is None else foot
    tol = 1e-12 * max(1.0, reach)
    plan = StepPlan(False)
    xc = capture_point(s, g)
    if abs(xc - foot) <= tol:
        plan.captured, plan.final = True, s
        return plan
    for _ in range(N):
        offset = xc - s.x
        plan.velocities.append(s.x_dot)
        if abs(offset) <= reach + tol:
            plan.footholds.append(xc)
            plan.captured = True
            plan.final = s
            return plan
        foot = s.x + math.copysign(reach, offset)
        plan.footholds.append(foot)
        s = lip_evolve(s, foot, step_time, g)
        xc = capture_point(s, g)
    plan.final = s
    return plan


def lip_handoff(state_nd, params: ModelParams) -> LipState:
    """LIP state (SI units) from a non-dimensional stance state with the foot
    at the origin: terminal body height and horizontal velocity."""
    x = np.asarray(state_nd, dtype=float)
    a, ad = x[1] + x[2], x[4] + x[5]
    r, rd = x[0], x[3]
    vs = math.sqrt(params.g * params.r0)
    return LipState(float(-r * math.cos(a) * params.r0),
                    float(-(rd * math.cos(a) - r * ad * math.sin(a)) * vs),
                    float(r * math.sin(a) * params.r0))
