"""Initial-condition grids, parallel landing sweeps, performance maps and
linear success-boundary regression."""
from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .capture import min_horizontal_speed, truncate2
from .dynamics import ModelParams
from .errors import InvalidInputError
from .stabilizer import LandingCase, LandingOutcome, StabilizerConfig, first_stance_step

VX_SPAN = 1.2


def rod_inertia(eta_l: float) -> float:
    """Non-dimensional inertia of a uniform rod of length ``eta_l * r0``."""
    if not eta_l > 0:
        raise InvalidInputError(f"length factor must be positive, got {eta_l}")
    return eta_l * eta_l / 12.0


@dataclass(frozen=True)
class SweepSpec:
    omega0_range: tuple = (1.0, 5.0)
    vx0_range: tuple | None = None
    vz0: float = -0.3
    I_nd: float = 0.04
    alpha_0: float = math.radians(60.0)
    grid: tuple = (21, 13)
    eta_vx: float = 1.5

    def __post_init__(self):
        lo, hi = self.omega0_range
        if not lo < hi:
            raise InvalidInputError(f"empty omega0 range {self.omega0_range}")
        if self.vx0_range is not None and not self.vx0_range[0] < self.vx0_range[1]:
            raise InvalidInputError(f"empty vx0 range {self.vx0_range}")
        if len(self.grid) != 2 or min(self.grid) < 2:
            raise InvalidInputError(f"grid counts must be at least 2, got {self.grid}")
        if not self.I_nd > 0:
            raise InvalidInputError("inertia must be positive")

    @property
    def vx_range(self) -> tuple:
        if self.vx0_range is not None:
            return tuple(map(float, self.vx0_range))
        lo = truncate2(min_horizontal_speed(self.alpha_0, self.eta_vx))
        return lo, round(lo + VX_SPAN, 10)

    @property
    def omega_values(self) -> np.ndarray:
        return np.linspace(*self.omega0_range, self.grid[0])

    @property
    def vx_values(self) -> np.ndarray:
        return np.linspace(*self.vx_range, self.grid[1])


def build_grid(spec: SweepSpec) -> list[LandingCase]:
    """Row-major lattice: index ``i * n_vx + j`` holds ``(omega_i, vx_j)``."""
    return [LandingCase(float(w), float(v), spec.vz0, spec.I_nd, spec.alpha_0)
            for w in spec.omega_values for v in spec.vx_values]


@dataclass(frozen=True)
class BoundaryFit:
    slope: float
    intercept: float
    r_squared: float
    n: int


@dataclass
class GrfFactorSummary:
    """Per successful case: ``(index, min F_fz, max mu)``."""
    entries: list = field(default_factory=list)

    @property
    def min_F_fz(self) -> np.ndarray:
        return np.array([e[1] for e in self.entries])

    @property
    def max_mu(self) -> np.ndarray:
        return np.array([e[2] for e in self.entries])

    def fraction_mu_below(self, limit: float) -> float:
        mu = self.max_mu
        return float(np.mean(mu < limit)) if mu.size else math.nan


@dataclass
class PerformanceMap:
    spec: SweepSpec | None
    cases: list
    outcomes: list
    shape: tuple | None = None
    boundary: BoundaryFit | None = None
    neighbor_set: list = field(default_factory=list)

    @property
    def success(self) -> np.ndarray:
        s = np.array([o.success for o in self.outcomes], dtype=bool)
        return s.reshape(self.shape) if self.shape else s

    @property
    def success_rate(self) -> float:
        return float(np.mean(self.success)) if self.outcomes else math.nan

    def grf_summary(self) -> GrfFactorSummary:
        return GrfFactorSummary([(k, o.min_F_fz, o.max_mu) for k, o in enumerate(self.outcomes)
                                 if o.success and math.isfinite(o.min_F_fz)])

    def outcome_at(self, omega0: float, vx0: float, tol: float = 1e-9) -> LandingOutcome:
        for c, o in zip(self.cases, self.outcomes):
            if abs(c.omega0 - omega0) <= tol and abs(c.vx0 - vx0) <= tol:
                return o
        raise KeyError((omega0, vx0))


def _evaluate(args):
    case, cfg, params = args
    try:
        p = dataclasses.replace(params, I=case.I_nd * params.m * params.r0**2)
        return first_stance_step(case, cfg, p)
    except Exception as exc:  # recorded, never fatal for the sweep
        return LandingOutcome(case, False, None, None, None, reason=f"{type(exc).__name__}: {exc}",
                              tag="error", T_C=params.T_C)


def run_sweep(cases, cfg: StabilizerConfig = StabilizerConfig(), params: ModelParams | None = None,
              worker_count: int = 1, spec: SweepSpec | None = None) -> PerformanceMap:
    """Evaluate every case; results keep the input order for any worker count.

    ``params`` supplies ``m, g, r0``; the inertia comes from each case.
    """
    cases = list(cases)
    if not cases:
        raise InvalidInputError("no cases to sweep")
    if worker_count < 1:
        raise InvalidInputError("worker_count must be at least 1")
    params = params or ModelParams()
    jobs = [(c, cfg, params) for c in cases]
    if worker_count == 1:
        outcomes = [_evaluate(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=worker_count) as pool:
            outcomes = list(pool.map(_evaluate, jobs, chunksize=1))
    shape = spec.grid if spec is not None and len(cases) == spec.grid[0] * spec.grid[1] else None
    return PerformanceMap(spec, cases, outcomes, shape)


def select_boundary_neighbors(pm: PerformanceMap) -> list[int]:
    """Per vx column, the highest-omega success that borders a failure.

    Columns that are all success or all failure contribute nothing.
    """
    if pm.shape is None:
        raise InvalidInputError("map has no grid shape")
    S = pm.success
    n_w, n_v = S.shape
    out = []
    for j in range(n_v):
        col = S[:, j]
        if col.all() or not col.any():
            continue
        best = None
        for i in range(n_w):
            if not S[i, j]:
                continue
            nb = [(i + di, j + dj) for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1))]
            if any(0 <= a < n_w and 0 <= b < n_v and not S[a, b] for a, b in nb):
                if best is None or pm.cases[i * n_v + j].omega0 > pm.cases[best * n_v + j].omega0:
                    best = i
        if best is not None:
            out.append(best * n_v + j)
    return out


def fit_boundary(points) -> BoundaryFit:
    """Least squares ``omega0 = slope * vx0 + intercept`` with R^2.

    A flat response gives ``R^2 = 0``.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or P.shape[1] != 2 or P.shape[0] < 3:
        raise InvalidInputError("need at least three (vx0, omega0) points")
    x, y = P[:, 0], P[:, 1]
    if np.ptp(x) == 0:
        raise InvalidInputError("all points share one vx0; slope undefined")
    A = np.column_stack([x, np.ones_like(x)])
    (m, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - (m * x + b)) ** 2))
    r2 = 0.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return BoundaryFit(float(m), float(b), r2, int(P.shape[0]))


def fit_map(pm: PerformanceMap) -> PerformanceMap:
    """Attach frontier indices and, with at least three of them, the fit."""
    pm.neighbor_set = select_boundary_neighbors(pm)
    pts = [(pm.cases[k].vx0, pm.cases[k].omega0) for k in pm.neighbor_set]
    pm.boundary = None
    if len(pts) >= 3 and len({p[0] for p in pts}) > 1:
        pm.boundary = fit_boundary(pts)
    return pm


def monotonicity_flags(pm: PerformanceMap) -> list[int]:
    """Indices of successes sitting above a failure in the same vx column."""
    S = pm.success
    n_w, n_v = S.shape
    flags = []
    for j in range(n_v):
        for i in range(n_w):
            if S[i, j] and not S[:i, j].all():
                flags.append(i * n_v + j)
    return flags


@dataclass
class FactorRow:
    I_nd: float
    vz0: float
    alpha_0: float
    map: PerformanceMap = field(repr=False)

    @property
    def boundary(self) -> BoundaryFit | None:
        return self.map.boundary


def factor_study(base: SweepSpec, I_levels=None, vz0_levels=None, alpha0_levels=None,
                 cfg: StabilizerConfig = StabilizerConfig(), params: ModelParams | None = None,
                 worker_count: int = 1) -> list[FactorRow]:
    """One fitted map per combination of the given factor levels."""
    I_levels = list(I_levels) if I_levels is not None else [base.I_nd]
    vz0_levels = list(vz0_levels) if vz0_levels is not None else [base.vz0]
    alpha0_levels = list(alpha0_levels) if alpha0_levels is not None else [base.alpha_0]
    if not (I_levels and vz0_levels and alpha0_levels):
        raise InvalidInputError("factor level lists must be nonempty")
    rows = []
    for a0 in alpha0_levels:
        for vz in vz0_levels:
            for I in I_levels:
                # an explicit vx range belongs to the base attack angle only
                vx = base.vx0_range if a0 == base.alpha_0 else None
                spec = dataclasses.replace(base, I_nd=I, vz0=vz, alpha_0=a0, vx0_range=vx)
                pm = fit_map(run_sweep(build_grid(spec), cfg, params, worker_count, spec))
                rows.append(FactorRow(I, vz, a0, pm))
    return rows


def nonincreasing_trend(rows: list[FactorRow]) -> bool | None:
    """True when ``|slope|`` and intercept do not increase with inertia.

    None when any map lacks a fitted boundary.
    """
    rows = sorted(rows, key=lambda r: r.I_nd)
    if any(r.boundary is None for r in rows):
        return None
    m = [abs(r.boundary.slope) for r in rows]
    b = [r.boundary.intercept for r in rows]
    return all(x >= y for x, y in zip(m, m[1:])) and all(x >= y for x, y in zip(b, b[1:]))
