import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pipf_landing.errors import InvalidInputError
from pipf_landing.serialize import write_map
from pipf_landing.stabilizer import LandingCase, LandingOutcome, StabilizerConfig
from pipf_landing.sweep import (BoundaryFit, FactorRow, PerformanceMap, SweepSpec, build_grid, factor_study,
                                fit_boundary, fit_map, monotonicity_flags, nonincreasing_trend, rod_inertia,
                                run_sweep, select_boundary_neighbors)


@pytest.mark.parametrize("eta, expect", [(0.7, 0.04), (1.0, 0.08), (1.2, 0.12)])
def test_rod_inertia(eta, expect):
    assert round(rod_inertia(eta), 2) == expect
    assert rod_inertia(eta) == eta * eta / 12


def test_default_velocity_span():
    assert SweepSpec().vx_range == (0.8, 2.0)
    assert SweepSpec(alpha_0=math.radians(55)).vx_range == (0.95, 2.15)
    assert SweepSpec(alpha_0=math.radians(50)).vx_range == (1.1, 2.3)


def test_corner_grid():
    cases = build_grid(SweepSpec(grid=(2, 2)))
    assert [(c.omega0, c.vx0) for c in cases] == [(1, 0.8), (1, 2.0), (5, 0.8), (5, 2.0)]
    assert all(c.vz0 == -0.3 and c.I_nd == 0.04 for c in cases)


def test_grid_spacing():
    spec = SweepSpec(grid=(9, 7))
    assert np.allclose(np.diff(spec.omega_values), 0.5, atol=1e-15)
    assert np.allclose(np.diff(spec.vx_values), 0.2, atol=1e-14)


def test_invalid_specs():
    for kw in (dict(omega0_range=(5, 1)), dict(vx0_range=(2, 2)), dict(grid=(1, 5)), dict(I_nd=0.0)):
        with pytest.raises(InvalidInputError):
            SweepSpec(**kw)


def test_fit_examples():
    f = fit_boundary([(1, 5), (2, 3), (3, 1)])
    assert (f.slope, f.intercept, f.r_squared) == pytest.approx((-2, 7, 1), abs=1e-12)
    f = fit_boundary([(1, 2), (2, 2), (3, 2)])
    assert f.slope == pytest.approx(0, abs=1e-14) and f.r_squared == 0.0
    with pytest.raises(InvalidInputError):
        fit_boundary([(1, 2), (1, 3), (1, 4)])
    with pytest.raises(InvalidInputError):
        fit_boundary([(1, 2), (2, 3)])


@settings(max_examples=50)
@given(st.integers(3, 10), st.integers(0, 2**31 - 1))
def test_fit_matches_normal_equations(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.8, 2.0, n)
    y = rng.uniform(1.0, 5.0, n)
    if np.ptp(x) < 1e-3:
        return
    f = fit_boundary(np.column_stack([x, y]))
    sx, sy, sxx, sxy = x.sum(), y.sum(), (x * x).sum(), (x * y).sum()
    det = n * sxx - sx * sx
    m = (n * sxy - sx * sy) / det
    b = (sxx * sy - sx * sxy) / det
    r2 = 1 - np.sum((y - m * x - b) ** 2) / np.sum((y - y.mean()) ** 2)
    assert abs(f.slope - m) < 1e-10 and abs(f.intercept - b) < 1e-10 and abs(f.r_squared - r2) < 1e-10


def _fake_map(S):
    S = np.asarray(S, dtype=bool)
    n_w, n_v = S.shape
    cases, outcomes = [], []
    for i in range(n_w):
        for j in range(n_v):
            c = LandingCase(1.0 + i, 0.8 + 0.2 * j)
            cases.append(c)
            outcomes.append(LandingOutcome(c, bool(S[i, j]), None, None, None))
    return PerformanceMap(None, cases, outcomes, S.shape)


def test_neighbors_of_all_success_map_is_empty():
    assert select_boundary_neighbors(_fake_map(np.ones((3, 3)))) == []


def test_single_column_frontier():
    # successes for omega 1, 2, 3; failures at 4, 5
    pm = _fake_map([[1], [1], [1], [0], [0]])
    assert select_boundary_neighbors(pm) == [2]


def test_staircase_frontier_and_fit():
    S = [[1, 1, 1, 1], [1, 1, 1, 0], [1, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 0]]
    pm = fit_map(_fake_map(S))
    assert [pm.cases[k].omega0 for k in pm.neighbor_set] == [4, 3, 2, 1]
    assert pm.boundary.slope == pytest.approx(-5.0) and pm.boundary.r_squared == pytest.approx(1.0)
    assert monotonicity_flags(pm) == []


def test_too_few_frontier_points_leave_no_boundary():
    pm = fit_map(_fake_map([[1, 1, 1], [1, 1, 1], [0, 1, 1]]))
    assert pm.boundary is None and len(pm.neighbor_set) == 1


def test_success_above_failure_is_flagged():
    pm = _fake_map([[1, 1], [0, 1], [1, 1]])
    assert monotonicity_flags(pm) == [4]


def test_grf_summary_only_lists_successes():
    pm = _fake_map([[1, 0]])
    pm.outcomes[0].min_F_fz, pm.outcomes[0].max_mu = 0.5, 1.2
    pm.outcomes[1].min_F_fz, pm.outcomes[1].max_mu = 0.1, 9.0
    s = pm.grf_summary()
    assert s.entries == [(0, 0.5, 1.2)] and s.fraction_mu_below(3) == 1.0


def test_trend_helper():
    def row(I, m, b):
        return FactorRow(I, -0.3, 1.0, PerformanceMap(None, [], [], None, BoundaryFit(m, b, 0.9, 4)))
    assert nonincreasing_trend([row(0.08, -2, 6), row(0.04, -3, 7), row(0.12, -2, 5)])
    assert not nonincreasing_trend([row(0.04, -2, 7), row(0.08, -3, 6)])
    missing = FactorRow(0.12, -0.3, 1.0, PerformanceMap(None, [], [], None, None))
    assert nonincreasing_trend([row(0.04, -2, 7), missing]) is None


def test_failing_case_is_recorded_not_raised():
    bad = LandingCase(1.0, 0.8, alpha0=math.pi)  # touchdown state rejects this
    pm = run_sweep([bad, LandingCase(1.0, 0.8)])
    assert pm.outcomes[0].tag == "error" and not pm.outcomes[0].success
    assert pm.outcomes[1].tag == "dynamic" and pm.outcomes[1].success
    with pytest.raises(InvalidInputError):
        run_sweep([])


def test_single_case_sweep():
    pm = run_sweep([LandingCase(3.0, 1.2)])
    assert pm.success.tolist() == [True]


@pytest.fixture(scope="module")
def corner_spec():
    return SweepSpec(grid=(2, 2))


def test_worker_count_does_not_change_output(corner_spec, tmp_path):
    cases = build_grid(corner_spec)
    one = run_sweep(cases, worker_count=1, spec=corner_spec)
    two = run_sweep(cases, worker_count=2, spec=corner_spec)
    write_map(tmp_path / "a.csv", one)
    write_map(tmp_path / "b.csv", two)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert one.success.tolist() == [[True, True], [True, False]]


def test_single_level_factor_study_matches_direct_sweep(corner_spec):
    rows = factor_study(corner_spec)
    direct = fit_map(run_sweep(build_grid(corner_spec), spec=corner_spec))
    assert len(rows) == 1
    assert rows[0].map.success.tolist() == direct.success.tolist()
    assert rows[0].boundary == direct.boundary
    with pytest.raises(InvalidInputError):
        factor_study(corner_spec, I_levels=[])
