import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pipf_landing import kernels
from pipf_landing.dynamics import ModelParams
from pipf_landing.errors import InvalidInputError
from pipf_landing.stabilizer import LandingCase, StabilizerConfig, touchdown_state
from pipf_landing.trajopt import (UNIFORM, ConstraintConfig, CostConfig, Discount, HorizonSpec, SolverOptions,
                                  Status, cost, discount_sequence, hover_controls, solve_iteration, z_dot_nd)

PARAMS = ModelParams.from_nondim_inertia(0.04)
CFG = StabilizerConfig()


def test_horizon_spec():
    h = HorizonSpec(0.3, 20)
    assert h.T_s * h.p == pytest.approx(0.3, rel=1e-15)
    with pytest.raises(InvalidInputError):
        HorizonSpec(0.0)
    with pytest.raises(InvalidInputError):
        HorizonSpec(1.0, 1)


def test_discount_examples():
    np.testing.assert_array_equal(discount_sequence("uniform", 4), [0.25] * 4)
    np.testing.assert_allclose(discount_sequence("reversed_poisson", 3, 1.0), [0.18394, 0.36788, 0.36788],
                               atol=5e-6)
    assert discount_sequence("reversed_poisson", 20, 1.0).sum() > 0.9999
    with pytest.raises(InvalidInputError):
        discount_sequence("uniform", 0)


@given(st.integers(1, 60), st.floats(0.1, 5.0))
def test_discount_sums(p, lam):
    assert math.fsum(discount_sequence("uniform", p)) == pytest.approx(1.0, abs=1e-15)
    xi = discount_sequence(Discount("reversed_poisson", lam), p)
    assert np.all(xi >= 0) and 0 < xi.sum() <= 1 + 1e-12


def test_reversed_poisson_peaks_at_the_end_for_unit_rate():
    xi = discount_sequence("reversed_poisson", 20)
    assert xi[-1] == xi.max() and np.all(np.diff(xi) >= 0)


def _states_with_zdot(zdots):
    # alpha = pi/2 and r = 1 make z_dot equal to r_dot
    S = np.zeros((len(zdots), 6))
    S[:, 0] = 1.0
    S[:, 1] = math.pi / 2
    S[:, 3] = zdots
    return S


def test_cost_examples():
    cc = CostConfig(1, 1, 1, z_dot_des=0.0, xi_z_dot=UNIFORM, xi_gamma=UNIFORM, xi_gamma_dot=UNIFORM)
    assert cost(_states_with_zdot([0, 0, 0]), cc) == 0.0
    assert cost(_states_with_zdot([5.0, 0.0, 0.2]), cc, 2) == pytest.approx(0.02)
    big = CostConfig(10, 10, 10, z_dot_des=0.0, xi_z_dot=UNIFORM, xi_gamma=UNIFORM, xi_gamma_dot=UNIFORM)
    S = _states_with_zdot([0.1, 0.3, -0.2])
    S[:, 2] = [0.0, 0.1, 0.2]
    assert cost(S, big) == pytest.approx(10 * cost(S, cc))
    with pytest.raises(InvalidInputError):
        cost(S, cc, 5)


def test_z_dot_matches_cartesian_map():
    s = np.array([0.9, 1.1, 0.2, -0.3, 0.7, 1.5])
    a, ad = s[1] + s[2], s[4] + s[5]
    assert z_dot_nd(s)[0] == pytest.approx(s[3] * math.sin(a) + s[0] * ad * math.cos(a))


@pytest.fixture(scope="module")
def first_iteration():
    x0 = touchdown_state(LandingCase(3.0, 1.2))
    H = HorizonSpec(0.2 / 1.2 * PARAMS.T_C, 20)
    cc = CFG.pitch_cost(1.0)
    return x0, H, cc, solve_iteration(x0, H, cc, CFG.constraints, params=PARAMS)


def test_first_iteration_converges_within_bounds(first_iteration):
    x0, H, cc, res = first_iteration
    assert res.status is Status.CONVERGED
    assert np.all(res.controls[:, 0] >= -1e-12) and np.all(res.controls[:, 0] <= 2 + 1e-12)
    assert np.all(np.abs(res.controls[:, 1]) <= 1 + 1e-12)
    lo, hi = CFG.constraints.state_bounds()
    assert np.all(res.states >= lo - 1e-6) and np.all(res.states <= hi + 1e-6)


def test_defects_below_tolerance(first_iteration):
    x0, H, cc, res = first_iteration
    h = H.T_s / PARAMS.T_C
    d = kernels.defects(res.states[1:], res.controls, x0, h, PARAMS.I_nd)
    assert np.max(np.abs(d)) <= 1e-6
    assert res.times[-1] == pytest.approx(H.T_h / PARAMS.T_C)


def test_objective_equals_cost_of_returned_states(first_iteration):
    _, _, cc, res = first_iteration
    assert abs(res.objective - cost(res.states, cc)) <= 1e-9


def test_warm_restart_is_cheap(first_iteration):
    x0, H, cc, res = first_iteration
    again = solve_iteration(x0, H, cc, CFG.constraints, res, params=PARAMS)
    assert again.status is Status.CONVERGED
    assert again.outer_iterations <= 3
    assert abs(again.objective - res.objective) < 1e-8


def test_deterministic(first_iteration):
    x0, H, cc, res = first_iteration
    again = solve_iteration(x0, H, cc, CFG.constraints, params=PARAMS)
    assert again.status is res.status and again.objective == res.objective
    np.testing.assert_array_equal(again.states, res.states)


def test_hover_equilibrium():
    x0 = np.array([1.0, math.pi / 2, 0.0, 0.0, 0.0, 0.0])
    cc = CostConfig(1, 1e4, 1e5, z_dot_des=0.0)
    res = solve_iteration(x0, HorizonSpec(0.5, 20), cc, ConstraintConfig(), inertia_nd=0.04)
    assert res.status is Status.CONVERGED and res.objective < 1e-6
    np.testing.assert_allclose(res.controls, np.tile([1.0, 0.0], (20, 1)), atol=1e-4)


def test_pinned_controls_reproduce_simulation():
    x0 = np.array([1.0, 1.2, 0.1, -0.2, 0.3, 0.5])
    u = hover_controls(x0, 20, ConstraintConfig())[0]
    con = ConstraintConfig(U_min=tuple(u), U_max=tuple(u))
    cc = CostConfig(1, 1, 1)
    res = solve_iteration(x0, HorizonSpec(0.2, 20), cc, con, inertia_nd=0.04)
    assert res.status is Status.CONVERGED
    U = np.tile(u, (20, 1))
    np.testing.assert_allclose(res.controls, U, atol=1e-12)
    assert np.max(np.abs(kernels.defects(res.states[1:], U, x0, 0.01, 0.04))) <= 1e-6
    # per-knot defects of 1e-6 may accumulate over 20 knots
    sim = kernels.rollout_numpy(x0, U, 0.01, 0.04)
    np.testing.assert_allclose(res.states, sim, atol=2e-5)
    assert res.objective == pytest.approx(cost(sim, cc), abs=1e-5)


def test_infeasible_start_is_reported_without_iterating():
    x0 = np.array([1.0, 0.5, 2.0, 0.0, 0.0, 0.0])  # gamma beyond pi/2
    res = solve_iteration(x0, HorizonSpec(0.2), CostConfig(), ConstraintConfig(), inertia_nd=0.04)
    assert res.status is Status.INFEASIBLE and res.outer_iterations == 0


def test_needs_inertia_or_params():
    with pytest.raises(InvalidInputError):
        solve_iteration(np.ones(6), HorizonSpec(0.2), CostConfig(), ConstraintConfig())


@pytest.mark.parametrize("inner", ["lbfgsb", "scipy_trf"])
def test_alternative_inner_solvers_reach_feasibility(inner):
    x0 = np.array([1.0, 1.2, 0.1, -0.2, 0.3, 0.5])
    opts = SolverOptions(inner=inner, max_inner=3000)
    res = solve_iteration(x0, HorizonSpec(0.2, 8), CostConfig(1, 10, 100), ConstraintConfig(), inertia_nd=0.04,
                          options=opts)
    d = kernels.defects(res.states[1:], res.controls, x0, 0.2 / 8, 0.04)
    assert np.max(np.abs(d)) < 1e-5
