import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from pipf_landing.capture import (CaptureSpec, LipState, capture_point, lip_evolve, lip_handoff,
                                  min_horizontal_speed, n_step_capture, truncate2)
from pipf_landing.dynamics import ModelParams
from pipf_landing.errors import InvalidInputError
from pipf_landing.stabilizer import LandingCase, first_stance_step


def test_capture_point_examples():
    assert capture_point(LipState(0.3, 0.0, 1.0)) == 0.3
    assert capture_point(LipState(0.0, 1.0, 1.0), 9.8) == pytest.approx(0.31944, abs=1e-5)
    a = capture_point(LipState(0.2, 0.7, 0.9))
    b = capture_point(LipState(0.2, 1.4, 0.9))
    assert b - 0.2 == pytest.approx(2 * (a - 0.2), rel=1e-15)
    with pytest.raises(InvalidInputError):
        capture_point(LipState(0.0, 1.0, 0.0))


def test_lip_state_rejects_nan():
    with pytest.raises(InvalidInputError):
        LipState(float("nan"), 0.0, 1.0)


@pytest.mark.parametrize("deg, expect", [(60, 0.80), (55, 0.95), (50, 1.10)])
def test_minimum_speed_spans(deg, expect):
    v = min_horizontal_speed(math.radians(deg), 1.5)
    assert truncate2(v) == expect
    assert v >= expect


def test_minimum_speed_domain():
    for a in (0.0, math.pi / 2, -0.1):
        with pytest.raises(InvalidInputError):
            min_horizontal_speed(a)
    with pytest.raises(InvalidInputError):
        CaptureSpec(eta_vx=1.0)
    assert CaptureSpec().min_speed == min_horizontal_speed(math.radians(60), 1.5)


def test_truncation():
    assert truncate2(0.8069) == 0.80 and truncate2(1.1) == 1.1 and truncate2(-0.129) == -0.12


def test_at_rest_over_the_foot_needs_no_step():
    plan = n_step_capture(LipState(0.0, 0.0, 1.0), 3, 0.5)
    assert plan.captured and plan.steps == 0


def test_capture_point_on_the_reach_boundary_takes_one_step():
    s = LipState(0.0, 0.5 / math.sqrt(1.0 / 9.8), 1.0)
    plan = n_step_capture(s, 1, 0.5)
    assert plan.captured and plan.steps == 1 and plan.footholds[0] == pytest.approx(0.5)


def test_too_fast_is_not_captured_in_zero_steps():
    plan = n_step_capture(LipState(0.0, 2.0, 1.0), 0, 0.3)
    assert not plan.captured and plan.steps == 0
    with pytest.raises(InvalidInputError):
        n_step_capture(LipState(0.0, 2.0, 1.0), -1, 0.3)


@given(st.floats(-1, 1), st.floats(-4, 4), st.floats(0.5, 1.2), st.floats(0.2, 1.0), st.integers(0, 5))
def test_capture_is_monotone_in_allowed_steps(x, xd, z, reach, N):
    a = n_step_capture(LipState(x, xd, z), N, reach)
    b = n_step_capture(LipState(x, xd, z), N + 1, reach)
    if a.captured:
        assert b.captured and b.steps == a.steps
    assert a.steps <= N


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(-3, 3), st.floats(0.5, 1.2), st.floats(-0.5, 0.5), st.floats(0.01, 0.4))
def test_closed_form_solves_the_lip_ode(x, xd, z, foot, t):
    g = 9.8
    end = lip_evolve(LipState(x, xd, z), foot, t, g)
    sol = solve_ivp(lambda _, y: [y[1], g / z * (y[0] - foot)], (0, t), [x, xd], method="DOP853",
                    rtol=1e-13, atol=1e-14)
    assert abs(sol.y[0, -1] - end.x) < 1e-9 and abs(sol.y[1, -1] - end.x_dot) < 1e-9


def test_handoff_geometry():
    p = ModelParams(r0=0.8)
    s = lip_handoff([1.0, math.pi / 2, 0.0, 0.0, 1.0, 0.0], p)
    assert s.x == pytest.approx(0.0, abs=1e-15) and s.z == pytest.approx(0.8)
    assert s.x_dot == pytest.approx(math.sqrt(9.8 * 0.8))


def test_preliminary_case_is_captured_within_three_steps():
    o = first_stance_step(LandingCase(3.0, 1.2))
    assert o.success
    p = ModelParams.from_nondim_inertia(0.04)
    s = lip_handoff(o.terminal_state, p)
    plan = n_step_capture(s, 3, p.r0 * math.cos(math.radians(10)), p.g, foot=0.0)
    assert plan.captured and plan.steps <= 3
    assert np.all(np.diff([0.0] + plan.footholds) > 0)
