import io

import numpy as np
import pytest
import sympy

from cct_searcher.integrator import (
    SensTrajectory,
    detect_feasibility_exit,
    detect_fnorm_min,
    integrate,
    read_trajectory_csv,
    write_trajectory_csv,
)
from cct_searcher.models import (
    SMIB_BASE,
    ConstraintSet,
    ParametricModel,
    find_equilibrium,
    load_scenario,
    smib_model,
)
from cct_searcher.oracle import closed_form_faulton

P0 = np.array(SMIB_BASE)
DELTA_S = np.arcsin(0.6)
T_EXIT = 0.5 * np.log(6)


@pytest.fixture(scope="module")
def smib():
    return smib_model()


def test_grid_lands_on_the_final_time(smib):
    traj = integrate(smib.fault, None, [DELTA_S, 0.0], P0, 0.0125, step=0.005)
    assert np.allclose(traj.times, [0.0, 0.005, 0.01, 0.0125])
    assert traj.final_time == 0.0125
    assert not traj.stopped_early


@pytest.mark.parametrize("t_end", [0.5, 1.0])
def test_fault_on_closed_form(smib, t_end):
    traj = integrate(smib.fault, None, [DELTA_S, 0.0], P0, t_end)
    exact = closed_form_faulton(P0, t_end)
    x = traj.final_state
    assert x[0] == pytest.approx(exact.delta, abs=1e-8)
    assert x[1] == pytest.approx(exact.omega, abs=1e-8)
    phi_p = traj.phi_p[-1]
    assert phi_p[0, 0] == pytest.approx(exact.ddelta_dPm, abs=1e-6)
    assert phi_p[0, 1] == pytest.approx(exact.ddelta_dM, abs=1e-6)
    assert phi_p[1, 0] == pytest.approx(exact.domega_dPm, abs=1e-6)
    assert phi_p[1, 1] == pytest.approx(exact.domega_dM, abs=1e-6)
    assert np.allclose(phi_p[:, 2:], 0)


def test_closed_form_values():
    exact = closed_form_faulton(P0, 0.5)
    assert exact.omega == pytest.approx(0.7585447, abs=1e-7)
    assert exact.domega_dPm == pytest.approx(1.2642411, abs=1e-7)
    assert exact.domega_dM == pytest.approx(-1.76582, abs=1e-5)


@pytest.mark.parametrize("t_end", [0.1, 0.3, 0.5, 1.0, 2.0])
def test_sensitivities_match_finite_differences(smib, t_end):
    x0 = np.array([0.9, 0.3])
    traj = integrate(smib.post, None, x0, P0, t_end)
    eps = 1e-6
    for i in range(2):
        dx = np.zeros(2)
        dx[i] = eps
        plus = integrate(smib.post, None, x0 + dx, P0, t_end, sensitivities=False)
        minus = integrate(smib.post, None, x0 - dx, P0, t_end, sensitivities=False)
        numeric = (plus.final_state - minus.final_state) / (2 * eps)
        assert np.allclose(traj.phi_x[-1][:, i], numeric, rtol=1e-4, atol=1e-7)
    for j in range(4):
        dp = np.zeros(4)
        dp[j] = eps
        plus = integrate(smib.post, None, x0, P0 + dp, t_end, sensitivities=False)
        minus = integrate(smib.post, None, x0, P0 - dp, t_end, sensitivities=False)
        numeric = (plus.final_state - minus.final_state) / (2 * eps)
        assert np.allclose(traj.phi_p[-1][:, j], numeric, rtol=1e-4, atol=1e-7)


def test_sensitivities_at_intermediate_times(smib):
    traj = integrate(smib.fault, None, [DELTA_S, 0.0], P0, 1.0)
    x, phi_x, phi_p = traj.sensitivities_at(0.5004)
    exact = closed_form_faulton(P0, 0.5004)
    assert x[1] == pytest.approx(exact.omega, abs=1e-8)
    assert phi_p[1, 0] == pytest.approx(exact.domega_dPm, abs=1e-6)
    assert phi_x.shape == (2, 2)
    with pytest.raises(ValueError):
        traj.state_at(1.5)


def test_speed_limit_crossing(smib):
    traj = integrate(
        smib.fault,
        smib.h_comb,
        [DELTA_S, 0.0],
        P0,
        2.0,
        terminal=("H-zero-crossing",),
    )
    assert traj.stopped_early
    event = traj.event("H-zero-crossing")
    assert event is not None
    assert event.time == pytest.approx(T_EXIT, abs=1e-7)
    assert event.state[1] == pytest.approx(1.0, abs=1e-7)
    assert detect_feasibility_exit(traj).time == pytest.approx(event.time)


def parabola():
    # x' = 1, y' = c x with the single limit y > 0, so y = y0 - t + t^2 / 2
    # from x0 = -1 when c = 1
    x, y, c = sympy.symbols("x y c")
    model = ParametricModel("parabola", (x, y), (c,), [sympy.Integer(1), c * x])
    return model, ConstraintSet((x, y), (c,), [y], ["floor"])


def test_graze_is_found():
    model, h = parabola()
    traj = integrate(model, h, [-1.0, 0.5 + 5e-6], [1.0], 2.0, step=0.01)
    event = traj.event("H-graze")
    assert event is not None
    assert traj.event("H-zero-crossing") is None
    assert event.time == pytest.approx(1.0, abs=1e-6)
    assert event.value == pytest.approx(5e-6, abs=1e-9)


def test_crossing_is_refined():
    model, h = parabola()
    traj = integrate(model, h, [-1.0, 0.5 - 1e-3], [1.0], 2.0, step=0.01)
    event = traj.event("H-zero-crossing")
    assert event is not None
    assert event.time == pytest.approx(1 - np.sqrt(2e-3), abs=1e-7)


def test_clear_pass_has_no_exit():
    model, h = parabola()
    traj = integrate(model, h, [-1.0, 0.6], [1.0], 2.0, step=0.01)
    assert detect_feasibility_exit(traj) is None


def test_field_norm_minimum_at_a_bottleneck():
    # x' = x^2 + a slows down to a near x = 0
    x, y, a = sympy.symbols("x y a")
    model = ParametricModel("bottleneck", (x, y), (a,), [x ** 2 + a, -y])
    traj = integrate(
        model, None, [-1.0, 0.0], [5e-4], 100.0, step=0.01, sensitivities=False
    )
    event = detect_fnorm_min(traj)
    assert event is not None
    root = np.sqrt(5e-4)
    assert event.time == pytest.approx(np.arctan(1 / root) / root, abs=1e-3)
    assert event.value == pytest.approx(5e-4, rel=1e-3)


def test_field_norm_still_decreasing_at_the_end():
    x, y, a = sympy.symbols("x y a")
    model = ParametricModel("decay", (x, y), (a,), [-a * x, -a * y])
    traj = integrate(model, None, [1.0, 1.0], [1.0], 10.0, sensitivities=False)
    event = detect_fnorm_min(traj)
    assert event is not None
    assert event.time == pytest.approx(10.0)
    assert detect_fnorm_min(traj, level=1e-6) is None


def test_stop_predicate(smib):
    traj = integrate(
        smib.fault,
        None,
        [DELTA_S, 0.0],
        P0,
        5.0,
        sensitivities=False,
        stop=lambda t, x: x[1] > 0.5,
    )
    assert traj.stopped_early
    assert traj.final_state[1] > 0.5
    assert traj.states[-2][1] <= 0.5


def test_zero_duration_trajectory(smib):
    traj = SensTrajectory.single_point(smib.fault, [DELTA_S, 0.0], P0, smib.h_fault)
    assert len(traj.times) == 1
    assert np.allclose(traj.phi_x[0], np.eye(2))
    f = io.StringIO()
    write_trajectory_csv(traj, f)
    lines = f.getvalue().strip().splitlines()
    assert len(lines) == 2
    assert lines[0].startswith("t,delta,omega,H,phi_x[0][0]")
    assert lines[1].startswith("0,0.643501108793,0,")


def test_events_are_sorted():
    scenario = load_scenario("smib")
    traj = integrate(
        scenario.fault, scenario.h_comb, [DELTA_S, 0.0], scenario.p0, 1.5
    )
    times = [e.time for e in traj.events]
    assert times == sorted(times)
    assert traj.events[-1].kind == "horizon-reached"


def test_transition_matrices_compose(smib):
    x0 = np.array([0.9, 0.3])
    whole = integrate(smib.post, None, x0, P0, 1.0)
    first = integrate(smib.post, None, x0, P0, 0.5)
    second = integrate(smib.post, None, first.final_state, P0, 0.5)
    assert np.allclose(whole.phi_x[-1], second.phi_x[-1] @ first.phi_x[-1], atol=1e-6)


def test_csv_round_trip(smib):
    traj = integrate(smib.fault, smib.h_fault, [DELTA_S, 0.0], P0, 0.5)
    f = io.StringIO()
    write_trajectory_csv(traj, f)
    f.seek(0)
    columns = read_trajectory_csv(f)
    assert np.allclose(columns["t"], traj.times)
    assert np.allclose(columns["omega"], traj.states[:, 1], rtol=1e-11)
    assert np.allclose(columns["phi_p[1][Pm]"], traj.phi_p[:, 1, 0], rtol=1e-11)


def test_csv_without_constraints(smib):
    traj = integrate(smib.fault, None, [DELTA_S, 0.0], P0, 0.01, sensitivities=False)
    f = io.StringIO()
    write_trajectory_csv(traj, f)
    f.seek(0)
    columns = read_trajectory_csv(f)
    assert list(columns) == ["t", "delta", "omega", "H"]
    assert np.all(np.isnan(columns["H"]))


@pytest.fixture(scope="module")
def three_machine():
    return load_scenario("threemachine", validate=False)


def finite_difference_columns(model, x0, p, t_end, eps=1e-6):
    def final_state(x, q):
        return integrate(model, None, x, q, t_end, sensitivities=False).final_state

    columns = []
    for shift in np.eye(len(x0)) * eps:
        plus, minus = final_state(x0 + shift, p), final_state(x0 - shift, p)
        columns.append((plus - minus) / (2 * eps))
    for shift in np.eye(len(p)) * eps:
        plus, minus = final_state(x0, p + shift), final_state(x0, p - shift)
        columns.append((plus - minus) / (2 * eps))
    return np.array(columns).T


@pytest.mark.slow
@pytest.mark.timeout(300)
@pytest.mark.parametrize("t_end", [0.1, 0.5, 1.0])
def test_three_machine_sensitivities(three_machine, t_end):
    p = three_machine.p0
    x0 = find_equilibrium(three_machine.pre, p, three_machine.sep_guess).x
    traj = integrate(three_machine.fault, None, x0, p, t_end)
    numeric = finite_difference_columns(three_machine.fault, x0, p, t_end)
    n = three_machine.dim
    assert np.allclose(traj.phi_x[-1], numeric[:, :n], rtol=1e-4, atol=1e-7)
    assert np.allclose(traj.phi_p[-1], numeric[:, n:], rtol=1e-4, atol=1e-7)
