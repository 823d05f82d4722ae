import numpy as np
import pytest

from cct_searcher import find_cct
from cct_searcher.exception import NonTransversal, SolverError
from cct_searcher.models import SMIB_BASE, load_scenario, smib_model
from cct_searcher.oracle import FdSpec, fd_cct_sensitivity
from cct_searcher.sensitivity import (
    SensIngredients,
    category1_sensitivity,
    category2_sensitivity,
    category3_sensitivity,
    cuep_sensitivity,
    sensitivity_report,
    sep_sensitivity,
    unstable_left_eigenvector,
)

P0 = np.array(SMIB_BASE)
DELTA_S = np.arcsin(0.6)
DELTA_U = np.pi - np.arcsin(0.6)
T_EXIT = 0.5 * np.log(6)


@pytest.fixture(scope="module")
def smib():
    return smib_model()


@pytest.fixture(scope="module")
def base_report(smib):
    result = find_cct(smib)
    return sensitivity_report(smib, smib.p0, result)


def test_sep_sensitivity(smib):
    sens = sep_sensitivity(smib.pre, [DELTA_S, 0.0], P0)
    assert sens.shape == (2, 4)
    assert sens[0, 0] == pytest.approx(1 / np.cos(DELTA_S))
    assert sens[0, 0] == pytest.approx(1.25)
    assert np.allclose(sens[:, 1:], 0)
    assert sep_sensitivity(smib.pre, [DELTA_S, 0.0], P0, 0)[0] == pytest.approx(1.25)


def test_cuep_sensitivity(smib):
    sens = cuep_sensitivity(smib.post, np.array([DELTA_U, 0.0]), P0)
    assert sens[0, 0] == pytest.approx(-1.25)
    assert np.allclose(sens[:, 1:], 0)


def test_left_eigenvector_at_the_uep(smib):
    w = unstable_left_eigenvector(smib.post, np.array([DELTA_U, 0.0]), P0)
    rate = -1 + np.sqrt(4.2)
    expected = np.array([rate + 2, 1.0])
    assert np.linalg.norm(w) == pytest.approx(1.0)
    assert np.allclose(w, expected / np.linalg.norm(expected))
    jac = smib.post.jac_x(np.array([DELTA_U, 0.0]), P0)
    assert np.allclose(w @ jac, rate * w)


def test_category_one_matches_the_exit_time(base_report):
    assert base_report.category == 1
    assert len(base_report) == 4
    assert base_report["wmax"].dtcr_dp == pytest.approx(2.5, rel=1e-3)
    assert base_report["Pm"].dtcr_dp == pytest.approx(-25 / 6, rel=1e-3)
    assert base_report["M"].dtcr_dp == pytest.approx(T_EXIT / 0.25, rel=1e-3)
    assert base_report["dmax"].dtcr_dp == pytest.approx(0.0, abs=1e-3)
    assert all(entry.error is None for entry in base_report)
    assert base_report["M"].denominator > 0


def test_report_output(base_report):
    assert "dt_cr/dp" in base_report.table()
    record = base_report.to_jsonable()
    assert [e["param"] for e in record["entries"]] == ["Pm", "M", "dmax", "wmax"]
    assert record["result"]["category"] == 1
    with pytest.raises(KeyError):
        base_report["Q"]


def test_report_for_chosen_parameters(smib, base_report):
    report = sensitivity_report(smib, smib.p0, base_report.result, ["wmax"])
    assert [entry.param for entry in report] == ["wmax"]


def test_non_transversal_clearing():
    ing = SensIngredients(
        M1=np.eye(2),
        M2=np.array([0.0, 1.0]),
        M3=np.zeros(2),
        M4=np.zeros(2),
        M5=np.array([1.0, 0.0]),
        M6=0.5,
    )
    with pytest.raises(NonTransversal):
        category1_sensitivity(ing)
    assert category1_sensitivity(ing._replace(M2=np.array([2.0, 0.0]))) == 0.25


def test_category_three_formula():
    ing = SensIngredients(
        M1=np.eye(2),
        M2=np.array([1.0, 0.0]),
        M3=np.zeros(2),
        M4=np.zeros(2),
        M5=np.zeros(2),
        M6=0.0,
        O1=np.eye(2),
        O3=np.zeros(2),
        O6=np.array([0.5, 0.0]),
        w=np.array([1.0, 0.0]),
    )
    assert category3_sensitivity(ing) == pytest.approx(0.5)
    with pytest.raises(NonTransversal):
        category3_sensitivity(ing._replace(w=np.array([0.0, 1.0])))
    with pytest.raises(SolverError):
        category3_sensitivity(ing._replace(w=None))


def test_category_two_solves_the_graze_conditions():
    ing = SensIngredients(
        M1=np.eye(2),
        M2=np.array([1.0, 0.0]),
        M3=np.zeros(2),
        M4=np.zeros(2),
        M5=np.zeros(2),
        M6=0.0,
        O1=np.eye(2),
        O2=np.array([0.0, 1.0]),
        O3=np.zeros(2),
        O4=np.eye(2),
        O5=np.array([0.3, -0.7]),
    )
    assert category2_sensitivity(ing) == pytest.approx((0.3, -0.7))
    with pytest.raises(NonTransversal):
        category2_sensitivity(ing._replace(O2=np.array([1.0, 0.0])))


FD_SPEC = FdSpec(delta=1e-2, cct_tol=1e-5)
SMIB_PARAMS = ("Pm", "M", "dmax", "wmax")


def agrees(formula, oracle):
    return abs(formula - oracle) <= max(0.05 * abs(oracle), 2e-3)


@pytest.fixture(scope="module")
def graze_point():
    scenario = smib_model((0.6, 0.25, 2.0, 1.5))
    result = find_cct(scenario, step=2e-3)
    return scenario, sensitivity_report(scenario, scenario.p0, result)


@pytest.fixture(scope="module")
def uep_point():
    scenario = smib_model((0.6, 0.25, 2.9, 1.5))
    result = find_cct(scenario, step=2e-3)
    return scenario, sensitivity_report(scenario, scenario.p0, result)


@pytest.mark.slow
@pytest.mark.timeout(900)
@pytest.mark.parametrize("param", SMIB_PARAMS)
def test_category_two_agrees_with_finite_differences(graze_point, param):
    scenario, report = graze_point
    assert report.category == 2
    formula = report[param].dtcr_dp
    assert formula is not None
    oracle = fd_cct_sensitivity(
        scenario, None, scenario.param_index(param), FD_SPEC, step=2e-3
    )
    assert agrees(formula, oracle), (formula, oracle)


@pytest.mark.slow
@pytest.mark.timeout(900)
@pytest.mark.parametrize("param", SMIB_PARAMS)
def test_category_three_agrees_with_finite_differences(uep_point, param):
    scenario, report = uep_point
    assert report.category == 3
    formula = report[param].dtcr_dp
    assert formula is not None
    oracle = fd_cct_sensitivity(
        scenario, None, scenario.param_index(param), FD_SPEC, step=2e-3
    )
    assert agrees(formula, oracle), (formula, oracle)


@pytest.fixture(scope="module")
def three_machine():
    scenario = load_scenario("threemachine")
    result = find_cct(scenario)
    return scenario, sensitivity_report(scenario, scenario.p0, result, ["Pm1", "Pm2"])


@pytest.mark.slow
@pytest.mark.timeout(1800)
def test_three_machine_trends(three_machine):
    scenario, report = three_machine
    # machine 1 is cut off during the fault and pulls away from machine 2
    assert report["Pm1"].dtcr_dp < 0
    assert report["Pm2"].dtcr_dp > 0
    for param in ("Pm1", "Pm2"):
        oracle = fd_cct_sensitivity(
            scenario, None, scenario.param_index(param), FD_SPEC
        )
        assert report[param].dtcr_dp == pytest.approx(oracle, rel=0.1)


@pytest.mark.slow
@pytest.mark.timeout(1800)
def test_three_machine_cct_is_linear_in_pm2(three_machine):
    scenario, _ = three_machine
    values = np.array([0.62, 0.66, 0.70, 0.74, 0.78])
    index = scenario.param_index("Pm2")
    times = []
    for value in values:
        p = scenario.p0.copy()
        p[index] = value
        times.append(find_cct(scenario, p, tol=1e-4).t_cr)
    times = np.array(times)
    slope, intercept = np.polyfit(values, times, 1)
    residual = np.sum((times - (slope * values + intercept)) ** 2)
    r_squared = 1 - residual / np.sum((times - np.mean(times)) ** 2)
    assert r_squared >= 0.98
    assert slope > 0
