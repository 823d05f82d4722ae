import os

import numpy as np
import pytest

from cct_searcher.exception import (
    DimensionMismatch,
    InvalidParameter,
    ScenarioNotFound,
    ScenarioParseError,
    ScenarioRejected,
)
from cct_searcher.models import (
    SMIB_BASE,
    Scenario,
    find_equilibrium,
    load_scenario,
    multimachine_model,
    read_scenario_file,
    shipped_scenarios,
    smib_model,
    symbolic_model,
    validate_feasibility_boundary,
)
from cct_searcher.models.scenario import SCENARIO_DIRECTORY

DELTA_U = np.pi - np.arcsin(0.6)


def test_shipped_scenarios():
    assert shipped_scenarios() == ["smib", "smib_angle_limit", "threemachine"]


def test_load_smib_by_name():
    scenario = load_scenario("smib")
    assert scenario.name == "smib"
    assert scenario.dim == 2
    assert scenario.param_names == ("Pm", "M", "dmax", "wmax")
    assert np.allclose(scenario.p0, SMIB_BASE)
    assert scenario.h_comb.count == 2
    assert scenario.window.shape == (2, 2)


def test_load_by_path_with_overrides():
    path = os.path.join(SCENARIO_DIRECTORY, "smib.ini")
    scenario = load_scenario(path, {"dmax": 2.26})
    assert scenario.p0[scenario.param_index("dmax")] == pytest.approx(2.26)


def test_file_and_builder_agree():
    from_file = load_scenario("smib")
    built = smib_model()
    x = np.array([1.0, 0.3])
    for a, b in ((from_file.fault, built.fault), (from_file.post, built.post)):
        assert np.allclose(a.f(x, from_file.p0), b.f(x, built.p0))


def test_missing_scenario():
    with pytest.raises(ScenarioNotFound, match="scenario not found"):
        load_scenario("no_such_scenario")


def test_unknown_override():
    with pytest.raises(InvalidParameter):
        load_scenario("smib", {"Q": 1.0})


def test_parameter_checks():
    scenario = smib_model()
    with pytest.raises(InvalidParameter):
        scenario.param_index("Q")
    with pytest.raises(InvalidParameter):
        scenario.parameters({"M": -0.1})
    with pytest.raises(InvalidParameter):
        smib_model((0.6, 0.0, 2.4434, 1.0))
    with pytest.raises(DimensionMismatch):
        smib_model((0.6, 0.25))
    p = scenario.parameters({"Pm": 0.5})
    assert p[0] == 0.5
    assert scenario.p0[0] == 0.6


def test_with_parameters():
    scenario = smib_model().with_parameters({"wmax": 1.5})
    assert scenario.p0[3] == 1.5
    assert scenario.to_jsonable()["parameters"]["wmax"] == 1.5


def test_equilibrium_on_boundary_is_rejected():
    with pytest.raises(ScenarioRejected):
        smib_model((0.6, 0.25, DELTA_U, 1.0))


def test_round_trip_through_dictionary():
    scenario = smib_model((0.6, 0.2, 2.0, 1.5))
    rebuilt = Scenario.from_dict(scenario.to_jsonable())
    assert np.allclose(rebuilt.p0, scenario.p0)
    x = np.array([0.7, -0.2])
    assert rebuilt.h_comb.H(x, rebuilt.p0) == pytest.approx(
        scenario.h_comb.H(x, scenario.p0)
    )


def test_read_scenario_file():
    config = read_scenario_file(os.path.join(SCENARIO_DIRECTORY, "threemachine.ini"))
    assert config["kind"] == "multimachine"
    assert config["machines"]["M"] == [0.1, 0.15, 0.3]
    assert config["fault"]["G"][0] == [0.0, 0.0, 0.0]
    assert list(config["parameters"]) == ["Pm1", "Pm2", "Pm3"]


def test_malformed_file(tmp_path):
    path = tmp_path / "broken.ini"
    path.write_text("[scenario]\nname = broken\n[parameters]\na = 1\n")
    with pytest.raises(ScenarioParseError):
        load_scenario(str(path))


def test_symbolic_scenario_needs_every_equation():
    config = {
        "name": "incomplete",
        "states": ["x", "y"],
        "parameters": {"a": 1.0},
        "pre": {"x": "y", "y": "-x - a*y"},
        "fault": {"x": "y"},
        "post": {"x": "y", "y": "-x - a*y"},
        "constraints": {"limit": "2 - x"},
    }
    with pytest.raises(DimensionMismatch):
        symbolic_model(config)


def test_angle_limit_scenario():
    scenario = load_scenario("smib_angle_limit")
    assert scenario.h_post.count == 1
    assert scenario.param_names == ("Pm", "M")
    assert scenario.h_post.H(np.array([1.5, 0.0]), scenario.p0) == pytest.approx(0.5)


@pytest.mark.slow
def test_three_machine_scenario():
    scenario = load_scenario("threemachine")
    assert scenario.dim == 5
    assert scenario.param_names == ("Pm1", "Pm2", "Pm3")
    x = np.zeros(5)
    x[0] = 1.0
    assert scenario.h_post.H(x, scenario.p0) == pytest.approx(np.pi / 2 - 1.0)


def two_machine_dataset():
    network = {"G": [[0.5, 0.0], [0.0, 0.5]], "B": [[-2.0, 2.0], [2.0, -2.0]]}
    return {
        "name": "twin",
        "machines": {"M": [0.2, 0.2], "E": [1.0, 1.0]},
        "parameters": {"Pm1": 0.5, "Pm2": 0.5},
        "pre": network,
        "fault": network,
        "post": network,
        "constraints": {"angle": "pi/2 - delta1"},
    }


def test_symmetric_machines_settle_together():
    scenario = multimachine_model(two_machine_dataset(), validate=False)
    assert scenario.dim == 3
    assert np.allclose(scenario.post.f(np.zeros(3), scenario.p0), 0.0, atol=1e-12)
    sep = find_equilibrium(scenario.post, scenario.p0, [0.1, 0.0, 0.0])
    assert np.allclose(sep.x, 0.0, atol=1e-10)


def test_multimachine_dataset_errors():
    dataset = two_machine_dataset()
    dataset["machines"] = {"M": [0.2, 0.2], "E": [1.0]}
    with pytest.raises(DimensionMismatch):
        multimachine_model(dataset)
    dataset = two_machine_dataset()
    dataset["post"] = {"G": [[0.5]], "B": [[-2.0]]}
    with pytest.raises(DimensionMismatch):
        multimachine_model(dataset)
    dataset = two_machine_dataset()
    dataset["machines"] = {"M": [0.2, -0.2], "E": [1.0, 1.0]}
    with pytest.raises(InvalidParameter):
        multimachine_model(dataset)


def test_boundary_seed_grid_from_the_file(tmp_path):
    with open(os.path.join(SCENARIO_DIRECTORY, "smib.ini")) as f:
        text = f.read()
    path = tmp_path / "narrow.ini"
    path.write_text(
        text.replace("[scenario]\n", "[scenario]\nboundary_radius = 0.01\n", 1)
        .replace("t_max = 10\n", "t_max = 10\nboundary_points = 3\n", 1)
    )
    config = read_scenario_file(str(path))
    assert config["boundary_radius"] == 0.01
    assert config["boundary_points"] == 3
    scenario = load_scenario(str(path))
    assert scenario.config["boundary_radius"] == 0.01
    with pytest.raises(ScenarioRejected):
        load_scenario(str(path), {"dmax": DELTA_U})
    with pytest.raises(InvalidParameter):
        validate_feasibility_boundary(scenario, scenario.p0, points_per_axis=0)


def test_combined_constraints_are_built_once():
    scenario = smib_model()
    assert scenario.h_comb is scenario.h_comb
    assert scenario.h_comb.count == 2
