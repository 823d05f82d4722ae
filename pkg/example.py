"""
In this file an example is given of how to describe a power system by its
equations and search the critical clearing time of a fault.

A machine against an infinite bus, whose speed deviation must stay below
wmax. While the fault is on the machine accelerates freely and reaches the
limit at t = M / D ln(Pm / (Pm - D wmax)).

>>> scenario = symbolic_model(governed_machine)
>>> scenario.param_names
('Pm', 'M', 'wmax')
>>> result = find_cct(scenario)
>>> result.category
1
>>> round(result.t_cr, 4)
0.8959

The sensitivities follow from differentiating the fault trajectory up to the
clearing time.

>>> report = sensitivity_report(scenario, scenario.p0, result)
>>> [round(entry.dtcr_dp, 2) for entry in report]
[-4.17, 3.58, 2.5]

A heavier machine can be cleared later.

>>> heavier = scenario.with_parameters({"M": 0.3})
>>> find_cct(heavier).t_cr > result.t_cr
True
"""
from typing import Any, Dict

from cct_searcher import find_cct, sensitivity_report
from cct_searcher.models import symbolic_model

swing = "(Pm - sin(delta) - D*omega)/M"

governed_machine: Dict[str, Any] = {
    "name": "governed machine",
    "states": ["delta", "omega"],
    "parameters": {"Pm": 0.6, "M": 0.25, "wmax": 1.0},
    "constants": {"D": 0.5},
    "positive": ["M", "wmax"],
    "pre": {"delta": "omega", "omega": swing},
    "fault": {"delta": "omega", "omega": "(Pm - D*omega)/M"},
    "post": {"delta": "omega", "omega": swing},
    "constraints": {"speed": "wmax - omega"},
    "sep_guess": [0.5, 0.0],
}

if __name__ == "__main__":
    machine = symbolic_model(governed_machine)
    cct = find_cct(machine)
    print(cct)
    print(sensitivity_report(machine, machine.p0, cct).table())
