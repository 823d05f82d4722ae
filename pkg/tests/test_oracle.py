import numpy as np
import pytest

from cct_searcher.exception import InvalidParameter
from cct_searcher.models import SMIB_BASE, smib_model
from cct_searcher.oracle import (
    FdSpec,
    closed_form_faulton,
    fd_cct_sensitivity,
    fd_refinement_gap,
)

DELTA_S = np.arcsin(0.6)


def test_fd_spec_checks():
    FdSpec().check()
    with pytest.raises(InvalidParameter):
        FdSpec(delta=0.0).check()
    with pytest.raises(InvalidParameter):
        FdSpec(cct_tol=0.1).check()
    with pytest.raises(InvalidParameter):
        FdSpec(scheme="forward").check()
    assert FdSpec().perturbation(0.25) == pytest.approx(1e-3)
    assert FdSpec().perturbation(-4.0) == pytest.approx(4e-3)


def test_closed_form_start():
    exact = closed_form_faulton(SMIB_BASE, 0.0)
    assert exact.delta == pytest.approx(DELTA_S)
    assert exact.omega == 0.0
    assert exact.domega_dPm == 0.0


def test_closed_form_speed_reaches_the_limit():
    exact = closed_form_faulton(SMIB_BASE, 0.5 * np.log(6))
    assert exact.omega == pytest.approx(1.0)


def test_closed_form_rejects_bad_inertia():
    with pytest.raises(InvalidParameter):
        closed_form_faulton((0.6, 0.0), 0.5)


def test_closed_form_matches_finite_differences():
    eps = 1e-6
    plus = closed_form_faulton((0.6, 0.25 + eps), 0.7, delta0=DELTA_S)
    minus = closed_form_faulton((0.6, 0.25 - eps), 0.7, delta0=DELTA_S)
    exact = closed_form_faulton((0.6, 0.25), 0.7)
    assert exact.ddelta_dM == pytest.approx((plus.delta - minus.delta) / (2 * eps))
    assert exact.domega_dM == pytest.approx((plus.omega - minus.omega) / (2 * eps))


@pytest.mark.timeout(300)
def test_fd_at_the_base_point():
    scenario = smib_model()
    slope = fd_cct_sensitivity(scenario, None, scenario.param_index("wmax"))
    assert slope == pytest.approx(2.5, rel=1e-2)


def test_fd_rejects_bad_spec():
    with pytest.raises(InvalidParameter):
        fd_cct_sensitivity(smib_model(), None, 0, FdSpec(delta=-1.0))


@pytest.mark.slow
@pytest.mark.timeout(600)
def test_halving_the_perturbation_barely_moves_the_slope():
    scenario = smib_model()
    spec = FdSpec(delta=1e-2)
    gap = fd_refinement_gap(scenario, None, scenario.param_index("wmax"), spec)
    assert gap < 0.05
