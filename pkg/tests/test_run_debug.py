from cct_searcher import CriticalClearingTimeSearcher
from cct_searcher.models import load_scenario


def test_run_with_debug():
    scenario = load_scenario("smib")
    searcher = CriticalClearingTimeSearcher(scenario, tol=0.05, debug=True)
    result = searcher.find_cct()
    assert result.t_stable < result.t_unstable
    assert searcher.func_calls["post-fault simulation"] > 0
