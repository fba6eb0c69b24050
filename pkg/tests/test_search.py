import numpy as np
import pytest

from relayqkd.protocol import build_conditional_states, rate_detailed
from relayqkd.scenario import ideal_spec, resolve, set_path
from relayqkd.search import SearchDims, candidate_spec, evaluate_candidate, reevaluate, search_positive_delta


def test_budget_one_is_ideal_scenario():
    res = search_positive_delta(1, seed=4)
    assert res.best["candidate"] == 0
    assert res.Delta == 0
    assert not res.witness and res.witnesses == []
    assert res.coherent_conditional == pytest.approx(1)


def test_search_is_deterministic():
    a = search_positive_delta(6, seed=2).to_dict()
    b = search_positive_delta(6, seed=2).to_dict()
    assert a == b


def test_parallel_matches_serial():
    assert search_positive_delta(6, seed=5, jobs=2).to_dict() == search_positive_delta(6, seed=5).to_dict()


@pytest.mark.parametrize("seed", [0, 1])
def test_best_reevaluates(seed):
    res = search_positive_delta(8, seed=seed)
    rep = reevaluate(res)
    assert abs(rep.Delta - res.Delta) < 1e-9
    assert abs(rep.coherent_conditional - res.coherent_conditional) < 1e-9


def test_trivial_e_never_leaks():
    dims = SearchDims(e_max=1)
    res = search_positive_delta(10, dims, seed=3)
    assert not res.witness
    for i in range(10):
        r = evaluate_candidate(i, 3, dims, 1e-4, 1e-4)
        assert r.Delta == 0.0
        assert resolve(r.spec).instrument.output_layout.total_dim == 1


@pytest.mark.parametrize("eps", np.linspace(0, 1, 6))
def test_partial_leak_with_trivial_e_has_zero_delta(eps):
    cfg = resolve(set_path(ideal_spec(), "cheating", {"preset": "partial_leak", "eps": float(eps)}))
    assert rate_detailed(build_conditional_states(cfg), cfg.measurement).Delta == 0.0


def test_score_definition():
    r = evaluate_candidate(3, 0, SearchDims(), 1e-4, 1e-4)
    assert r.score == pytest.approx(min(r.Delta, 1e-4 - abs(r.coherent_conditional)))


def test_candidates_are_seeded():
    dims = SearchDims()
    assert candidate_spec(5, 1, dims) == candidate_spec(5, 1, dims)
    assert candidate_spec(5, 1, dims) != candidate_spec(5, 2, dims)


def test_noise_tuning_reaches_zero_coherence():
    # every tuned candidate either started non-positive or was driven onto the zero crossing
    for i in range(1, 8):
        r = evaluate_candidate(i, 0, SearchDims(), 1e-4, 1e-4)
        assert r.noise == 0.0 or abs(r.coherent_conditional) < 1e-8


def test_budget_must_be_positive():
    with pytest.raises(ValueError):
        search_positive_delta(0)
