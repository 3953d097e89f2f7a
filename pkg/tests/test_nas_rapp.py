import dataclasses

import numpy as np

import pytest

from nasran.errors import ConfigError, NasranError
from nasran.lstm_core import ArchSpec, TrainConfig, param_count
from nasran.nas_rapp import (TABLE_PARAMS, CandidateResult, candidate_names, candidate_space,
                             efficiency_score, nominal_costs, rank_key, run_search,
                             table_mismatch)
from nasran.traffic import TraceConfig, generate_trace, window_dataset

EQ1 = {
    "Lightweight-32": 5_025,
    "Lightweight-64": 18_241,
    "Balanced-Small": 31_137,
    "Balanced-Medium": 73_851,
    "Deep-Performance": 205_073,
    "Ultra-Performance": 2_068_097,
}


def eq1_by_hand(dims, d_x):
    total, d_in = 0, d_x
    for h in dims:
        total += 4 * (d_in * h + h * h + h)
        d_in = h
    return total + dims[-1] + 1


def test_space_matches_definitions():
    space = candidate_space()
    assert [s.name for s in space] == list(EQ1) == candidate_names()
    assert [s.hidden_dims for s in space] == [(32,), (64,), (64, 32), (100, 50),
                                              (128, 100, 64), (512, 256, 128)]
    assert [s.d_x for s in space] == [6, 6, 8, 8, 10, 16]
    for s in space:
        assert param_count(s) == EQ1[s.name] == eq1_by_hand(s.hidden_dims, s.d_x)
    assert nominal_costs() == EQ1


def test_table_comparison_flags():
    flagged = {n for n in EQ1 if table_mismatch(n)}
    assert flagged == {"Lightweight-32", "Lightweight-64", "Balanced-Small", "Ultra-Performance"}
    assert TABLE_PARAMS["Balanced-Medium"] == 74_000


def test_efficiency_examples():
    assert abs(efficiency_score(0.996, 2_068_097, 2_068_097) - 0.996) < 1e-15
    assert efficiency_score(0.0, 5_025, 2_068_097) == 0.0
    assert abs(efficiency_score(0.9, 1_000, 2_000) - 1.8) < 1e-15
    with pytest.raises(ValueError):
        efficiency_score(0.9, 0, 10)


def _result(name, c, eff):
    spec = ArchSpec(name, (2,), 6)
    return CandidateResult(spec, None, c, c / 100, eff)


def test_rank_ties_prefer_cheaper_then_name():
    rs = [_result("b", 50, 1.0), _result("a", 50, 1.0), _result("c", 20, 1.0), _result("d", 5, 2.0)]
    assert [r.name for r in sorted(rs, key=rank_key)] == ["d", "c", "a", "b"]


def test_ranking_invariant_to_cost_rescaling():
    perf = {"Lightweight-32": 0.97, "Lightweight-64": 0.98, "Balanced-Small": 0.985,
            "Balanced-Medium": 0.99, "Deep-Performance": 0.993, "Ultra-Performance": 0.996}

    def order(k):
        costs = {n: k * c for n, c in EQ1.items()}
        cmax = max(costs.values())
        rs = [_result(n, costs[n], efficiency_score(perf[n], costs[n], cmax)) for n in EQ1]
        return [r.name for r in sorted(rs, key=rank_key)]

    assert order(1) == order(3) == order(1000)


def test_c_norm_one_only_for_largest():
    cmax = max(EQ1.values())
    assert [n for n, c in EQ1.items() if c / cmax == 1.0] == ["Ultra-Performance"]


@pytest.fixture(scope="module")
def tiny_dataset():
    cfg = TraceConfig(duration_steps=1440, critical_windows=((700, 60), (1300, 60)))
    return window_dataset(generate_trace(cfg, 5), 8, 16)


def tiny_space():
    return [ArchSpec("A", (3,), 6, 8), ArchSpec("B", (4, 3), 8, 8), ArchSpec("C", (5,), 16, 8)]


def test_search_on_tiny_space(tiny_dataset):
    cfg = TrainConfig(epochs=1, batch_size=64, lr=3e-3)
    out = run_search(tiny_dataset, cfg, seed=1, space=tiny_space())
    assert sorted(r.name for r in out.ranked) == ["A", "B", "C"]
    assert out.ranked == sorted(out.ranked, key=rank_key)
    cmax = max(r.c_lstm for r in out.ranked)
    for r in out.ranked:
        P = min(1.0, max(0.0, r.report.r2_overall))
        assert abs(r.efficiency - P * cmax / r.c_lstm) < 1e-12
    assert out.selected_default in {"A", "B", "C"}
    assert out.dataset_fingerprint == tiny_dataset.fingerprint()
    again = run_search(tiny_dataset, cfg, seed=1, space=tiny_space())
    assert again.to_dict() == out.to_dict()


def test_failed_candidates_are_excluded(tiny_dataset):
    cfg = TrainConfig(epochs=1, batch_size=64, lr=1e300, clip_norm=1e300, optimizer="sgd")
    space = [ArchSpec("Blowup", (3,), 6, 8)]
    with pytest.raises(NasranError, match="every candidate"):
        run_search(tiny_dataset, cfg, space=space)


def test_search_needs_widest_features(tiny_dataset):
    narrow = tiny_dataset.with_features(8)
    with pytest.raises(ConfigError, match="16"):
        run_search(narrow, TrainConfig(epochs=1), space=tiny_space())


def test_scaled_training_charges_nominal_cost(tiny_dataset):
    cfg = TrainConfig(epochs=1, batch_size=64)
    space = [dataclasses.replace(s) for s in tiny_space()]
    out = run_search(tiny_dataset, cfg, scale=0.5, space=space)
    for r in out.ranked:
        assert r.c_lstm == param_count(r.spec)
        assert r.model.n_params() == param_count(r.spec.scaled(0.5))


def test_without_critical_examples_selection_falls_back(tiny_dataset):
    quiet = tiny_dataset.subset(np.flatnonzero(~tiny_dataset.critical))
    out = run_search(quiet, TrainConfig(epochs=1, batch_size=64), space=tiny_space())
    assert not out.critical_evidence
    assert all(r.report.r2_critical is None for r in out.ranked)
    best = max(out.ranked, key=lambda r: (r.report.r2_overall, -r.c_lstm))
    assert out.selected_critical == best.name
