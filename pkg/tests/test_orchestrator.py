import pytest

from nasran.errors import ConfigError
from nasran.nas_rapp import init_model, nominal_costs, nominal_spec
from nasran.orchestrator import (OrchestrationDecision, PolicyConfig, RegimeDetector,
                                 complexity_reduction, detect_regime, select_model)
from nasran.traffic import Regime
from nasran.xapp_agent import ModelRegistry

CFG = PolicyConfig()
R, C = Regime.REGULAR, Regime.CRITICAL


def test_detector_threshold_examples():
    assert detect_regime([0.8] * 5, R, CFG)[0] == C
    assert detect_regime([0.7] * 5, R, CFG)[0] == R
    assert detect_regime([0.7] * 5, C, CFG)[0] == C
    assert detect_regime([0.5] * 5, C, CFG)[0] == R


def test_prediction_surprise_enters_critical():
    regime, reason = detect_regime([0.3] * 5, R, CFG, last_error=0.2)
    assert (regime, reason) == (C, "prediction-surprise")
    assert detect_regime([0.3] * 5, R, CFG, last_error=0.05)[0] == R


def test_smoothing_uses_trailing_window():
    assert detect_regime([0.0] * 20 + [0.9] * 5, R, CFG)[0] == C
    assert detect_regime([0.9] * 20 + [0.1] * 5, R, CFG)[0] == R


def test_dwell_holds_the_regime():
    assert detect_regime([0.9] * 5, R, CFG, dwell=3) == (R, "dwell-hold")
    assert detect_regime([0.1] * 5, C, CFG, dwell=29) == (C, "dwell-hold")
    assert detect_regime([0.1] * 5, C, CFG, dwell=30)[0] == R


def test_hysteresis_band_is_sticky():
    det = RegimeDetector(CFG)
    for _ in range(10):
        det.update(0.9)
    assert det.regime == C
    for _ in range(100):
        assert det.update(0.68)[0] == C


def test_switch_count_bounded_by_dwell():
    det = RegimeDetector(CFG)
    regimes = []
    for k in range(600):
        regimes.append(det.update(0.95 if k % 2 else 0.05)[0])
    switches = sum(a != b for a, b in zip(regimes, regimes[1:]))
    assert switches <= 600 / CFG.min_dwell


def test_policy_rejects_inverted_thresholds():
    with pytest.raises(ConfigError) as info:
        PolicyConfig(tau_hi=0.7, tau_lo=0.9).validate()
    assert "tau_lo" in str(info.value) and "tau_hi" in str(info.value)


def _decisions(names):
    costs = nominal_costs()
    return [OrchestrationDecision(t, R, n, False, "load-threshold", costs[n])
            for t, n in enumerate(names)]


def test_reduction_examples():
    all_medium = _decisions(["Balanced-Medium"] * 100)
    assert abs(complexity_reduction(all_medium, "Deep-Performance") - 100 * (1 - 73_851 / 205_073)) < 1e-9
    assert abs(complexity_reduction(all_medium, "Deep-Performance") - 63.99) < 0.01
    mixed = _decisions(["Balanced-Medium"] * 95 + ["Deep-Performance"] * 5)
    expected = 100 * (1 - (0.95 * 73_851 + 0.05 * 205_073) / 205_073)
    assert abs(complexity_reduction(mixed, "Deep-Performance") - expected) < 1e-9
    assert abs(expected - 60.79) < 0.01
    assert complexity_reduction(_decisions(["Deep-Performance"] * 7), "Deep-Performance") == 0


def test_reduction_monotone_in_escalation_share():
    out = [complexity_reduction(_decisions(["Balanced-Medium"] * (100 - k) + ["Ultra-Performance"] * k),
                                "Deep-Performance") for k in range(0, 101, 10)]
    assert all(a > b for a, b in zip(out, out[1:]))


def test_reduction_invariant_to_cost_rescaling():
    names = ["Balanced-Medium"] * 90 + ["Deep-Performance"] * 10
    base = complexity_reduction(_decisions(names), "Ultra-Performance")
    scaled = {n: 7 * c for n, c in nominal_costs().items()}
    assert abs(complexity_reduction(_decisions(names), "Ultra-Performance", scaled) - base) < 1e-9


def test_reduction_unknown_baseline():
    with pytest.raises(ConfigError, match="baseline"):
        complexity_reduction(_decisions(["Balanced-Medium"]), "Tiny")


def _registry(*names):
    reg = ModelRegistry()
    for n in names:
        reg.publish(init_model(nominal_spec(n), 0))
    return reg


def test_select_model_switches_and_activates():
    reg = _registry("Balanced-Medium", "Deep-Performance")
    d = select_model(R, CFG, reg, None, selected_critical="Deep-Performance")
    assert d.chosen_model == "Balanced-Medium" and not d.switched and reg.active == "Balanced-Medium"
    d = select_model(C, CFG, reg, d.chosen_model, selected_critical="Deep-Performance")
    assert d.chosen_model == "Deep-Performance" and d.switched and not d.fallback
    assert d.param_cost == 205_073 and reg.active == "Deep-Performance"


def test_select_model_fallback_prefers_best_critical_r2():
    reg = _registry("Balanced-Medium", "Lightweight-32")
    d = select_model(C, CFG, reg, "Balanced-Medium", selected_critical="Ultra-Performance",
                     r2_critical={"Balanced-Medium": 0.7, "Lightweight-32": 0.8})
    assert d.fallback and d.chosen_model == "Lightweight-32"
