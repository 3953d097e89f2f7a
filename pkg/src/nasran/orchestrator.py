"""Regime detection and model-selection policy."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, RegistryError
from .nas_rapp import nominal_costs
from .traffic import Regime

REASONS = ("load-threshold", "prediction-surprise", "dwell-hold", "init")


@dataclass(frozen=True)
class PolicyConfig:
    regular_model: str = "Balanced-Medium"
    critical_model: str | None = None  # None: follow the latest search's selected_critical
    tau_hi: float = 0.75
    tau_lo: float = 0.6
    min_dwell: int = 30
    sigma: float = 0.1
    smooth_window: int = 5

    def validate(self):
        if not self.tau_lo < self.tau_hi:
            raise ConfigError(f"tau_lo ({self.tau_lo}) must be below tau_hi ({self.tau_hi})",
                              keys=["tau_lo", "tau_hi"])
        if self.min_dwell < 1:
            raise ConfigError("min_dwell must be >= 1", keys=["min_dwell"])
        if self.sigma <= 0:
            raise ConfigError("sigma must be > 0", keys=["sigma"])
        if self.smooth_window < 1:
            raise ConfigError("smooth_window must be >= 1", keys=["smooth_window"])


@dataclass(frozen=True)
class OrchestrationDecision:
    t: int
    regime: Regime
    chosen_model: str
    switched: bool
    reason: str
    param_cost: int
    fallback: bool = False


def detect_regime(recent_loads: Sequence[float], previous: Regime, cfg: PolicyConfig,
                  last_error: float | None = None, dwell: int | None = None):
    """Next regime and the reason for it.

    Critical is entered when the mean of the last ``smooth_window`` loads
    exceeds ``tau_hi`` or the last prediction error exceeds ``sigma``; it is
    left only once the smoothed load is below ``tau_lo``. Either change
    additionally needs ``dwell`` (steps spent in ``previous``) to have
    reached ``min_dwell``. ``dwell=None`` means "long enough".
    """
    loads = np.asarray(recent_loads, dtype=np.float64)
    if loads.size < 1:
        raise ValueError("detect_regime needs at least one load sample")
    smoothed = float(np.mean(loads[-cfg.smooth_window:]))
    settled = dwell is None or dwell >= cfg.min_dwell
    if previous == Regime.REGULAR:
        if smoothed > cfg.tau_hi:
            reason = "load-threshold"
        elif last_error is not None and abs(last_error) > cfg.sigma:
            reason = "prediction-surprise"
        else:
            return Regime.REGULAR, "load-threshold"
        return (Regime.CRITICAL, reason) if settled else (Regime.REGULAR, "dwell-hold")
    if smoothed < cfg.tau_lo:
        return (Regime.REGULAR, "load-threshold") if settled else (Regime.CRITICAL, "dwell-hold")
    return Regime.CRITICAL, "load-threshold"


class RegimeDetector:
    """Stateful wrapper around :func:`detect_regime` for a step-by-step loop."""

    def __init__(self, cfg: PolicyConfig):
        cfg.validate()
        self.cfg = cfg
        self.regime = Regime.REGULAR
        self.dwell = None
        self._loads: list[float] = []

    def update(self, load: float, last_error: float | None = None):
        self._loads.append(float(load))
        if len(self._loads) > self.cfg.smooth_window:
            del self._loads[0]
        regime, reason = detect_regime(self._loads, self.regime, self.cfg, last_error, self.dwell)
        if regime != self.regime:
            self.regime = regime
            self.dwell = 1
        elif self.dwell is not None:
            self.dwell += 1
        return regime, reason


def select_model(regime: Regime, policy: PolicyConfig, registry, previous: str | None = None, *,
                 t: int = 0, reason: str = "load-threshold", selected_critical: str | None = None,
                 r2_critical: Mapping[str, float] | None = None,
                 costs: Mapping[str, int] | None = None) -> OrchestrationDecision:
    """Pick the model for ``regime`` and activate it in ``registry`` if it changed.

    When the named model is not registered, falls back to the registered
    model with the best critical-regime R^2 (``r2_critical``; largest nominal
    cost if unknown) and flags the decision.
    """
    names = registry.names()
    if not names:
        raise RegistryError("cannot select a model from an empty registry")
    costs = nominal_costs() if costs is None else costs
    if regime == Regime.CRITICAL:
        wanted = policy.critical_model or selected_critical
    else:
        wanted = policy.regular_model
    fallback = wanted not in names
    if fallback:
        scores = r2_critical or {}
        wanted = max(names, key=lambda n: (scores.get(n, -math.inf), costs.get(n, 0), n))
    switched = previous is not None and wanted != previous
    if registry.active != wanted:
        registry.activate(wanted)
    return OrchestrationDecision(t, regime, wanted, switched, reason,
                                 _cost(wanted, registry, costs), fallback)


def _cost(name, registry, costs):
    if name in costs:
        return int(costs[name])
    return registry.get(name).param_cost


def complexity_reduction(decisions: Sequence[OrchestrationDecision], baseline: str,
                         costs: Mapping[str, int] | None = None) -> float:
    """Percent reduction of the mean per-step parameter cost against ``baseline``."""
    costs = nominal_costs() if costs is None else costs
    if baseline not in costs:
        raise ConfigError(f"unknown baseline model {baseline!r}", keys=["baseline"])
    if not decisions:
        raise ValueError("decision log is empty")
    mean_cost = float(np.mean([costs[d.chosen_model] for d in decisions]))
    return 100.0 * (1.0 - mean_cost / costs[baseline])
