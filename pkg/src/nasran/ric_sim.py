"""Closed-loop RIC simulation: warmup search, online replay, periodic re-search.

Timeline for a trace of ``n`` steps::

    [0, warmup)          initial training + search (non-RT)
    [warmup, end)        per-step predict -> observe -> detect -> select (near-RT)

Every ``rapp_period`` online steps a refresh search is submitted to a
background worker on the trailing ``refresh_history`` steps. Its models are
published at ``trigger + search_delay + 1`` regardless of how long the job
really took, which keeps runs reproducible.
"""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import metrics
from .errors import ConfigError
from .lstm_core import TrainConfig
from .metrics import EvalReport
from .nas_rapp import SearchOutcome, candidate_names, nominal_costs, run_search
from .orchestrator import (OrchestrationDecision, PolicyConfig, RegimeDetector, select_model)
from .traffic import Regime, TraceConfig, feature_matrix, generate_trace, window_dataset
from .xapp_agent import ModelRegistry

log = logging.getLogger(__name__)

HEAVY_BASELINES = ("Deep-Performance", "Ultra-Performance")

DEFAULT_TRACE = TraceConfig(
    duration_steps=7200,
    critical_windows=((300, 120), (660, 120), (1140, 90), (1620, 120), (2000, 100),
                      (2400, 120), (5100, 120)),
)
DEFAULT_TRAIN = TrainConfig(epochs=20, lr=3e-3)


@dataclass(frozen=True)
class ScenarioConfig:
    scenario_id: str = "default"
    W: int = 24
    scale: float = 0.5
    warmup_fraction: float = 0.4
    online_steps: int = 0  # 0 replays everything after warmup
    rapp_period: int = 1440
    search_delay: int = 30
    refresh_epochs: int = 3
    refresh_history: int = 2880
    seed_trace: int = 42
    seed_train: int = 42
    seed_search: int = 42
    baseline: str = "Deep-Performance"
    output_dir: str = "runs/default"
    trace: TraceConfig = DEFAULT_TRACE
    train: TrainConfig = DEFAULT_TRAIN
    policy: PolicyConfig = PolicyConfig()

    @property
    def duration_steps(self):
        return self.trace.duration_steps

    @property
    def warmup_steps(self):
        return int(round(self.duration_steps * self.warmup_fraction))

    def with_seed(self, seed: int) -> ScenarioConfig:
        return replace(self, seed_trace=seed, seed_train=seed, seed_search=seed)

    def validate(self):
        self.trace.validate()
        self.train.validate()
        self.policy.validate()
        if self.W < 1:
            raise ConfigError("W must be >= 1", keys=["W"])
        if not 0 < self.scale <= 1:
            raise ConfigError("scale must be in (0, 1]", keys=["scale"])
        if not 0 < self.warmup_fraction < 1:
            raise ConfigError("warmup_fraction must be in (0, 1)", keys=["warmup_fraction"])
        if self.rapp_period < 10 * self.W:
            raise ConfigError(f"rapp_period ({self.rapp_period}) must be >= 10 * W ({10 * self.W})",
                              keys=["rapp_period", "W"])
        if self.duration_steps < self.rapp_period:
            raise ConfigError("duration_steps must be >= rapp_period",
                              keys=["duration_steps", "rapp_period"])
        if self.online_steps < 0:
            raise ConfigError("online_steps must be >= 0", keys=["online_steps"])
        if self.search_delay < 0:
            raise ConfigError("search_delay must be >= 0", keys=["search_delay"])
        if self.refresh_epochs < 1:
            raise ConfigError("refresh_epochs must be >= 1", keys=["refresh_epochs"])
        if self.refresh_history <= self.W + 1:
            raise ConfigError("refresh_history must exceed W + 1", keys=["refresh_history"])
        if self.baseline not in candidate_names():
            raise ConfigError(f"unknown baseline {self.baseline!r}", keys=["baseline"])
        if self.warmup_steps >= self.duration_steps:
            raise ConfigError("warmup leaves no online steps", keys=["warmup_fraction"])


@dataclass(frozen=True)
class PredictionRow:
    t: int
    predicted: float
    actual: float
    model: str
    version: int
    param_cost: int
    regime: Regime


@dataclass
class SimulationReport:
    scenario_id: str
    mode: str
    evals: list[EvalReport]
    search: dict
    refreshes: list[dict]
    decisions: list[OrchestrationDecision]
    predictions: list[PredictionRow]
    reductions: dict[str, float]
    switch_count: int
    online: dict

    def to_dict(self):
        return {
            "scenario_id": self.scenario_id,
            "mode": self.mode,
            "evals": [e.to_dict() for e in self.evals],
            "search": self.search,
            "refreshes": self.refreshes,
            "reductions": self.reductions,
            "switch_count": self.switch_count,
            "online": self.online,
            "decisions": [
                [d.t, d.regime.value, d.chosen_model, d.switched, d.reason, d.param_cost, d.fallback]
                for d in self.decisions
            ],
            "predictions": [
                [p.t, p.predicted, p.actual, p.model, p.version, p.param_cost, p.regime.value]
                for p in self.predictions
            ],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            scenario_id=d["scenario_id"],
            mode=d["mode"],
            evals=[EvalReport.from_dict(e) for e in d["evals"]],
            search=d["search"],
            refreshes=d["refreshes"],
            decisions=[OrchestrationDecision(t, Regime(r), m, s, why, c, fb)
                       for t, r, m, s, why, c, fb in d["decisions"]],
            predictions=[PredictionRow(t, p, a, m, v, c, Regime(r))
                         for t, p, a, m, v, c, r in d["predictions"]],
            reductions=d["reductions"],
            switch_count=d["switch_count"],
            online=d["online"],
        )

    def mean_param_cost(self) -> float:
        return float(np.mean([p.param_cost for p in self.predictions]))


def _models_key(models):
    if not models:
        return None
    h = hashlib.sha256()
    for name in sorted(models):
        h.update(name.encode())
        for a in models[name].arrays():
            h.update(a.tobytes())
    return h.hexdigest()


class SearchCache:
    """Memoizes search outcomes; searches are pure functions of their inputs."""

    def __init__(self):
        self._store = {}

    def run(self, dataset, cfg, scale, *, seed, warm_start=None, epochs=None) -> SearchOutcome:
        key = (dataset.fingerprint(), cfg, scale, seed, _models_key(warm_start), epochs)
        if key not in self._store:
            self._store[key] = run_search(dataset, cfg, scale, seed=seed,
                                          warm_start=warm_start, epochs=epochs)
        return self._store[key]


def online_metrics(predictions) -> dict:
    pred = np.array([p.predicted for p in predictions])
    actual = np.array([p.actual for p in predictions])
    critical = np.array([p.regime == Regime.CRITICAL for p in predictions])
    rep = metrics.evaluate_predictions("online", 0, pred, actual, critical)
    return {
        "mae": rep.mae,
        "rmse": rep.rmse,
        "mape_percent": rep.mape_percent,
        "r2": rep.r2_overall,
        "r2_regular": rep.r2_regular,
        "r2_critical": rep.r2_critical,
        "n_regular": rep.n_regular,
        "n_critical": rep.n_critical,
    }


def _search_summary(outcome: SearchOutcome) -> dict:
    return {
        "selected_default": outcome.selected_default,
        "selected_critical": outcome.selected_critical,
        "critical_evidence": outcome.critical_evidence,
        "dataset_fingerprint": outcome.dataset_fingerprint,
        "ranking": [r.name for r in outcome.ranked],
        "failed": {r.name: r.failed for r in outcome.failed},
    }


def initial_search(cfg: ScenarioConfig, cache: SearchCache | None = None):
    """Trace generation and the warmup search; returns ``(series, outcome)``."""
    cfg.validate()
    series = generate_trace(cfg, cfg.seed_trace, cfg.scenario_id)
    warm_ds = window_dataset(series.slice(0, cfg.warmup_steps), cfg.W, 16)
    train_cfg = replace(cfg.train, seed=cfg.seed_train)
    cache = cache or SearchCache()
    outcome = cache.run(warm_ds, train_cfg, cfg.scale, seed=cfg.seed_search)
    return series, outcome


def run_simulation(cfg: ScenarioConfig, *, forced: str | None = None,
                   cache: SearchCache | None = None) -> SimulationReport:
    cfg.validate()
    if forced is not None and forced not in candidate_names():
        raise ConfigError(f"unknown model {forced!r} for counterfactual replay; "
                          f"choose from {candidate_names()}", keys=["arch"])
    cache = cache or SearchCache()
    series, outcome = initial_search(cfg, cache)
    train_cfg = replace(cfg.train, seed=cfg.seed_train)
    costs = nominal_costs()
    policy = cfg.policy

    registry = ModelRegistry()
    for r in outcome.ranked:
        registry.publish(r.model, costs[r.name])
    if forced is not None and forced not in registry:
        raise ConfigError(f"model {forced!r} failed during the warmup search", keys=["arch"])
    selected_critical = outcome.selected_critical
    r2_crit = {r.name: r.report.r2_critical for r in outcome.ranked if r.report.r2_critical is not None}

    W = cfg.W
    feats = feature_matrix(series, 16)
    start = cfg.warmup_steps
    end = len(series) if cfg.online_steps == 0 else min(len(series), start + cfg.online_steps)
    detector = RegimeDetector(policy)
    if forced is not None:
        registry.activate(forced)
    else:
        select_model(Regime.REGULAR, policy, registry, None,
                     selected_critical=selected_critical, r2_critical=r2_crit, costs=costs)

    predictions, decisions, refreshes = [], [], []
    pending = None  # (effective step, trigger step, future)
    prev_choice = None
    with ThreadPoolExecutor(max_workers=1) as pool:
        for t in range(start, end):
            if pending is not None and pending[0] == t:
                refreshed = pending[2].result()
                for r in refreshed.ranked:
                    registry.publish(r.model, costs[r.name])
                # a refresh whose held-out tail saw no surge cannot rank critical models
                if refreshed.critical_evidence:
                    selected_critical = refreshed.selected_critical
                    r2_crit = {r.name: r.report.r2_critical for r in refreshed.ranked
                               if r.report.r2_critical is not None}
                refreshes.append({"triggered": pending[1], "published": t,
                                  **_search_summary(refreshed)})
                pending = None
            offset = t - start
            if offset > 0 and offset % cfg.rapp_period == 0 and pending is None:
                hist = series.slice(max(0, t - cfg.refresh_history), t)
                ds = window_dataset(hist, W, 16)
                warm = {n: registry.get(n).model for n in registry.names()}
                fut = pool.submit(cache.run, ds, train_cfg, cfg.scale, seed=cfg.seed_search,
                                  warm_start=warm, epochs=cfg.refresh_epochs)
                pending = (t + cfg.search_delay + 1, t, fut)

            entry = registry.get(registry.active)
            rec = registry.predict(feats[t - W:t, :entry.model.spec.d_x], t)
            actual = float(series.load[t])
            truth = Regime.CRITICAL if series.critical[t] else Regime.REGULAR
            predictions.append(PredictionRow(t, rec.predicted_load, actual, rec.model_name,
                                             rec.model_version, rec.latency_proxy, truth))
            regime, reason = detector.update(actual, rec.predicted_load - actual)
            if t == start:
                reason = "init"
            if forced is not None:
                d = OrchestrationDecision(t, regime, forced, False, reason, costs[forced])
            else:
                d = select_model(regime, policy, registry, prev_choice, t=t, reason=reason,
                                 selected_critical=selected_critical, r2_critical=r2_crit,
                                 costs=costs)
            decisions.append(d)
            prev_choice = d.chosen_model
        if pending is not None:
            pending[2].cancel()

    # charged on what actually served each step, i.e. the previous step's decision
    deployed = float(np.mean([p.param_cost for p in predictions]))
    reductions = {b: 100.0 * (1.0 - deployed / costs[b])
                  for b in dict.fromkeys(HEAVY_BASELINES + (cfg.baseline,))}
    evals = [outcome.get(n).report for n in candidate_names()
             if outcome.get(n).report is not None]
    return SimulationReport(
        scenario_id=cfg.scenario_id,
        mode="adaptive" if forced is None else f"static:{forced}",
        evals=evals,
        search=_search_summary(outcome),
        refreshes=refreshes,
        decisions=decisions,
        predictions=predictions,
        reductions=reductions,
        switch_count=sum(d.switched for d in decisions),
        online=online_metrics(predictions),
    )


def replay_counterfactual(cfg: ScenarioConfig, forced: str,
                          cache: SearchCache | None = None) -> SimulationReport:
    """Same loop with the orchestrator bypassed and ``forced`` pinned."""
    return run_simulation(cfg, forced=forced, cache=cache)


def reduction_vs(adaptive: SimulationReport, static: SimulationReport) -> float:
    """Percent drop in mean per-step parameter cost of ``adaptive`` relative to ``static``."""
    return 100.0 * (1.0 - adaptive.mean_param_cost() / static.mean_param_cost())
