"""Slow-timescale architecture search over the fixed six-candidate LSTM grid.

Each candidate is trained on the leading part of a windowed dataset, scored
on the held-out tail, and ranked by efficiency = P / C_norm, where P is the
overall R^2 clamped to [0, 1] and C_norm is the candidate's parameter count
over the largest count in the space.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import Executor
from dataclasses import dataclass, field

from .errors import ConfigError, NasranError
from .lstm_core import ArchSpec, LstmModel, TrainConfig, init_model, param_count, train
from .metrics import EvalReport, evaluate
from .traffic import WindowedDataset, split_dataset

log = logging.getLogger(__name__)

DEFAULT_ACCURACY_GATE = 0.95

# name, hidden dims, input features
_SPACE = (
    ("Lightweight-32", (32,), 6),
    ("Lightweight-64", (64,), 6),
    ("Balanced-Small", (64, 32), 8),
    ("Balanced-Medium", (100, 50), 8),
    ("Deep-Performance", (128, 100, 64), 10),
    ("Ultra-Performance", (512, 256, 128), 16),
)

# Parameter counts as printed in the published comparison table.
TABLE_PARAMS = {
    "Lightweight-32": 25_000,
    "Lightweight-64": 38_000,
    "Balanced-Small": 44_000,
    "Balanced-Medium": 74_000,
    "Deep-Performance": 205_000,
    "Ultra-Performance": 1_080_000,
}
TABLE_SHORT_NAMES = {
    "Lightweight-32": "Light-32",
    "Lightweight-64": "Light-64",
    "Balanced-Small": "Bal-Small",
    "Balanced-Medium": "Bal-Med",
    "Deep-Performance": "Deep-Perf",
    "Ultra-Performance": "Ultra-Perf",
}


def candidate_space(W: int = 24) -> list[ArchSpec]:
    return [ArchSpec(name, dims, d_x, W) for name, dims, d_x in _SPACE]


def candidate_names() -> list[str]:
    return [name for name, _, _ in _SPACE]


def nominal_spec(name: str, W: int = 24) -> ArchSpec:
    for spec in candidate_space(W):
        if spec.name == name:
            return spec
    raise ConfigError(f"unknown architecture {name!r}; choose from {candidate_names()}",
                      keys=["arch"])


def nominal_costs() -> dict[str, int]:
    """Parameter count (with head) of every unscaled candidate."""
    return {s.name: param_count(s, include_head=True) for s in candidate_space()}


def table_mismatch(name: str, rel_tol: float = 0.01) -> bool:
    """True when the computed count disagrees with the published table entry."""
    eq1 = nominal_costs()[name]
    table = TABLE_PARAMS[name]
    return abs(eq1 - table) > rel_tol * table


def efficiency_score(P: float, c_lstm: int, c_max: int) -> float:
    if c_lstm <= 0:
        raise ValueError("c_lstm must be positive")
    if c_max < c_lstm:
        raise ValueError(f"c_max ({c_max}) smaller than c_lstm ({c_lstm})")
    if not math.isfinite(P):
        raise ValueError("performance must be finite")
    return P * c_max / c_lstm


@dataclass
class CandidateResult:
    spec: ArchSpec
    report: EvalReport | None
    c_lstm: int
    c_norm: float
    efficiency: float
    wall_time_s: float = 0.0
    failed: str | None = None
    model: LstmModel | None = field(default=None, repr=False)

    @property
    def name(self):
        return self.spec.name

    def to_dict(self):
        # wall time is deliberately left out so outputs stay byte-reproducible
        return {
            "arch": self.spec.name,
            "hidden_dims": list(self.spec.hidden_dims),
            "d_x": self.spec.d_x,
            "W": self.spec.W,
            "c_lstm": self.c_lstm,
            "c_norm": self.c_norm,
            "efficiency": self.efficiency,
            "failed": self.failed,
            "report": None if self.report is None else self.report.to_dict(),
        }


@dataclass
class SearchOutcome:
    ranked: list[CandidateResult]
    selected_default: str
    selected_critical: str
    search_seed: int
    dataset_fingerprint: str
    failed: list[CandidateResult] = field(default_factory=list)
    # False when the held-out split had no scorable Critical examples
    critical_evidence: bool = True

    def get(self, name) -> CandidateResult:
        for r in self.ranked + self.failed:
            if r.name == name:
                return r
        raise KeyError(name)

    def models(self) -> dict[str, LstmModel]:
        return {r.name: r.model for r in self.ranked}

    def to_dict(self):
        return {
            "selected_default": self.selected_default,
            "selected_critical": self.selected_critical,
            "search_seed": self.search_seed,
            "dataset_fingerprint": self.dataset_fingerprint,
            "critical_evidence": self.critical_evidence,
            "ranked": [r.to_dict() for r in self.ranked],
            "failed": [r.to_dict() for r in self.failed],
        }


def rank_key(r: CandidateResult):
    return (-r.efficiency, r.c_lstm, r.spec.name)


def _r2c(r: CandidateResult):
    v = r.report.r2_critical
    return -math.inf if v is None else v


def _train_one(spec, dataset, cfg, seed, warm, epochs):
    start = time.perf_counter()
    model = warm.copy() if warm is not None else init_model(spec, seed)
    model, _ = train(model, dataset, cfg, epochs=epochs)
    return model, time.perf_counter() - start


def run_search(
    dataset: WindowedDataset,
    cfg: TrainConfig,
    scale: float = 1.0,
    *,
    seed: int = 0,
    accuracy_gate: float = DEFAULT_ACCURACY_GATE,
    warm_start: dict[str, LstmModel] | None = None,
    epochs: int | None = None,
    executor: Executor | None = None,
    space: list[ArchSpec] | None = None,
) -> SearchOutcome:
    """Train, evaluate and rank every candidate.

    ``dataset`` must carry at least as many features as the widest candidate;
    each candidate sees its own feature prefix. Complexity is always charged
    at the unscaled spec, while training happens at ``scale``. With
    ``warm_start`` the given models are fine-tuned for ``epochs`` instead of
    trained from scratch. ``executor`` runs candidate jobs in parallel;
    results are joined before ranking.
    """
    space = space or candidate_space(dataset.W)
    if dataset.d_x < max(s.d_x for s in space):
        raise ConfigError(f"dataset has {dataset.d_x} features; the search space needs "
                          f"{max(s.d_x for s in space)}", keys=["d_x"])
    _, held_out = split_dataset(dataset, cfg.val_fraction)
    costs = {s.name: param_count(s, include_head=True) for s in space}
    c_max = max(costs.values())

    jobs = []
    for k, spec in enumerate(space):
        train_spec = spec.scaled(scale) if scale != 1 else spec
        warm = None if warm_start is None else warm_start.get(spec.name)
        args = (train_spec, dataset, cfg, seed * 1000 + k, warm, epochs)
        jobs.append((spec, executor.submit(_train_one, *args) if executor else args))

    results, failed = [], []
    for spec, job in jobs:
        c = costs[spec.name]
        try:
            model, wall = job.result() if executor else _train_one(*job)
        except NasranError as exc:
            log.warning("candidate %s failed: %s", spec.name, exc)
            failed.append(CandidateResult(spec, None, c, c / c_max, 0.0, failed=str(exc)))
            continue
        report = evaluate(model, held_out, n_params=c)
        P = min(1.0, max(0.0, report.r2_overall if report.r2_overall is not None else 0.0))
        eff = efficiency_score(P, c, c_max)
        report.efficiency = eff
        log.info("candidate %s: r2=%.4f eff=%.4f (%.1fs)", spec.name, P, eff, wall)
        results.append(CandidateResult(spec, report, c, c / c_max, eff, wall, model=model))

    if not results:
        raise NasranError("architecture search failed: every candidate aborted")
    results.sort(key=rank_key)

    gated = [r for r in results if r.report.r2_overall is not None and r.report.r2_overall >= accuracy_gate]
    if gated:
        default = gated[0]
    else:
        default = max(results, key=lambda r: (r.report.r2_overall or -math.inf, -r.c_lstm))
    evidence = any(r.report.r2_critical is not None for r in results)
    if evidence:
        critical = max(results, key=lambda r: (_r2c(r), -r.c_lstm))
    else:
        log.warning("held-out split has no scorable Critical examples; "
                    "selected_critical falls back to best overall R^2")
        critical = max(results, key=lambda r: (r.report.r2_overall or -math.inf, -r.c_lstm))
    return SearchOutcome(
        ranked=results,
        selected_default=default.name,
        selected_critical=critical.name,
        search_seed=seed,
        dataset_fingerprint=dataset.fingerprint(),
        failed=failed,
        critical_evidence=evidence,
    )
