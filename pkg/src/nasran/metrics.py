"""Regression metrics and per-regime evaluation."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .lstm_core import param_count, predict_batch

MAPE_FLOOR = 1e-3


def _pair(pred, actual):
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    actual = np.asarray(actual, dtype=np.float64).reshape(-1)
    if pred.shape != actual.shape:
        raise ValueError(f"length mismatch: {pred.size} predictions vs {actual.size} actuals")
    if pred.size == 0:
        raise ValueError("metrics need at least one element")
    return pred, actual


def mae(pred, actual) -> float:
    pred, actual = _pair(pred, actual)
    return float(np.mean(np.abs(pred - actual)))


def rmse(pred, actual) -> float:
    pred, actual = _pair(pred, actual)
    d = pred - actual
    return float(np.sqrt(np.mean(d * d)))


def mape(pred, actual, floor: float = MAPE_FLOOR) -> float:
    """Mean absolute percentage error in percent; denominators floored at ``floor``."""
    pred, actual = _pair(pred, actual)
    denom = np.maximum(np.abs(actual), floor)
    return float(100.0 * np.mean(np.abs(pred - actual) / denom))


def r2(pred, actual) -> float:
    pred, actual = _pair(pred, actual)
    d = actual - actual.mean()
    ss_tot = float(np.sum(d * d))
    if ss_tot == 0.0:
        raise ValueError("r2 undefined: actual values have zero variance")
    e = actual - pred
    return 1.0 - float(np.sum(e * e)) / ss_tot


def _r2_or_none(pred, actual):
    if len(actual) < 2:
        return None
    try:
        return r2(pred, actual)
    except ValueError:
        return None


@dataclass
class EvalReport:
    arch: str
    param_count: int
    mae: float
    rmse: float
    mape_percent: float
    r2_overall: float | None
    r2_regular: float | None
    r2_critical: float | None
    efficiency: float = 0.0
    n_regular: int = 0
    n_critical: int = 0

    @property
    def n_examples(self):
        return self.n_regular + self.n_critical

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def evaluate_predictions(arch: str, n_params: int, pred, actual, critical) -> EvalReport:
    pred, actual = _pair(pred, actual)
    critical = np.asarray(critical, dtype=bool).reshape(-1)
    reg = ~critical
    return EvalReport(
        arch=arch,
        param_count=n_params,
        mae=mae(pred, actual),
        rmse=rmse(pred, actual),
        mape_percent=mape(pred, actual),
        r2_overall=_r2_or_none(pred, actual),
        r2_regular=_r2_or_none(pred[reg], actual[reg]),
        r2_critical=_r2_or_none(pred[critical], actual[critical]),
        n_regular=int(reg.sum()),
        n_critical=int(critical.sum()),
    )


def evaluate(model, dataset, n_params: int | None = None) -> EvalReport:
    """Score ``model`` on ``dataset`` overall and per regime.

    A regime with fewer than two examples or constant targets gets ``None``
    for its R^2. ``n_params`` defaults to the model's own parameter count.
    """
    if dataset.d_x > model.spec.d_x:
        dataset = dataset.with_features(model.spec.d_x)
    pred = predict_batch(model, dataset.inputs)
    if n_params is None:
        n_params = param_count(model.spec, include_head=True)
    return evaluate_predictions(model.spec.name, n_params, pred, dataset.targets, dataset.critical)
