"""Near-real-time inference agent with a versioned, hot-swappable model registry.

The registry state (entries + active name) lives in one immutable snapshot
tuple that writers replace under a lock. Readers grab the snapshot with a
single attribute load, so a prediction always sees one consistent
(model, version) pair and never waits on a writer.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from types import MappingProxyType

import numpy as np

from .errors import RegistryError, ShapeError
from .lstm_core import LstmModel, param_count, predict_batch


@dataclass(frozen=True)
class RegistryEntry:
    model: LstmModel
    version: int
    param_cost: int


@dataclass(frozen=True)
class PredictionRecord:
    t: int
    predicted_load: float
    model_name: str
    model_version: int
    latency_proxy: int
    wall_time_s: float = 0.0


class ModelRegistry:
    def __init__(self):
        self._lock = threading.Lock()
        self._state = (MappingProxyType({}), None)

    @property
    def active(self) -> str | None:
        return self._state[1]

    @property
    def entries(self):
        return self._state[0]

    def __contains__(self, name):
        return name in self._state[0]

    def __len__(self):
        return len(self._state[0])

    def names(self):
        return list(self._state[0])

    def get(self, name) -> RegistryEntry:
        try:
            return self._state[0][name]
        except KeyError:
            raise RegistryError(f"no model named {name!r} in registry") from None

    def publish(self, model: LstmModel, param_cost: int | None = None) -> int:
        """Insert or replace ``model`` under its spec name; returns the new version.

        ``param_cost`` is what each prediction is charged; defaults to the
        model's own parameter count including the head.
        """
        if param_cost is None:
            param_cost = param_count(model.spec, include_head=True)
        with self._lock:
            entries, active = self._state
            prev = entries.get(model.spec.name)
            version = 1 if prev is None else prev.version + 1
            new = dict(entries)
            new[model.spec.name] = RegistryEntry(model, version, int(param_cost))
            self._state = (MappingProxyType(new), active)
        return version

    def activate(self, name: str) -> str | None:
        """Make ``name`` the active model; returns the previously active name."""
        with self._lock:
            entries, active = self._state
            if name not in entries:
                raise RegistryError(f"cannot activate unknown model {name!r}; "
                                    f"registered: {sorted(entries)}")
            if name != active:
                self._state = (entries, name)
            return active

    def predict(self, window, t: int = 0) -> PredictionRecord:
        entries, active = self._state
        if active is None:
            raise RegistryError("no active model")
        entry = entries[active]
        spec = entry.model.spec
        window = np.asarray(window, dtype=np.float64)
        if window.shape != (spec.W, spec.d_x):
            raise ShapeError(f"active model {active} expects window shape ({spec.W}, {spec.d_x}), "
                             f"got {window.shape}")
        start = time.perf_counter()
        y = float(predict_batch(entry.model, window[None])[0])
        return PredictionRecord(t, y, active, entry.version, entry.param_cost,
                                time.perf_counter() - start)


def publish(registry: ModelRegistry, model: LstmModel, param_cost: int | None = None) -> int:
    return registry.publish(model, param_cost)


def activate(registry: ModelRegistry, name: str) -> str | None:
    return registry.activate(name)


def predict(registry: ModelRegistry, window, t: int = 0) -> PredictionRecord:
    return registry.predict(window, t)
