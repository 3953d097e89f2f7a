"""Synthetic RAN traffic traces, feature extraction and supervised windowing.

One step is one simulated minute. The load is built from a diurnal sine
profile, a slow weekly modulation, a peak-hour boost and bursty surges inside
configured critical windows, plus Gaussian noise, and is clipped to [0, 1].
Twelve KPI channels follow the noiseless load (some of them a few steps
ahead, like attach/RRC counters that precede user-plane traffic) with their
own independent noise.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ConfigError

STEPS_PER_HOUR = 60
STEPS_PER_DAY = 24 * STEPS_PER_HOUR
STEPS_PER_WEEK = 7 * STEPS_PER_DAY
N_KPIS = 12
FEATURE_SIZES = (6, 8, 10, 16)

# (lead steps, gain, offset, noise multiplier); negative gain = anti-correlated
KPI_PROFILE = (
    (1, 0.80, 0.10, 1.5),
    (0, 0.60, 0.20, 1.0),
    (1, 0.90, 0.05, 0.4),
    (2, 0.70, 0.10, 0.4),
    (0, 0.50, 0.20, 2.0),
    (0, -0.50, 0.80, 2.0),
    (0, 0.40, 0.30, 2.0),
    (0, -0.40, 0.70, 2.0),
    (0, 0.30, 0.35, 2.0),
    (0, 0.45, 0.25, 2.0),
    (0, -0.30, 0.60, 2.0),
    (0, 0.35, 0.30, 2.0),
)


class Regime(str, Enum):
    REGULAR = "Regular"
    CRITICAL = "Critical"


@dataclass(frozen=True)
class TraceConfig:
    duration_steps: int = 3 * STEPS_PER_DAY
    base: float = 0.30
    diurnal_amp: float = 0.15
    weekly_amp: float = 0.03
    peak_boost: float = 0.05
    peak_hours: tuple[int, ...] = (9, 10, 11, 17, 18, 19)
    noise: float = 0.01
    surge_amp: float = 0.40
    surge_burst: float = 0.08
    surge_ramp: int = 5
    critical_windows: tuple[tuple[int, int], ...] = ((660, 120), (1560, 120), (3660, 120))
    kpi_noise: float = 0.02

    def validate(self):
        if self.duration_steps <= 0:
            raise ConfigError("duration_steps must be positive", keys=["duration_steps"])
        if self.duration_steps < STEPS_PER_DAY:
            raise ConfigError(
                f"duration_steps must cover at least one day ({STEPS_PER_DAY} steps)",
                keys=["duration_steps"],
            )
        for name in ("base", "diurnal_amp", "weekly_amp", "peak_boost", "noise",
                     "surge_amp", "surge_burst", "kpi_noise"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0", keys=[name])
        if self.surge_ramp < 1:
            raise ConfigError("surge_ramp must be >= 1", keys=["surge_ramp"])
        for h in self.peak_hours:
            if not 0 <= h <= 23:
                raise ConfigError(f"peak hour {h} outside 0..23", keys=["peak_hours"])
        for start, length in self.critical_windows:
            if start < 0 or length < 1:
                raise ConfigError(
                    f"critical window ({start}, {length}) needs start >= 0 and length >= 1",
                    keys=["critical_windows"],
                )


@dataclass(frozen=True)
class TraceSample:
    t: int
    load: float
    kpis: tuple[float, ...]
    hour_of_day: int
    day_of_week: int
    is_weekend: bool
    is_peak: bool
    is_critical_event: bool


@dataclass(frozen=True, eq=False)
class TraceSeries:
    """Column-oriented trace. Indexing yields :class:`TraceSample` rows."""

    t: np.ndarray
    load: np.ndarray
    kpis: np.ndarray  # (n, N_KPIS)
    hour: np.ndarray
    dow: np.ndarray
    weekend: np.ndarray
    peak: np.ndarray
    critical: np.ndarray
    seed: int = 0
    scenario_id: str = "synthetic"

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i) -> TraceSample:
        if isinstance(i, slice):
            return self.slice(i.start or 0, len(self) if i.stop is None else i.stop)
        return TraceSample(
            t=int(self.t[i]),
            load=float(self.load[i]),
            kpis=tuple(float(v) for v in self.kpis[i]),
            hour_of_day=int(self.hour[i]),
            day_of_week=int(self.dow[i]),
            is_weekend=bool(self.weekend[i]),
            is_peak=bool(self.peak[i]),
            is_critical_event=bool(self.critical[i]),
        )

    @property
    def samples(self) -> list[TraceSample]:
        return [self[i] for i in range(len(self))]

    def slice(self, start, stop) -> TraceSeries:
        s = slice(start, stop)
        return TraceSeries(
            self.t[s], self.load[s], self.kpis[s], self.hour[s], self.dow[s],
            self.weekend[s], self.peak[s], self.critical[s], self.seed, self.scenario_id,
        )

    def equals(self, other: TraceSeries) -> bool:
        cols = ("t", "load", "kpis", "hour", "dow", "weekend", "peak", "critical")
        return all(np.array_equal(getattr(self, c), getattr(other, c)) for c in cols)


def calendar(t):
    """Hour-of-day, day-of-week, weekend flag for step indices ``t``."""
    t = np.asarray(t, dtype=np.int64)
    hour = (t // STEPS_PER_HOUR) % 24
    dow = (t // STEPS_PER_DAY) % 7
    return hour, dow, dow >= 5


def _critical_mask(n, windows):
    mask = np.zeros(n, dtype=bool)
    for start, length in windows:
        mask[start:start + length] = True
    return mask


def _surge_envelope(n, windows, ramp):
    env = np.zeros(n)
    for start, length in windows:
        tau = np.arange(length, dtype=float)
        shape = np.minimum(1.0, np.minimum((tau + 1) / ramp, (length - tau) / ramp))
        stop = min(start + length, n)
        if stop > start:
            env[start:stop] = np.maximum(env[start:stop], shape[: stop - start])
    return env


def generate_trace(cfg, seed: int, scenario_id: str = "synthetic") -> TraceSeries:
    """Generate a deterministic trace for ``(cfg, seed)``.

    ``cfg`` is a :class:`TraceConfig` or anything carrying one as ``.trace``.
    """
    cfg = getattr(cfg, "trace", cfg)
    cfg.validate()
    n = cfg.duration_steps
    rng = np.random.default_rng(seed)
    t = np.arange(n, dtype=np.int64)
    hour, dow, weekend = calendar(t)
    peak = np.isin(hour, np.asarray(cfg.peak_hours, dtype=np.int64))
    critical = _critical_mask(n, cfg.critical_windows)

    minute = (t % STEPS_PER_DAY).astype(float)
    diurnal = np.sin(2 * np.pi * (minute - 8 * STEPS_PER_HOUR) / STEPS_PER_DAY)
    weekly = np.cos(2 * np.pi * t / STEPS_PER_WEEK)

    # AR(1) burst process modulating surge height; drawn for every step so
    # the random stream does not depend on window placement.
    innov = rng.standard_normal(n)
    burst = np.empty(n)
    acc = 0.0
    for k in range(n):
        acc = 0.9 * acc + cfg.surge_burst * innov[k]
        burst[k] = acc
    envelope = _surge_envelope(n, cfg.critical_windows, cfg.surge_ramp)
    surge = cfg.surge_amp * envelope * np.maximum(0.0, 1.0 + burst)

    clean = (cfg.base + cfg.diurnal_amp * diurnal + cfg.weekly_amp * weekly
             + cfg.peak_boost * peak + surge)
    load = np.clip(clean + cfg.noise * rng.standard_normal(n), 0.0, 1.0)

    latent = np.clip(clean, 0.0, 1.0)
    kpi_noise = rng.standard_normal((n, N_KPIS))
    kpis = np.empty((n, N_KPIS))
    for ch, (lead, gain, offset, nmul) in enumerate(KPI_PROFILE):
        idx = np.minimum(t + lead, n - 1)
        kpis[:, ch] = offset + gain * latent[idx] + cfg.kpi_noise * nmul * kpi_noise[:, ch]
    kpis = np.clip(kpis, 0.0, 1.0)

    return TraceSeries(t, load, kpis, hour, dow, weekend, peak, critical, seed, scenario_id)


def feature_matrix(series: TraceSeries, d_x: int) -> np.ndarray:
    """Features for every sample, shape ``(len(series), d_x)``."""
    if d_x not in FEATURE_SIZES:
        raise ConfigError(f"unsupported feature count {d_x}; supported sizes are {FEATURE_SIZES}",
                          keys=["d_x"])
    n = len(series)
    hour = series.hour.astype(float)
    out = np.empty((n, d_x))
    out[:, 0] = series.load
    out[:, 1] = np.sin(2 * np.pi * hour / 24)
    out[:, 2] = np.cos(2 * np.pi * hour / 24)
    out[:, 3] = series.dow / 6.0
    out[:, 4] = series.weekend
    out[:, 5] = series.peak
    out[:, 6:] = series.kpis[:, : d_x - 6]
    return out


def extract_features(series: TraceSeries, i: int, d_x: int) -> np.ndarray:
    """Feature vector of sample ``i``.

    Layout: ``[load, hour_sin, hour_cos, dow/6, weekend, peak]`` followed by
    the first ``d_x - 6`` KPI channels.
    """
    n = len(series)
    if not -n <= i < n:
        raise IndexError(f"sample index {i} out of range for series of length {n}")
    i %= n
    return feature_matrix(series.slice(i, i + 1), d_x)[0]


@dataclass(frozen=True, eq=False)
class WindowedDataset:
    inputs: np.ndarray  # (n, W, d_x)
    targets: np.ndarray  # (n,)
    critical: np.ndarray  # (n,) bool, regime of the target step
    W: int
    target_steps: np.ndarray = field(default=None)

    def __len__(self):
        return len(self.targets)

    @property
    def d_x(self):
        return self.inputs.shape[2]

    @property
    def regime_labels(self):
        return [Regime.CRITICAL if c else Regime.REGULAR for c in self.critical]

    def subset(self, idx) -> WindowedDataset:
        steps = None if self.target_steps is None else self.target_steps[idx]
        return WindowedDataset(self.inputs[idx], self.targets[idx], self.critical[idx], self.W, steps)

    def with_features(self, d_x: int) -> WindowedDataset:
        """View keeping the first ``d_x`` features (layouts are prefixes of each other)."""
        if d_x > self.d_x:
            raise ConfigError(f"dataset has {self.d_x} features, {d_x} requested", keys=["d_x"])
        return WindowedDataset(self.inputs[:, :, :d_x], self.targets, self.critical, self.W,
                               self.target_steps)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for arr in (self.inputs, self.targets, self.critical):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()[:16]


def window_dataset(series: TraceSeries, W: int, d_x: int) -> WindowedDataset:
    if W < 1:
        raise ConfigError("window length W must be >= 1", keys=["W"])
    n = len(series)
    if n <= W:
        raise ConfigError(f"series too short: need at least W + 1 = {W + 1} samples, got {n}",
                          keys=["W"])
    feats = feature_matrix(series, d_x)
    count = n - W
    windows = np.lib.stride_tricks.sliding_window_view(feats, W, axis=0)[:count]
    inputs = np.ascontiguousarray(windows.transpose(0, 2, 1))
    return WindowedDataset(
        inputs=inputs,
        targets=series.load[W:].copy(),
        critical=series.critical[W:].copy(),
        W=W,
        target_steps=series.t[W:].copy(),
    )


def split_dataset(ds: WindowedDataset, val_fraction: float):
    """Chronological split: the trailing ``val_fraction`` is held out."""
    if not 0 < val_fraction < 1:
        raise ConfigError("val_fraction must be in (0, 1)", keys=["val_fraction"])
    n_val = max(1, int(round(len(ds) * val_fraction)))
    if n_val >= len(ds):
        raise ConfigError(f"dataset of {len(ds)} examples too small to split", keys=["val_fraction"])
    cut = len(ds) - n_val
    return ds.subset(slice(0, cut)), ds.subset(slice(cut, None))


CSV_HEADER = ["t", "load", "hour", "dow", "weekend", "peak", "critical"] + [
    f"kpi{k}" for k in range(N_KPIS)
]


def write_trace_csv(series: TraceSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for i in range(len(series)):
            w.writerow(
                [int(series.t[i]), f"{series.load[i]:.9f}", int(series.hour[i]), int(series.dow[i]),
                 int(series.weekend[i]), int(series.peak[i]), int(series.critical[i])]
                + [f"{v:.9f}" for v in series.kpis[i]]
            )


def read_trace_csv(path, seed: int = 0, scenario_id: str | None = None) -> TraceSeries:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ConfigError(f"{path}: unexpected trace header {header}")
        rows = list(reader)
    if not rows:
        raise ConfigError(f"{path}: trace has no samples")
    data = np.array(rows, dtype=float)
    t = data[:, 0].astype(np.int64)
    if np.any(np.diff(t) != 1):
        raise ConfigError(f"{path}: step column must increase by 1 with no gaps")
    return TraceSeries(
        t=t,
        load=data[:, 1],
        kpis=data[:, 7:],
        hour=data[:, 2].astype(np.int64),
        dow=data[:, 3].astype(np.int64),
        weekend=data[:, 4].astype(bool),
        peak=data[:, 5].astype(bool),
        critical=data[:, 6].astype(bool),
        seed=seed,
        scenario_id=scenario_id or path.stem,
    )
