"""Multi-layer LSTM regressor in numpy: forward pass, BPTT, training.

Gate blocks inside every fused weight matrix are ordered input, forget,
output, candidate. Each layer holds

    wx : (d_in, 4H)   input-to-gates
    wh : (H, 4H)      hidden-to-gates
    b  : (4H,)

and a linear head maps the last hidden state of the top layer to a scalar.
All arithmetic is float64.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, ShapeError, TrainingAborted
from .traffic import FEATURE_SIZES, WindowedDataset, split_dataset

log = logging.getLogger(__name__)

GATES = ("input", "forget", "output", "candidate")


@dataclass(frozen=True)
class ArchSpec:
    name: str
    hidden_dims: tuple[int, ...]
    d_x: int
    W: int = 24

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if not 1 <= len(self.hidden_dims) <= 3:
            raise ConfigError(f"{self.name}: 1 to 3 layers required, got {len(self.hidden_dims)}",
                              keys=["hidden_dims"])
        if any(h < 1 for h in self.hidden_dims):
            raise ConfigError(f"{self.name}: hidden dims must be >= 1", keys=["hidden_dims"])
        if self.d_x not in FEATURE_SIZES:
            raise ConfigError(f"{self.name}: d_x must be one of {FEATURE_SIZES}", keys=["d_x"])
        if self.W < 1:
            raise ConfigError(f"{self.name}: W must be >= 1", keys=["W"])

    @property
    def layer_input_dims(self) -> tuple[int, ...]:
        return (self.d_x,) + self.hidden_dims[:-1]

    def scaled(self, scale: float) -> ArchSpec:
        """Same architecture with every hidden dim multiplied by ``scale`` (rounded up)."""
        if not 0 < scale <= 1:
            raise ConfigError("scale must be in (0, 1]", keys=["scale"])
        return replace(self, hidden_dims=tuple(max(1, math.ceil(h * scale - 1e-9))
                                               for h in self.hidden_dims))

    def with_window(self, W: int) -> ArchSpec:
        return replace(self, W=W)


def param_count(spec: ArchSpec, include_head: bool = True) -> int:
    """Parameter complexity 4 * (d_x*d_h + d_h^2 + d_h) summed over layers."""
    total = 0
    for d_in, d_h in zip(spec.layer_input_dims, spec.hidden_dims):
        total += 4 * (d_in * d_h + d_h * d_h + d_h)
    if include_head:
        total += spec.hidden_dims[-1] + 1
    return total


@dataclass(eq=False)
class LayerParams:
    wx: np.ndarray
    wh: np.ndarray
    b: np.ndarray

    @property
    def hidden(self):
        return self.wh.shape[0]


@dataclass(eq=False)
class LstmModel:
    spec: ArchSpec
    layers: list[LayerParams]
    head_w: np.ndarray
    head_b: np.ndarray  # shape (1,)
    seed: int = 0
    trained_epochs: int = 0

    def arrays(self) -> list[np.ndarray]:
        """All parameter arrays in canonical order (views, not copies)."""
        out = []
        for layer in self.layers:
            out += [layer.wx, layer.wh, layer.b]
        out += [self.head_w, self.head_b]
        return out

    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())

    def copy(self) -> LstmModel:
        return LstmModel(
            self.spec,
            [LayerParams(l.wx.copy(), l.wh.copy(), l.b.copy()) for l in self.layers],
            self.head_w.copy(),
            self.head_b.copy(),
            self.seed,
            self.trained_epochs,
        )

    def equals(self, other: LstmModel) -> bool:
        if (self.spec, self.seed, self.trained_epochs) != (other.spec, other.seed, other.trained_epochs):
            return False
        mine, theirs = self.arrays(), other.arrays()
        return len(mine) == len(theirs) and all(
            a.shape == b.shape and np.array_equal(a, b) for a, b in zip(mine, theirs)
        )


def init_model(spec: ArchSpec, seed: int) -> LstmModel:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, forget bias 1, other biases 0."""
    rng = np.random.default_rng(seed)
    layers = []
    for d_in, h in zip(spec.layer_input_dims, spec.hidden_dims):
        wx = rng.uniform(-1, 1, (d_in, 4 * h)) / math.sqrt(d_in)
        wh = rng.uniform(-1, 1, (h, 4 * h)) / math.sqrt(h)
        b = np.zeros(4 * h)
        b[h:2 * h] = 1.0
        layers.append(LayerParams(wx, wh, b))
    h_last = spec.hidden_dims[-1]
    head_w = rng.uniform(-1, 1, h_last) / math.sqrt(h_last)
    return LstmModel(spec, layers, head_w, np.zeros(1), seed=seed, trained_epochs=0)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _check_input(model: LstmModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    W, d_x = model.spec.W, model.spec.d_x
    if X.ndim != 3 or X.shape[1:] != (W, d_x):
        got = X.shape[1:] if X.ndim == 3 else X.shape
        raise ShapeError(f"{model.spec.name} expects windows of shape ({W}, {d_x}), got {got}")
    if not np.all(np.isfinite(X)):
        raise ValueError("input window contains non-finite values")
    return X


def _run(model: LstmModel, X: np.ndarray, keep: bool):
    caches = []
    seq = X
    B, W, _ = X.shape
    for layer in model.layers:
        H = layer.hidden
        xw = seq @ layer.wx + layer.b
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        hs = np.empty((B, W, H))
        if keep:
            gates = np.empty((B, W, 4 * H))
            cs = np.empty((B, W, H))
            tcs = np.empty((B, W, H))
        for t in range(W):
            z = xw[:, t] + h @ layer.wh
            s = _sigmoid(z[:, : 3 * H])
            g = np.tanh(z[:, 3 * H:])
            c = s[:, H:2 * H] * c + s[:, :H] * g
            tc = np.tanh(c)
            h = s[:, 2 * H:] * tc
            hs[:, t] = h
            if keep:
                gates[:, t, : 3 * H] = s
                gates[:, t, 3 * H:] = g
                cs[:, t] = c
                tcs[:, t] = tc
        if keep:
            caches.append((seq, gates, cs, tcs, hs))
        seq = hs
    y = seq[:, -1] @ model.head_w + model.head_b[0]
    return y, caches, seq[:, -1]


def predict_batch(model: LstmModel, X, chunk: int = 1024) -> np.ndarray:
    X = _check_input(model, X)
    if len(X) <= chunk:
        return _run(model, X, keep=False)[0]
    return np.concatenate([_run(model, X[i:i + chunk], keep=False)[0] for i in range(0, len(X), chunk)])


def forward(model: LstmModel, window) -> float:
    """Prediction for one ``(W, d_x)`` window, zero initial states."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2:
        raise ShapeError(f"{model.spec.name} expects a 2-D window of shape "
                         f"({model.spec.W}, {model.spec.d_x}), got {window.shape}")
    return float(predict_batch(model, window[None])[0])


def _resolve(model: LstmModel, dataset: WindowedDataset) -> WindowedDataset:
    if dataset.d_x > model.spec.d_x:
        dataset = dataset.with_features(model.spec.d_x)
    return dataset


def loss(model: LstmModel, dataset: WindowedDataset) -> float:
    """Mean squared error over ``dataset``."""
    if len(dataset) == 0:
        raise ValueError("cannot compute loss on an empty dataset")
    dataset = _resolve(model, dataset)
    err = predict_batch(model, dataset.inputs) - dataset.targets
    return float(np.mean(err * err))


def backward_batch(model: LstmModel, X, targets, reduction: str = "mean"):
    """Gradients of the squared error, in :meth:`LstmModel.arrays` order.

    Returns ``(grads, loss)`` where loss is the mean (or sum) of squared errors.
    """
    X = _check_input(model, X)
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    B = len(X)
    y, caches, h_last = _run(model, X, keep=True)
    err = y - targets
    if reduction == "mean":
        total = float(np.mean(err * err))
        dy = 2.0 * err / B
    elif reduction == "sum":
        total = float(np.sum(err * err))
        dy = 2.0 * err
    else:
        raise ValueError(f"unknown reduction {reduction!r}")

    d_head_w = h_last.T @ dy
    d_head_b = np.array([dy.sum()])

    grads_rev = [d_head_b, d_head_w]
    d_seq = None  # gradient w.r.t. layer output sequence
    for li in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[li]
        H = layer.hidden
        x_seq, gates, cs, tcs, hs = caches[li]
        W = x_seq.shape[1]
        dz = np.empty((B, W, 4 * H))
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        wh_t = layer.wh.T
        for t in range(W - 1, -1, -1):
            dh = dh_next
            if d_seq is not None:
                dh = dh + d_seq[:, t]
            elif t == W - 1:
                dh = dh + dy[:, None] * model.head_w[None, :]
            i = gates[:, t, :H]
            f = gates[:, t, H:2 * H]
            o = gates[:, t, 2 * H:3 * H]
            g = gates[:, t, 3 * H:]
            tc = tcs[:, t]
            dc = dh * o * (1.0 - tc * tc) + dc_next
            c_prev = cs[:, t - 1] if t > 0 else 0.0
            dz[:, t, :H] = dc * g * i * (1.0 - i)
            dz[:, t, H:2 * H] = dc * c_prev * f * (1.0 - f)
            dz[:, t, 2 * H:3 * H] = dh * tc * o * (1.0 - o)
            dz[:, t, 3 * H:] = dc * i * (1.0 - g * g)
            dc_next = dc * f
            dh_next = dz[:, t] @ wh_t
        dz2 = dz.reshape(B * W, 4 * H)
        h_prev = np.zeros((B, W, H))
        h_prev[:, 1:] = hs[:, :-1]
        d_wh = h_prev.reshape(B * W, H).T @ dz2
        d_wx = x_seq.reshape(B * W, -1).T @ dz2
        d_b = dz2.sum(axis=0)
        grads_rev += [d_b, d_wh, d_wx]
        if li > 0:
            d_seq = dz @ layer.wx.T
    return grads_rev[::-1], total


def backward(model: LstmModel, window, target: float) -> list[np.ndarray]:
    """Gradient of ``(forward(window) - target)**2`` for every parameter."""
    window = np.asarray(window, dtype=np.float64)
    return backward_batch(model, window[None], [target], reduction="sum")[0]


# --- training ----------------------------------------------------------------

OPTIMIZERS = ("adam", "sgd")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 32
    lr: float = 1e-3
    clip_norm: float = 1.0
    optimizer: str = "adam"
    val_fraction: float = 0.2
    seed: int = 0

    def validate(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1", keys=["epochs"])
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1", keys=["batch_size"])
        if self.lr < 0:
            raise ConfigError("lr must be >= 0", keys=["lr"])
        if self.clip_norm <= 0:
            raise ConfigError("clip_norm must be > 0", keys=["clip_norm"])
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}", keys=["optimizer"])
        if not 0 < self.val_fraction < 1:
            raise ConfigError("val_fraction must be in (0, 1)", keys=["val_fraction"])


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float


class Adam:
    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.b1, self.b2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.k = 0

    def step(self, params, grads, lr):
        self.k += 1
        c1 = 1.0 - self.b1 ** self.k
        c2 = 1.0 - self.b2 ** self.k
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class SGD:
    def __init__(self, params):
        pass

    def step(self, params, grads, lr):
        for p, g in zip(params, grads):
            p -= lr * g


def clip_gradients(grads, max_norm):
    norm = math.sqrt(sum(float(np.vdot(g, g)) for g in grads))
    if norm > max_norm:
        scale = max_norm / norm
        grads = [g * scale for g in grads]
    return grads, norm


def train(model: LstmModel, dataset: WindowedDataset, cfg: TrainConfig = TrainConfig(),
          epochs: int | None = None):
    """Train a copy of ``model``; returns ``(trained_model, history)``.

    The trailing ``cfg.val_fraction`` of ``dataset`` is held out for the
    validation loss and never used for updates. ``epochs`` overrides
    ``cfg.epochs`` (warm-start refreshes use fewer).
    """
    cfg.validate()
    n_epochs = cfg.epochs if epochs is None else epochs
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    dataset = _resolve(model, dataset)
    if dataset.W != model.spec.W:
        raise ShapeError(f"{model.spec.name} expects W={model.spec.W}, dataset has W={dataset.W}")
    train_ds, val_ds = split_dataset(dataset, cfg.val_fraction)

    model = model.copy()
    params = model.arrays()
    opt = Adam(params) if cfg.optimizer == "adam" else SGD(params)
    rng = np.random.default_rng(cfg.seed)
    n = len(train_ds)
    history = []
    # divergence is detected and reported below, so numpy's own warnings are noise
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, n_epochs + 1):
            order = rng.permutation(n)
            running = 0.0
            for bi, start in enumerate(range(0, n, cfg.batch_size)):
                idx = order[start:start + cfg.batch_size]
                grads, batch_loss = backward_batch(model, train_ds.inputs[idx], train_ds.targets[idx])
                if not math.isfinite(batch_loss):
                    raise TrainingAborted(
                        f"{model.spec.name}: non-finite loss at epoch {epoch}, batch {bi}",
                        epoch=epoch, batch=bi,
                    )
                grads, _ = clip_gradients(grads, cfg.clip_norm)
                opt.step(params, grads, cfg.lr)
                running += batch_loss * len(idx)
            val_loss = loss(model, val_ds)
            if not math.isfinite(val_loss):
                raise TrainingAborted(f"{model.spec.name}: non-finite validation loss at epoch {epoch}",
                                      epoch=epoch)
            history.append(EpochRecord(epoch, running / n, val_loss))
            log.debug("%s epoch %d train %.6g val %.6g", model.spec.name, epoch, running / n, val_loss)
    model.trained_epochs += n_epochs
    return model, history


# --- gradient verification ----------------------------------------------------

def grad_check(model: LstmModel, window, target: float, eps: float = 1e-5,
               max_params: int = 5000, sample: int = 1000, seed: int = 0) -> float:
    """Max relative error between :func:`backward` and central differences.

    Models with more than ``max_params`` parameters are checked on a seeded
    subsample of ``sample`` parameters. Entries where both gradients are
    exactly zero are skipped.
    """
    window = np.asarray(window, dtype=np.float64)
    analytic = np.concatenate([g.ravel() for g in backward(model, window, target)])
    probe = model.copy()
    arrays = probe.arrays()
    offsets = np.cumsum([0] + [a.size for a in arrays])
    total = int(offsets[-1])
    if total > max_params:
        rng = np.random.default_rng(seed)
        indices = np.sort(rng.choice(total, size=max(200, min(sample, total)), replace=False))
    else:
        indices = np.arange(total)

    def f():
        d = forward(probe, window) - target
        return d * d

    worst = 0.0
    for k in indices:
        ai = int(np.searchsorted(offsets, k, side="right") - 1)
        flat = arrays[ai].reshape(-1)
        j = k - offsets[ai]
        orig = flat[j]
        flat[j] = orig + eps
        fp = f()
        flat[j] = orig - eps
        fm = f()
        flat[j] = orig
        numeric = (fp - fm) / (2 * eps)
        a = analytic[k]
        if a == 0.0 and numeric == 0.0:
            continue
        worst = max(worst, abs(a - numeric) / max(abs(a), abs(numeric)))
    return worst
