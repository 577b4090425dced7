"""MLP regressors mapping a reading vector to contact position or force."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import Divergence
from . import mlp

TARGETS = ("position", "force")
SPLIT_NAMES = ("train", "validation", "test")


@dataclass(frozen=True)
class RegressorSpec:
    """Architecture and optimiser settings for one regressor.

    Args:
        train_extent: optional (low, high) bound in mm applied to every
            position axis; rows outside are excluded from training and
            validation.
        eval_every: iterations between validation-loss evaluations.
    """

    hidden_layers: int = 4
    width: int = 64
    target: str = "position"
    learning_rate: float = 5e-4
    adam_epsilon: float = 1e-5
    batch_size: int = 200
    iterations: int = 100_000
    seed: int = 0
    train_extent: tuple | None = None
    eval_every: int = 500
    activation: str = "tanh"

    def __post_init__(self) -> None:
        if self.hidden_layers < 1 or self.width < 1:
            raise ValueError("hidden_layers and width must be >= 1")
        if self.target not in TARGETS:
            raise ValueError(f"target must be one of {TARGETS}")
        if self.activation != "tanh":
            raise ValueError("only the tanh activation is supported")
        if self.learning_rate <= 0 or self.adam_epsilon <= 0:
            raise ValueError("learning_rate and adam_epsilon must be positive")
        if self.batch_size < 1 or self.iterations < 0 or self.eval_every < 1:
            raise ValueError("batch_size, eval_every must be >= 1 and iterations >= 0")
        if self.train_extent is not None:
            lo, hi = (float(v) for v in self.train_extent)
            if not lo < hi:
                raise ValueError("train_extent must be (low, high) with low < high")
            object.__setattr__(self, "train_extent", (lo, hi))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["train_extent"] = None if self.train_extent is None else list(self.train_extent)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RegressorSpec":
        d = dict(d)
        if d.get("train_extent") is not None:
            d["train_extent"] = tuple(d["train_extent"])
        return cls(**d)


def split_index(positions: np.ndarray, depth: np.ndarray) -> np.ndarray:
    """Deterministic 3:1:1 split code per row: 0 train, 1 validation, 2 test.

    The code depends only on the row's position and depth, hashed with
    blake2b, so it survives reordering and CSV round trips.
    """
    pos = np.asarray(positions, dtype=float).reshape(len(depth), -1)
    out = np.empty(len(depth), dtype=np.int8)
    table = np.array([0, 0, 0, 1, 2], dtype=np.int8)
    for i, (p, z) in enumerate(zip(pos, np.asarray(depth, dtype=float))):
        key = ",".join(repr(float(v)) for v in p) + "|" + repr(float(z))
        h = int.from_bytes(hashlib.blake2b(key.encode(), digest_size=8).digest(), "little")
        out[i] = table[h % 5]
    return out


def split_masks(dataset) -> dict:
    code = split_index(dataset.positions, dataset.depth)
    return {name: code == k for k, name in enumerate(SPLIT_NAMES)}


def within_extent(positions: np.ndarray, extent) -> np.ndarray:
    pos = np.asarray(positions, dtype=float)
    pos = pos.reshape(len(pos), -1)
    if extent is None:
        return np.ones(len(pos), dtype=bool)
    lo, hi = extent
    return np.all((pos >= lo) & (pos <= hi), axis=1)


def target_values(dataset, target: str) -> np.ndarray:
    if target == "position":
        return np.asarray(dataset.positions, dtype=float).reshape(len(dataset), -1)
    return np.asarray(dataset.force, dtype=float).reshape(-1, 1)


@dataclass(frozen=True)
class Regressor:
    """A trained network plus the input/target scaling it was trained with."""

    spec: RegressorSpec
    params: tuple
    input_mean: np.ndarray
    input_std: np.ndarray
    target_low: np.ndarray
    target_high: np.ndarray
    s_min: float = 0.0
    history: dict = field(default_factory=dict, compare=False)

    @property
    def n_inputs(self) -> int:
        return self.input_mean.size

    @property
    def n_outputs(self) -> int:
        return self.target_low.size

    @property
    def sizes(self) -> list:
        return [self.n_inputs] + [w.shape[1] for w, _ in self.params]

    def _scale_x(self, x):
        return (x - self.input_mean) / self.input_std

    def _unscale_y(self, z):
        half = (self.target_high - self.target_low) / 2
        return self.target_low + (z + 1.0) * half

    def predict(self, readings):
        """Forward pass for one reading vector or a batch of them.

        Returns:
            (value, low_confidence). The value is squeezed to a scalar per
            row for single-output targets. low_confidence marks inputs where
            no reading exceeds ``s_min``.
        """
        x = np.asarray(readings, dtype=float)
        single = x.ndim == 1
        x2 = np.atleast_2d(x)
        if x2.ndim != 2 or x2.shape[1] != self.n_inputs:
            raise ValueError(f"expected {self.n_inputs} readings per row, got shape {x.shape}")
        out = self._unscale_y(mlp.forward(self.params, self._scale_x(x2)))
        if self.n_outputs == 1:
            out = out[:, 0]
        low = ~np.any(x2 > self.s_min, axis=1)
        if single:
            return out[0], bool(low[0])
        return out, low

    def to_dict(self) -> dict:
        return {
            "format": "tviskin-mlp/1",
            "sizes": self.sizes,
            "activation": self.spec.activation,
            "layers": [{"weights": w.tolist(), "bias": b.tolist()} for w, b in self.params],
            "input_mean": self.input_mean.tolist(),
            "input_std": self.input_std.tolist(),
            "target_low": self.target_low.tolist(),
            "target_high": self.target_high.tolist(),
            "s_min": self.s_min,
            "spec": self.spec.to_dict(),
            "history": self.history,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Regressor":
        params = tuple((np.array(layer["weights"], dtype=float).reshape(a, b),
                        np.array(layer["bias"], dtype=float))
                       for layer, a, b in zip(d["layers"], d["sizes"][:-1], d["sizes"][1:]))
        return cls(RegressorSpec.from_dict(d["spec"]), params,
                   np.array(d["input_mean"]), np.array(d["input_std"]),
                   np.array(d["target_low"]), np.array(d["target_high"]),
                   float(d["s_min"]), d.get("history", {}))

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict()))
        return path

    @classmethod
    def load(cls, path) -> "Regressor":
        return cls.from_dict(json.loads(Path(path).read_text()))


def predict(regressor: Regressor, readings):
    return regressor.predict(readings)


def _batches(n: int, size: int, rng: np.random.Generator):
    size = min(size, n)
    while True:
        order = rng.permutation(n)
        for k in range(0, n - size + 1, size):
            yield order[k:k + size]


def train_regressor(dataset, spec: RegressorSpec, progress=None) -> Regressor:
    """Fit one target from the readings by minibatch Adam on squared error.

    Args:
        dataset: a ScanDataset; only its train and validation rows are used.
        spec: architecture and optimiser settings.
        progress: optional callable ``(iteration, train_loss, val_loss)``
            invoked at every validation step.

    Raises:
        Divergence: when the validation loss becomes non-finite.
        ValueError: when the training split is empty.
    """
    masks = split_masks(dataset)
    keep = within_extent(dataset.positions, spec.train_extent)
    tr = masks["train"] & keep
    va = masks["validation"] & keep
    if not tr.any():
        raise ValueError("empty training split")
    x = np.asarray(dataset.readings, dtype=float)
    y = target_values(dataset, spec.target)

    mean = x[tr].mean(axis=0)
    std = x[tr].std(axis=0)
    std = np.where(std > 0, std, 1.0)
    lo, hi = y[tr].min(axis=0), y[tr].max(axis=0)
    # constant targets keep a unit half-range so scaling stays invertible
    span = np.where(hi > lo, hi - lo, 2.0)
    mid = np.where(hi > lo, (hi + lo) / 2, lo)
    lo, hi = mid - span / 2, mid + span / 2

    xs = (x - mean) / std
    ys = 2 * (y - lo) / (hi - lo) - 1
    x_tr, y_tr = xs[tr], ys[tr]
    x_va, y_va = xs[va], ys[va]

    sizes = [x.shape[1]] + [spec.width] * spec.hidden_layers + [y.shape[1]]
    params = mlp.init_params(sizes, np.random.default_rng([spec.seed, 0]))
    opt = mlp.Adam(lr=spec.learning_rate, eps=spec.adam_epsilon)
    batches = _batches(len(x_tr), spec.batch_size, np.random.default_rng([spec.seed, 1]))

    train_curve = np.empty(spec.iterations)
    val_iters, val_curve = [], []
    for it in range(spec.iterations):
        idx = next(batches)
        loss, grads = mlp.loss_and_grad(params, x_tr[idx], y_tr[idx])
        train_curve[it] = loss
        params = opt.step(params, grads)
        if (it + 1) % spec.eval_every == 0 or it + 1 == spec.iterations:
            val = _mse(params, x_va, y_va) if len(x_va) else float("nan")
            if len(x_va) and not np.isfinite(val) or not np.isfinite(loss):
                raise Divergence(f"loss became non-finite at iteration {it + 1}")
            val_iters.append(it + 1)
            val_curve.append(val)
            if progress is not None:
                progress(it + 1, loss, val)

    half = (hi - lo) / 2
    history = {
        "train_loss": train_curve.tolist(),
        "val_iteration": val_iters,
        "val_loss": val_curve,
        "n_train": int(tr.sum()),
        "n_validation": int(va.sum()),
        # losses live in the scaled target space; these are in target units
        "train_rmse": _rmse_units(params, x_tr, y_tr, half),
        "val_rmse": _rmse_units(params, x_va, y_va, half) if len(x_va) else None,
    }
    return Regressor(spec, tuple(params), mean, std, lo, hi,
                     float(dataset.metadata.get("model", {}).get("s_min", 0.0)), history)


def _mse(params, x, y) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        return float(np.mean((mlp.forward(params, x) - y) ** 2))


def _rmse_units(params, x, y, half) -> float:
    err = (mlp.forward(params, x) - y) * half
    return float(np.sqrt(np.mean(np.sum(err ** 2, axis=1))))
