"""Student model: a small numpy MLP regressor with architecture selection.

Training is plain mini-batch Adam on the mean squared error of the
z-scored target, with early stopping on validation RMSE. Parameters live
in one flat float64 buffer; per-layer weights and biases are views into it,
which keeps the Adam update to a handful of vectorized operations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, Standardizer, fit_standardizer, standardize
from .errors import DataError, FitError

log = logging.getLogger(__name__)

ACTIVATIONS = ("relu", "tanh")
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class StudentSpec:
    architectures: tuple[tuple[int, ...], ...] = ((64,), (64, 32), (128, 64))
    activation: str = "relu"
    max_epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-3
    patience: int = 20
    validation_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not self.architectures:
            raise ValueError("at least one architecture candidate is required")
        if any(w < 1 for arch in self.architectures for w in arch):
            raise ValueError("hidden layer widths must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in (0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> "StudentSpec":
        d = dict(d)
        if "architectures" in d:
            d["architectures"] = tuple(tuple(int(w) for w in a)
                                       for a in d["architectures"])
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "architectures": [list(a) for a in self.architectures],
            "activation": self.activation, "max_epochs": self.max_epochs,
            "batch_size": self.batch_size, "learning_rate": self.learning_rate,
            "patience": self.patience,
            "validation_fraction": self.validation_fraction, "seed": self.seed,
        }


class MLP:
    """Fully connected network ``n_in -> hidden... -> 1`` over a flat buffer."""

    def __init__(self, n_in: int, hidden: tuple[int, ...], activation: str = "relu",
                 theta: np.ndarray | None = None):
        self.sizes = (n_in, *hidden, 1)
        self.activation = activation
        self._slices = []
        offset = 0
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            w = (offset, offset + fan_in * fan_out, (fan_in, fan_out))
            offset = w[1]
            b = (offset, offset + fan_out, (fan_out,))
            offset = b[1]
            self._slices.append((w, b))
        self.n_params = offset
        self.theta = np.zeros(offset) if theta is None else theta
        if self.theta.shape != (offset,):
            raise ValueError(f"expected {offset} parameters, got {self.theta.shape}")
        self.layers = self._views(self.theta)

    def _views(self, flat):
        return [(flat[w0:w1].reshape(ws), flat[b0:b1])
                for (w0, w1, ws), (b0, b1, _) in self._slices]

    def init(self, rng: np.random.Generator):
        # uniform He-style fan-in scaling, zero biases
        for W, b in self.layers:
            limit = np.sqrt(6.0 / W.shape[0])
            W[...] = rng.uniform(-limit, limit, size=W.shape)
            b[...] = 0.0

    def _act(self, z):
        return np.maximum(z, 0.0) if self.activation == "relu" else np.tanh(z)

    def forward(self, Z: np.ndarray) -> np.ndarray:
        h = Z
        last = len(self.layers) - 1
        for i, (W, b) in enumerate(self.layers):
            h = h @ W + b
            if i < last:
                h = self._act(h)
        return h[:, 0]

    def loss_and_grad(self, Z: np.ndarray, t: np.ndarray, grad: np.ndarray) -> float:
        """Mean squared error on (Z, t); writes d(loss)/d(theta) into ``grad``."""
        acts = [Z]
        h = Z
        last = len(self.layers) - 1
        for i, (W, b) in enumerate(self.layers):
            h = h @ W + b
            if i < last:
                h = self._act(h)
            acts.append(h)
        resid = acts[-1][:, 0] - t
        loss = float(resid @ resid) / t.shape[0]

        delta = (2.0 / t.shape[0]) * resid[:, None]
        gviews = self._views(grad)
        for i in range(last, -1, -1):
            gW, gb = gviews[i]
            np.matmul(acts[i].T, delta, out=gW)
            np.sum(delta, axis=0, out=gb)
            if i > 0:
                delta = delta @ self.layers[i][0].T
                if self.activation == "relu":
                    delta *= acts[i] > 0
                else:
                    delta *= 1.0 - acts[i] ** 2
        return loss


@dataclass(frozen=True)
class TrainedStudent:
    architecture: tuple[int, ...]
    activation: str
    theta: np.ndarray = field(repr=False)
    input_scaler: Standardizer = field(repr=False)
    target_shift: float
    target_scale: float
    history: tuple[tuple[int, float, float], ...] = field(default=(), repr=False)
    best_epoch: int = 0
    best_val_rmse: float = float("nan")
    val_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.intp),
                                    repr=False)
    candidate_scores: tuple[tuple[tuple[int, ...], float], ...] = ()

    @property
    def n_features(self) -> int:
        return self.input_scaler.shift.shape[0]

    def network(self) -> MLP:
        return MLP(self.n_features, self.architecture, self.activation,
                   theta=self.theta.copy())

    @property
    def weights(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return self.network().layers

    def history_csv(self) -> str:
        lines = ["epoch,train_rmse,val_rmse"]
        lines += [f"{e},{tr!r},{va!r}" for e, tr, va in self.history]
        return "\n".join(lines) + "\n"


def rmse(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=np.float64).reshape(-1)
    t = np.asarray(targets, dtype=np.float64).reshape(-1)
    if p.size == 0 or t.size == 0:
        raise ValueError("rmse of empty vectors")
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.size} vs {t.size}")
    d = p - t
    return float(np.sqrt(np.mean(d * d)))


def _validation_split(n: int, fraction: float, rng: np.random.Generator):
    if n < 2:
        idx = np.arange(n)
        return idx, idx
    n_val = min(max(int(np.floor(fraction * n + 0.5)), 1), n - 1)
    perm = rng.permutation(n)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


class _Diverged(Exception):
    pass


def _train_candidate(arch, spec: StudentSpec, Z_fit, t_fit, Z_val, y_val,
                     y_fit, shift, scale, seed_key):
    rng = np.random.default_rng(seed_key)
    net = MLP(Z_fit.shape[1], arch, spec.activation)
    net.init(rng)
    theta = net.theta
    grad = np.zeros_like(theta)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    lr = spec.learning_rate
    n = Z_fit.shape[0]
    bs = spec.batch_size

    history = []
    best_val = np.inf
    best_theta = theta.copy()
    best_epoch = 0
    stale = 0
    step = 0
    for epoch in range(1, spec.max_epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            loss = net.loss_and_grad(Z_fit[idx], t_fit[idx], grad)
            if not np.isfinite(loss):
                raise _Diverged(f"non-finite loss at epoch {epoch}")
            step += 1
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * grad
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * grad * grad
            step_size = lr * np.sqrt(1.0 - ADAM_BETA2 ** step) / (1.0 - ADAM_BETA1 ** step)
            # same as lr * m_hat / (sqrt(v_hat) + eps) with the corrections folded in
            theta -= step_size * m / (np.sqrt(v) + ADAM_EPS * np.sqrt(1.0 - ADAM_BETA2 ** step))

        train_rmse = rmse(net.forward(Z_fit) * scale + shift, y_fit)
        val_rmse = rmse(net.forward(Z_val) * scale + shift, y_val)
        if not (np.isfinite(train_rmse) and np.isfinite(val_rmse)):
            raise _Diverged(f"non-finite RMSE at epoch {epoch}")
        history.append((epoch, train_rmse, val_rmse))
        if val_rmse < best_val:
            best_val = val_rmse
            best_theta = theta.copy()
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= spec.patience:
                break
    if not np.all(np.isfinite(best_theta)):
        raise _Diverged("non-finite weights")
    return best_theta, best_val, best_epoch, tuple(history)


def fit_student(train: Dataset, spec: StudentSpec) -> TrainedStudent:
    """Train every architecture candidate and keep the best on validation RMSE."""
    if train.n_rows < 1:
        raise DataError("cannot fit a student on an empty dataset")
    split_rng = np.random.default_rng([spec.seed, 0])
    fit_idx, val_idx = _validation_split(train.n_rows, spec.validation_fraction, split_rng)
    fit = train.take(fit_idx)
    scaler = fit_standardizer(fit)
    shift = float(fit.target.mean())
    scale = float(fit.target.std(ddof=1)) if fit.n_rows > 1 else 0.0
    if scale == 0.0:
        scale = 1.0
    Z_fit = standardize(scaler, fit.features)
    Z_val = standardize(scaler, train.features[val_idx])
    t_fit = (fit.target - shift) / scale
    y_val = train.target[val_idx]

    best = None
    scores = []
    for c, arch in enumerate(spec.architectures):
        try:
            result = _train_candidate(arch, spec, Z_fit, t_fit, Z_val, y_val,
                                      fit.target, shift, scale, [spec.seed, 1, c])
        except _Diverged as exc:
            log.warning("student candidate %s aborted: %s", arch, exc)
            continue
        scores.append((tuple(arch), result[1]))
        log.debug("student %s best val rmse %.6g at epoch %d",
                  arch, result[1], result[2])
        if best is None or result[1] < best[1][1]:
            best = (arch, result)
    if best is None:
        raise FitError("all student candidates diverged")

    arch, (theta, val_rmse, epoch, history) = best
    theta.flags.writeable = False
    return TrainedStudent(
        architecture=tuple(arch), activation=spec.activation, theta=theta,
        input_scaler=scaler, target_shift=shift, target_scale=scale,
        history=history, best_epoch=epoch, best_val_rmse=val_rmse,
        val_indices=val_idx, candidate_scores=tuple(scores))


def student_predict(model: TrainedStudent, features) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DataError(
            f"student expects {model.n_features} features, got shape {X.shape}")
    net = MLP(model.n_features, model.architecture, model.activation,
              theta=model.theta)
    return net.forward(standardize(model.input_scaler, X)) * model.target_scale \
        + model.target_shift
