"""From-scratch deep feedforward regressor.

Architecture: fully connected ReLU layers with inverted dropout after each
hidden activation, a linear scalar output, MAE loss, and Adam updates.  The
documented full-scale configuration is five hidden layers of 1024 units with
dropout 0.5; tests run much smaller nets through the identical code path.

Everything is float64 and deterministic under the config seed: weight init,
batch shuffling, and dropout masks all derive from it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from time import perf_counter

import numpy as np

from .errors import DivergenceError


@dataclass
class MlpConfig:
    hidden_layers: list[int] = field(default_factory=lambda: [1024] * 5)
    dropout_p: float = 0.5
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    epochs: int = 8
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if any(w < 1 for w in self.hidden_layers):
            raise ValueError("hidden layer widths must be >= 1")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must be in [0, 1)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class TrainReport:
    epoch_losses: list[float]
    steps: int
    wall_time: float

    @property
    def final_loss(self) -> float:
        return self.epoch_losses[-1]


class MlpModel:
    """Weights, biases, and Adam moment state for one regressor."""

    def __init__(self, config: MlpConfig, input_width: int):
        if input_width < 1:
            raise ValueError("input_width must be >= 1")
        self.config = config
        self.input_width = input_width
        rng = np.random.default_rng(config.seed)
        widths = [input_width] + list(config.hidden_layers) + [1]
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(widths, widths[1:]):
            # He-style fan-in scaled uniform; symmetric around zero.
            limit = np.sqrt(6.0 / fan_in)
            self.weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))
        self._m = [np.zeros_like(w) for w in self.weights + self.biases]
        self._v = [np.zeros_like(w) for w in self.weights + self.biases]
        self._t = 0

    @property
    def n_hidden(self) -> int:
        return len(self.weights) - 1

    def _forward_full(self, X: np.ndarray, train: bool, rng=None):
        """Forward pass keeping intermediates for backprop.

        Returns (prediction, pre-activations, activations, dropout masks).
        Inverted dropout: masks are pre-scaled by 1/(1-p) so inference needs
        no rescaling.
        """
        p = self.config.dropout_p
        acts = [X]
        pres = []
        masks = []
        h = X
        for li in range(self.n_hidden):
            z = h @ self.weights[li] + self.biases[li]
            pres.append(z)
            h = np.maximum(z, 0.0)
            if train and p > 0.0:
                mask = (rng.random(h.shape) >= p) / (1.0 - p)
            else:
                mask = np.ones_like(h)
            masks.append(mask)
            h = h * mask
            acts.append(h)
        out = h @ self.weights[-1] + self.biases[-1]
        return out[:, 0], pres, acts, masks

    def forward(self, x: np.ndarray, mode: str = "infer", rng=None) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] != self.input_width:
            raise ValueError(f"expected feature vector of width {self.input_width}")
        train = mode == "train"
        if train and rng is None:
            rng = np.random.default_rng(self.config.seed)
        out, _, _, _ = self._forward_full(x[None, :], train, rng)
        return float(out[0])

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_width:
            raise ValueError(f"expected matrix with {self.input_width} columns")
        out, _, _, _ = self._forward_full(X, train=False)
        return out

    def _backward(self, X, y, pres, acts, masks, out):
        """Gradients of mean absolute error wrt every weight and bias.

        MAE subgradient at zero residual is taken as 0.
        """
        n = X.shape[0]
        d_out = np.sign(out - y)[:, None] / n
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        grads_w[-1] = acts[-1].T @ d_out
        grads_b[-1] = d_out.sum(axis=0)
        d_h = d_out @ self.weights[-1].T
        for li in range(self.n_hidden - 1, -1, -1):
            d_z = d_h * masks[li] * (pres[li] > 0.0)
            grads_w[li] = acts[li].T @ d_z
            grads_b[li] = d_z.sum(axis=0)
            if li > 0:
                d_h = d_z @ self.weights[li].T
        return grads_w, grads_b

    def _adam_step(self, grads_w, grads_b):
        cfg = self.config
        self._t += 1
        params = self.weights + self.biases
        grads = grads_w + grads_b
        bc1 = 1.0 - cfg.beta1 ** self._t
        bc2 = 1.0 - cfg.beta2 ** self._t
        for i, (p, g) in enumerate(zip(params, grads)):
            self._m[i] = cfg.beta1 * self._m[i] + (1 - cfg.beta1) * g
            self._v[i] = cfg.beta2 * self._v[i] + (1 - cfg.beta2) * g * g
            m_hat = self._m[i] / bc1
            v_hat = self._v[i] / bc2
            p -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps_adam)

    def to_json(self) -> str:
        payload = {
            "format": "enerdetect-mlp-v1",
            "config": asdict(self.config),
            "input_width": self.input_width,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "MlpModel":
        payload = json.loads(text)
        if payload.get("format") != "enerdetect-mlp-v1":
            raise ValueError("unrecognized model file format")
        model = cls(MlpConfig(**payload["config"]), payload["input_width"])
        model.weights = [np.array(w, dtype=np.float64) for w in payload["weights"]]
        model.biases = [np.array(b, dtype=np.float64) for b in payload["biases"]]
        return model


def init(config: MlpConfig, input_width: int) -> MlpModel:
    return MlpModel(config, input_width)


def train(model: MlpModel, X: np.ndarray, y: np.ndarray, config: MlpConfig | None = None) -> TrainReport:
    """Run epochs of minibatch Adam on MAE loss; deterministic under seed."""
    cfg = config or model.config
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if y.shape[0] != n:
        raise ValueError("X and y length mismatch")
    if n < cfg.batch_size:
        raise ValueError(f"need at least batch_size={cfg.batch_size} rows, got {n}")
    rng = np.random.default_rng(cfg.seed + 1)  # distinct stream from init
    start = perf_counter()
    epoch_losses = []
    steps = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_abs_err = 0.0
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            Xb, yb = X[idx], y[idx]
            out, pres, acts, masks = model._forward_full(Xb, train=True, rng=rng)
            loss = np.abs(out - yb).mean()
            if not np.isfinite(loss):
                raise DivergenceError(epoch)
            epoch_abs_err += np.abs(out - yb).sum()
            grads_w, grads_b = model._backward(Xb, yb, pres, acts, masks, out)
            model._adam_step(grads_w, grads_b)
            steps += 1
        epoch_losses.append(epoch_abs_err / n)
    return TrainReport(epoch_losses=epoch_losses, steps=steps, wall_time=perf_counter() - start)


def fit(config: MlpConfig, X: np.ndarray, y: np.ndarray) -> tuple[MlpModel, TrainReport]:
    model = init(config, np.asarray(X).shape[1])
    report = train(model, X, y, config)
    return model, report


def predict_batch(model: MlpModel, X: np.ndarray) -> np.ndarray:
    return model.predict_batch(X)


def _loss(model: MlpModel, x: np.ndarray, target: float) -> float:
    out, _, _, _ = model._forward_full(x[None, :], train=False)
    return float(abs(out[0] - target))


def gradient_check(
    config: MlpConfig,
    sample: tuple[np.ndarray, float],
    step: float = 1e-5,
    kink_margin: float = 1e-3,
) -> tuple[float, int]:
    """Max relative error between analytic and central-difference gradients.

    Dropout must be disabled.  Parameters whose perturbation sits within
    ``kink_margin`` of the MAE kink (residual sign flip or near-zero residual)
    or flips a ReLU unit's activation state are skipped and counted rather
    than failed; the subgradient there is ambiguous.  Returns (max relative
    error over checked params, skip count).
    """
    if config.dropout_p != 0.0:
        raise ValueError("gradient_check requires dropout_p=0")
    x, target = np.asarray(sample[0], dtype=np.float64), float(sample[1])
    model = MlpModel(config, x.shape[0])
    out, pres, acts, masks = model._forward_full(x[None, :], train=False)
    grads_w, grads_b = model._backward(x[None, :], np.array([target]), pres, acts, masks, out)
    analytic = grads_w + grads_b
    params = model.weights + model.biases

    max_rel = 0.0
    skipped = 0
    for p, g in zip(params, analytic):
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            ix = it.multi_index
            orig = p[ix]
            p[ix] = orig + step
            out_p, pres_p, _, _ = model._forward_full(x[None, :], train=False)
            p[ix] = orig - step
            out_m, pres_m, _, _ = model._forward_full(x[None, :], train=False)
            p[ix] = orig
            r_plus = float(out_p[0]) - target
            r_minus = float(out_m[0]) - target
            relu_flip = any(
                np.any((zp > 0.0) != (zm > 0.0))
                for zp, zm in zip(pres_p, pres_m)
            )
            if (
                relu_flip
                or abs(r_plus) < kink_margin
                or abs(r_minus) < kink_margin
                or np.sign(r_plus) != np.sign(r_minus)
            ):
                skipped += 1
                continue
            numeric = (abs(r_plus) - abs(r_minus)) / (2.0 * step)
            a = float(g[ix])
            denom = max(abs(a), abs(numeric))
            if denom < 1e-10:
                continue
            max_rel = max(max_rel, abs(a - numeric) / denom)
    return max_rel, skipped
