"""Dense-layer graph convolutional network with exact reverse-mode gradients,
inverted dropout, plain and peak-weighted losses, and an adaptive-moment
optimizer. All training arithmetic is 64-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .meshgraph import PropagationMatrix

SL_DIMS = (32, 64, 32, 1)
ML_DIMS = (32, 64, 128, 64, 32, 1)
ARCHITECTURES = {"SL": SL_DIMS, "ML": ML_DIMS}

DEFAULT_DROPOUT = 0.1


@dataclass
class Layer:
    weight: np.ndarray  # (f_in, f_out) float64
    bias: np.ndarray  # (f_out,) float64
    frozen: bool = False


@dataclass
class ModelParams:
    layers: list[Layer]
    architecture: str  # "SL" | "ML"
    aggregation: str = "mean"

    def __post_init__(self) -> None:
        for i in range(1, len(self.layers)):
            prev_out = self.layers[i - 1].weight.shape[1]
            cur_in = self.layers[i].weight.shape[0]
            if prev_out != cur_in:
                raise ValueError(
                    f"layer {i - 1} output {prev_out} does not chain into layer {i} input {cur_in}"
                )
        if self.layers and self.layers[-1].weight.shape[1] != 1:
            raise ValueError("final layer must have a single output")

    @property
    def input_width(self) -> int:
        return self.layers[0].weight.shape[0]

    def copy(self) -> "ModelParams":
        layers = [Layer(l.weight.copy(), l.bias.copy(), l.frozen) for l in self.layers]
        return ModelParams(layers=layers, architecture=self.architecture, aggregation=self.aggregation)


@dataclass(frozen=True)
class LossSpec:
    """mse: Eq.-style mean squared error. weighted: root of the peak-weighted
    mean square, with weight c on nodes whose target exceeds the threshold."""

    kind: str = "mse"
    peak_weight: float = 1.0
    threshold: float = 1000.0

    def __post_init__(self) -> None:
        if self.kind not in ("mse", "weighted"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.peak_weight < 1.0:
            raise ValueError("peak_weight must be >= 1")
        if self.threshold <= 0.0:
            raise ValueError("threshold must be positive")


@dataclass
class ForwardCache:
    """Intermediates for reverse mode: inputs, propagated inputs,
    pre-activations, and dropout masks (None in inference mode)."""

    inputs: list[np.ndarray]
    propagated: list[np.ndarray]
    preacts: list[np.ndarray]
    masks: list[np.ndarray] | None
    propagation: PropagationMatrix

    @property
    def train_mode(self) -> bool:
        return self.masks is not None


def init_params(
    architecture: str, f_in: int, seed: int, aggregation: str = "mean"
) -> ModelParams:
    """Fan-in-scaled uniform weights, zero biases, nothing frozen."""
    if architecture not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {architecture!r}")
    if f_in < 1:
        raise ValueError("f_in must be >= 1")
    rng = np.random.default_rng(seed)
    dims = (f_in,) + ARCHITECTURES[architecture]
    layers = []
    for fin, fout in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fin)
        weight = rng.uniform(-bound, bound, size=(fin, fout))
        layers.append(Layer(weight=weight, bias=np.zeros(fout), frozen=False))
    return ModelParams(layers=layers, architecture=architecture, aggregation=aggregation)


def forward(
    params: ModelParams,
    features: np.ndarray,
    propagation: PropagationMatrix,
    dropout_seed: int | None = None,
    dropout_rate: float = DEFAULT_DROPOUT,
) -> tuple[np.ndarray, ForwardCache]:
    """Stacked graph convolutions: H <- relu(P H W + b) with inverted dropout
    after every activation; the final layer is linear.

    ``dropout_seed=None`` selects inference mode (no masks). Returns the
    N-vector of predictions and the cache for backward.
    """
    h = np.asarray(features, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != params.input_width:
        raise ValueError(
            f"features shape {h.shape} does not match model input width {params.input_width}"
        )
    if propagation.n_nodes != h.shape[0]:
        raise ValueError("propagation size does not match features")
    train = dropout_seed is not None
    rng = np.random.default_rng(dropout_seed) if train else None
    p_mat = propagation.matrix

    inputs: list[np.ndarray] = []
    propagated: list[np.ndarray] = []
    preacts: list[np.ndarray] = []
    masks: list[np.ndarray] | None = [] if train else None
    last = len(params.layers) - 1
    for li, layer in enumerate(params.layers):
        inputs.append(h)
        ph = p_mat @ h
        propagated.append(ph)
        a = ph @ layer.weight + layer.bias
        preacts.append(a)
        if li == last:
            h = a
        else:
            h = np.maximum(a, 0.0)
            if train:
                keep = rng.random(h.shape) >= dropout_rate
                mask = keep / (1.0 - dropout_rate)
                masks.append(mask)
                h = h * mask
    cache = ForwardCache(
        inputs=inputs, propagated=propagated, preacts=preacts, masks=masks, propagation=propagation
    )
    return h[:, 0], cache


def loss_mse(y: np.ndarray, t: np.ndarray) -> float:
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    if y.size == 0 or y.size != t.size:
        raise ValueError(f"need equal nonempty vectors, got {y.size} and {t.size}")
    return float(np.mean((y - t) ** 2))


def loss_weighted(y: np.ndarray, t: np.ndarray, c: float, threshold: float) -> float:
    """Root of the weighted mean square; weight c where the target exceeds
    the threshold, 1 elsewhere."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    if y.size == 0 or y.size != t.size:
        raise ValueError(f"need equal nonempty vectors, got {y.size} and {t.size}")
    if c < 1.0:
        raise ValueError("c must be >= 1")
    w = np.where(t > threshold, c, 1.0)
    return float(np.sqrt(np.mean(w * (y - t) ** 2)))


def loss_value(spec: LossSpec, y: np.ndarray, t: np.ndarray) -> float:
    if spec.kind == "mse":
        return loss_mse(y, t)
    return loss_weighted(y, t, spec.peak_weight, spec.threshold)


def _loss_grad(spec: LossSpec, y: np.ndarray, t: np.ndarray) -> np.ndarray:
    n = y.size
    if spec.kind == "mse":
        return 2.0 * (y - t) / n
    w = np.where(t > spec.threshold, spec.peak_weight, 1.0)
    value = np.sqrt(np.mean(w * (y - t) ** 2))
    if value == 0.0:
        return np.zeros_like(y)
    return w * (y - t) / (n * value)


def backward(
    cache: ForwardCache,
    loss_spec: LossSpec,
    params: ModelParams,
    y: np.ndarray,
    t: np.ndarray,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Exact gradients of the scalar loss for every layer's (weight, bias).

    Frozen layers receive zero gradient blocks. Requires a train-mode cache.
    """
    if not cache.train_mode:
        raise RuntimeError("backward requires a train-mode forward cache")
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    grad_h = _loss_grad(loss_spec, y, t)[:, None]
    p_t = cache.propagation.transpose
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(params.layers)  # type: ignore
    last = len(params.layers) - 1
    for li in range(last, -1, -1):
        layer = params.layers[li]
        if li != last:
            grad_h = grad_h * cache.masks[li]
            grad_h = grad_h * (cache.preacts[li] > 0.0)
        grad_w = cache.propagated[li].T @ grad_h
        grad_b = grad_h.sum(axis=0)
        if li > 0:
            grad_h = p_t @ (grad_h @ layer.weight.T)
        if layer.frozen:
            grads[li] = (np.zeros_like(layer.weight), np.zeros_like(layer.bias))
        else:
            grads[li] = (grad_w, grad_b)
    return grads


@dataclass
class AdamState:
    step: int
    m: list[tuple[np.ndarray, np.ndarray]]
    v: list[tuple[np.ndarray, np.ndarray]]
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def init_adam_state(params: ModelParams) -> AdamState:
    m = [(np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in params.layers]
    v = [(np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in params.layers]
    return AdamState(step=0, m=m, v=v)


def optimizer_step(
    params: ModelParams,
    grads: list[tuple[np.ndarray, np.ndarray]],
    state: AdamState,
    lr: float = 1e-3,
) -> tuple[ModelParams, AdamState]:
    """Bias-corrected adaptive-moment update; frozen layers stay bit-identical."""
    t = state.step + 1
    b1, b2, eps = state.beta1, state.beta2, state.epsilon
    new_layers: list[Layer] = []
    new_m: list[tuple[np.ndarray, np.ndarray]] = []
    new_v: list[tuple[np.ndarray, np.ndarray]] = []
    for layer, (gw, gb), (mw, mb), (vw, vb) in zip(params.layers, grads, state.m, state.v):
        if layer.frozen:
            new_layers.append(layer)
            new_m.append((mw, mb))
            new_v.append((vw, vb))
            continue
        mw = b1 * mw + (1.0 - b1) * gw
        mb = b1 * mb + (1.0 - b1) * gb
        vw = b2 * vw + (1.0 - b2) * gw**2
        vb = b2 * vb + (1.0 - b2) * gb**2
        corr1 = 1.0 - b1**t
        corr2 = 1.0 - b2**t
        w = layer.weight - lr * (mw / corr1) / (np.sqrt(vw / corr2) + eps)
        b = layer.bias - lr * (mb / corr1) / (np.sqrt(vb / corr2) + eps)
        new_layers.append(Layer(weight=w, bias=b, frozen=False))
        new_m.append((mw, mb))
        new_v.append((vw, vb))
    new_params = ModelParams(
        layers=new_layers, architecture=params.architecture, aggregation=params.aggregation
    )
    new_state = AdamState(
        step=t, m=new_m, v=new_v, beta1=b1, beta2=b2, epsilon=state.epsilon
    )
    return new_params, new_state


def predict(params: ModelParams, features: np.ndarray, propagation: PropagationMatrix) -> np.ndarray:
    """Inference-mode forward pass returning the N-vector of predictions."""
    y, _ = forward(params, features, propagation, dropout_seed=None)
    return y
