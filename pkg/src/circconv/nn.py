"""Minimal layer stack and optimizer for desk-scale training runs.

Two workflows are supported end to end: training a block-circulant network
from scratch (gradients are taken directly with respect to the base tensor,
so the expanded kernel stays exactly block-circulant after every step), and
converting a trained dense network by nearest-circulant projection followed
by retraining.

Batches are (B, W, H, C) arrays; conv layers process samples in a fixed
order, so training runs are bit-reproducible for a fixed seed.
"""

import copy
from dataclasses import dataclass

import numpy as np

from .circulant import CirculantBaseTensor, CompressionScheme, PartitionConfig, project_tensor
from .convops import (
    ConvGeometry,
    circ_backward_input,
    circ_backward_weight,
    circ_forward,
    conv_naive,
    conv_naive_backward_input,
    conv_naive_backward_weight,
    kernel_spectra,
)
from .errors import ConfigError, ContractError, ShapeError
from .tensor import DTYPE


class CircConvLayer:
    """Convolution whose kernel is stored only as a circulant base tensor."""

    def __init__(self, base, bias=None, geometry=ConvGeometry()):
        self.base = base
        self.bias = (
            np.zeros(base.config.c_out, dtype=DTYPE)
            if bias is None
            else np.asarray(bias, dtype=DTYPE)
        )
        if self.bias.shape != (base.config.c_out,):
            raise ShapeError(
                f"bias length {self.bias.shape} does not match {base.config.c_out} outputs"
            )
        self.geometry = geometry

    def params(self):
        return {"base": self.base.base, "bias": self.bias}

    def forward(self, xb):
        if xb.ndim != 4 or xb.shape[3] != self.base.config.c_in:
            raise ShapeError(
                f"expected (B, W, H, {self.base.config.c_in}) input, got {xb.shape}"
            )
        w_spec = kernel_spectra(self.base)  # constant within the step
        ys = [
            circ_forward(x, self.base, self.geometry, w_spec=w_spec) for x in xb
        ]
        return np.stack(ys) + self.bias, xb

    def backward(self, cache, gyb):
        xb = cache
        dbase = np.zeros_like(self.base.base)
        dxs = []
        for x, gy in zip(xb, gyb):  # fixed reduction order over the batch
            dbase += circ_backward_weight(x, gy, self.base, self.geometry)
            dxs.append(circ_backward_input(gy, self.base, self.geometry))
        dbias = gyb.sum(axis=(0, 1, 2))
        return np.stack(dxs), {"base": dbase, "bias": dbias}


class DenseConvLayer:
    """Unstructured convolution, the conversion source and twin-test oracle."""

    def __init__(self, w, bias=None, geometry=ConvGeometry()):
        self.w = np.ascontiguousarray(w, dtype=DTYPE)
        self.bias = (
            np.zeros(self.w.shape[3], dtype=DTYPE)
            if bias is None
            else np.asarray(bias, dtype=DTYPE)
        )
        self.geometry = geometry

    def params(self):
        return {"w": self.w, "bias": self.bias}

    def forward(self, xb):
        if xb.ndim != 4 or xb.shape[3] != self.w.shape[2]:
            raise ShapeError(
                f"expected (B, W, H, {self.w.shape[2]}) input, got {xb.shape}"
            )
        ys = [conv_naive(x, self.w, self.geometry) for x in xb]
        return np.stack(ys) + self.bias, xb

    def backward(self, cache, gyb):
        xb = cache
        dw = np.zeros_like(self.w)
        dxs = []
        for x, gy in zip(xb, gyb):
            dw += conv_naive_backward_weight(x, gy, self.w.shape[:2], self.geometry)
            dxs.append(conv_naive_backward_input(gy, self.w, self.geometry))
        return np.stack(dxs), {"w": dw, "bias": gyb.sum(axis=(0, 1, 2))}


class ReLU:
    def params(self):
        return {}

    def forward(self, xb):
        return np.maximum(xb, 0.0), xb > 0

    def backward(self, cache, gyb):
        return gyb * cache, {}


class GlobalAveragePool:
    """(B, W, H, C) -> (B, C) spatial mean."""

    def params(self):
        return {}

    def forward(self, xb):
        if xb.ndim != 4:
            raise ShapeError(f"expected a (B, W, H, C) input, got {xb.shape}")
        return xb.mean(axis=(1, 2)), xb.shape

    def backward(self, cache, gyb):
        b, w, h, c = cache
        return np.broadcast_to(
            gyb[:, None, None, :] / (w * h), (b, w, h, c)
        ).copy(), {}


class FullyConnected:
    def __init__(self, matrix, bias=None):
        self.matrix = np.ascontiguousarray(matrix, dtype=DTYPE)
        self.bias = (
            np.zeros(self.matrix.shape[1], dtype=DTYPE)
            if bias is None
            else np.asarray(bias, dtype=DTYPE)
        )

    def params(self):
        return {"matrix": self.matrix, "bias": self.bias}

    def forward(self, xb):
        if xb.ndim != 2 or xb.shape[1] != self.matrix.shape[0]:
            raise ShapeError(
                f"expected (B, {self.matrix.shape[0]}) input, got {xb.shape}"
            )
        return xb @ self.matrix + self.bias, xb

    def backward(self, cache, gyb):
        xb = cache
        return gyb @ self.matrix.T, {"matrix": xb.T @ gyb, "bias": gyb.sum(axis=0)}


@dataclass
class Network:
    layers: list
    version: int = 0  # bumped by every optimizer step; guards stale caches

    def params(self):
        return [layer.params() for layer in self.layers]


@dataclass
class ForwardCache:
    version: int
    layer_caches: list
    logits: np.ndarray


def forward_pass(net, xb):
    """Run all layers; returns (logits, cache for backward_pass)."""
    h = np.asarray(xb, dtype=DTYPE)
    caches = []
    for i, layer in enumerate(net.layers):
        try:
            h, c = layer.forward(h)
        except ShapeError as exc:
            raise ShapeError(
                f"layer {i} ({type(layer).__name__}): {exc}"
            ) from exc
        caches.append(c)
    return h, ForwardCache(net.version, caches, h)


def softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean cross entropy and its gradient with respect to the logits."""
    p = softmax(logits)
    b = logits.shape[0]
    loss = -np.log(p[np.arange(b), labels] + 1e-300).mean()
    grad = p.copy()
    grad[np.arange(b), labels] -= 1.0
    return float(loss), grad / b


def squared_error_loss(y, target):
    """L = 0.5 * ||y - target||^2 and its gradient."""
    diff = y - target
    return float(0.5 * np.sum(diff**2)), diff


def backward_pass(net, cache, labels):
    """Gradients of the mean cross-entropy loss over all free parameters.

    Only the stored parameters are differentiated; for circulant layers
    that is the base tensor, never its dense expansion.
    """
    if cache.version != net.version:
        raise ContractError(
            "stale forward cache: the network was updated after forward_pass"
        )
    _, grad = softmax_cross_entropy(cache.logits, labels)
    grads = [None] * len(net.layers)
    for i in reversed(range(len(net.layers))):
        grad, grads[i] = net.layers[i].backward(cache.layer_caches[i], grad)
    return grads


@dataclass(frozen=True)
class SgdConfig:
    lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    batch_size: int = 64

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError("momentum must lie in [0, 1)")
        if self.batch_size < 1:
            raise ConfigError("batch size must be >= 1")


def sgd_step(net, grads, state, cfg):
    """v <- momentum*v + grad + wd*param; param <- param - lr*v, in place.

    Returns the velocity state; pass None on the first step.
    """
    params = net.params()
    if state is None:
        state = [
            {name: np.zeros_like(arr) for name, arr in layer.items()}
            for layer in params
        ]
    for layer_params, layer_grads, layer_state in zip(params, grads, state):
        for name, param in layer_params.items():
            v = layer_state[name]
            v *= cfg.momentum
            v += layer_grads[name] + cfg.weight_decay * param
            param -= cfg.lr * v
    net.version += 1
    return state


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------

def init_circ_base(rng, kernel_size, config):
    """He-style base tensor init with fan-in of the EXPANDED dense kernel.

    The N free parameters of each block are sampled directly at the std the
    dense kernel would use, keeping activation variance comparable to a
    dense layer of the same shape.
    """
    k1, k2 = kernel_size
    fan_in = k1 * k2 * config.c_in
    std = np.sqrt(2.0 / fan_in)
    base = rng.normal(0.0, std, size=(k1, k2, config.padded_in, config.s))
    return CirculantBaseTensor(base, config)


def init_dense_kernel(rng, kernel_size, c_in, c_out):
    k1, k2 = kernel_size
    std = np.sqrt(2.0 / (k1 * k2 * c_in))
    return rng.normal(0.0, std, size=(k1, k2, c_in, c_out))


def init_fc(rng, c_in, c_out):
    return rng.normal(0.0, np.sqrt(1.0 / c_in), size=(c_in, c_out))


# ---------------------------------------------------------------------------
# Built-in synthetic task: planted dense-conv teacher
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ToyTaskSpec:
    n_samples: int = 192
    spatial: tuple = (12, 12)
    channels: int = 4
    classes: int = 4
    hidden: int = 8
    kernel: tuple = (3, 3)
    label_noise: float = 0.12


def make_toy_task(seed, spec=ToyTaskSpec()):
    """Random inputs labeled by a planted dense conv-relu-pool-fc teacher.

    Teacher logits are centered per class before the argmax so every class
    actually occurs; a small fraction of labels is resampled uniformly,
    giving the task an irreducible loss floor that survives retraining.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(
        (spec.n_samples, spec.spatial[0], spec.spatial[1], spec.channels)
    )
    pad = (spec.kernel[0] // 2, spec.kernel[1] // 2)
    teacher = Network(
        [
            DenseConvLayer(
                init_dense_kernel(rng, spec.kernel, spec.channels, spec.hidden),
                bias=rng.normal(0.0, 0.1, spec.hidden),
                geometry=ConvGeometry(pad=pad),
            ),
            ReLU(),
            GlobalAveragePool(),
            FullyConnected(init_fc(rng, spec.hidden, spec.classes)),
        ]
    )
    logits, _ = forward_pass(teacher, x)
    labels = (logits - logits.mean(axis=0)).argmax(axis=1)
    if spec.label_noise > 0:
        flip = rng.random(spec.n_samples) < spec.label_noise
        labels[flip] = rng.integers(0, spec.classes, size=int(flip.sum()))
    return x, labels


def make_dense_toy_net(seed, spec=ToyTaskSpec()):
    rng = np.random.default_rng(seed)
    pad = (spec.kernel[0] // 2, spec.kernel[1] // 2)
    return Network(
        [
            DenseConvLayer(
                init_dense_kernel(rng, spec.kernel, spec.channels, spec.hidden),
                geometry=ConvGeometry(pad=pad),
            ),
            ReLU(),
            GlobalAveragePool(),
            FullyConnected(init_fc(rng, spec.hidden, spec.classes)),
        ]
    )


def make_circ_toy_net(seed, n, spec=ToyTaskSpec()):
    rng = np.random.default_rng(seed)
    pad = (spec.kernel[0] // 2, spec.kernel[1] // 2)
    config = PartitionConfig(n=n, c_in=spec.channels, c_out=spec.hidden)
    return Network(
        [
            CircConvLayer(
                init_circ_base(rng, spec.kernel, config),
                geometry=ConvGeometry(pad=pad),
            ),
            ReLU(),
            GlobalAveragePool(),
            FullyConnected(init_fc(rng, spec.hidden, spec.classes)),
        ]
    )


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

def evaluate(net, x, labels):
    """Mean loss and accuracy over a full dataset."""
    logits, _ = forward_pass(net, x)
    loss, _ = softmax_cross_entropy(logits, labels)
    acc = float((logits.argmax(axis=1) == labels).mean())
    return loss, acc


def train(net, data, cfg, steps, seed, log=None):
    """Minibatch SGD; returns one {'step', 'loss', 'accuracy'} record per step."""
    x, labels = data
    rng = np.random.default_rng(seed)
    state = None
    history = []
    for step in range(steps):
        idx = rng.choice(x.shape[0], size=min(cfg.batch_size, x.shape[0]), replace=False)
        xb, yb = x[idx], labels[idx]
        logits, cache = forward_pass(net, xb)
        loss, _ = softmax_cross_entropy(logits, yb)
        grads = backward_pass(net, cache, yb)
        state = sgd_step(net, grads, state, cfg)
        record = {
            "step": step,
            "loss": loss,
            "accuracy": float((logits.argmax(axis=1) == yb).mean()),
        }
        history.append(record)
        if log is not None:
            log(record)
    return history


def conv_layer_indices(net):
    return [i for i, l in enumerate(net.layers) if isinstance(l, DenseConvLayer)]


def convert_network(net_dense, scheme):
    """Project every dense conv layer onto its block-circulant structure.

    scheme lists one partition size per dense conv layer, in layer order;
    returns (converted Network, total squared projection error). The input
    network is left untouched (no shared parameter arrays).
    """
    idxs = conv_layer_indices(net_dense)
    if len(scheme) != len(idxs):
        raise ConfigError(
            f"scheme lists {len(scheme)} ratios but the network has "
            f"{len(idxs)} dense conv layers"
        )
    layers = [copy.deepcopy(layer) for layer in net_dense.layers]
    total_err = 0.0
    for i, n in zip(idxs, scheme.ratios):
        dense = layers[i]
        config = PartitionConfig(
            n=n, c_in=dense.w.shape[2], c_out=dense.w.shape[3]
        )
        base, report = project_tensor(dense.w, config)
        total_err += report.total_sq_error
        layers[i] = CircConvLayer(
            base, bias=dense.bias.copy(), geometry=dense.geometry
        )
    return Network(layers), total_err


def convert_and_retrain(net_dense, scheme, data, cfg, retrain_steps, seed=0):
    """Dense -> projected circulant -> retrained circulant.

    Returns the converted network and a log with losses before conversion,
    right after conversion, and after retraining, plus the projection error.
    """
    if isinstance(scheme, int):
        scheme = CompressionScheme((scheme,) * len(conv_layer_indices(net_dense)))
    x, labels = data
    loss_before, acc_before = evaluate(net_dense, x, labels)
    net, approx_err = convert_network(net_dense, scheme)
    loss_converted, acc_converted = evaluate(net, x, labels)
    history = train(net, data, cfg, retrain_steps, seed)
    loss_after, acc_after = evaluate(net, x, labels)
    report = {
        "loss_before": loss_before,
        "loss_after_conversion": loss_converted,
        "loss_after_retrain": loss_after,
        "accuracy_before": acc_before,
        "accuracy_after_conversion": acc_converted,
        "accuracy_after_retrain": acc_after,
        "projection_sq_error": approx_err,
        "history": history,
    }
    return net, report
