"""Analytic gradients for steerable nets and a small training demo.

Backpropagation is hand-written per layer kind; the gradient of a conv
layer's parameters is the basis-transposed pullback of the filter-bank
gradient (the map Theta -> Psi is linear).  The demo task stamps class
patterns on a torus at random poses, so labels are invariant under the
full isometry group by construction.
"""
from __future__ import annotations

import numpy as np

from . import induction
from .capsules import FiberSpec, fiber_rep
from .errors import TrainingFailureError
from .intertwiners import assemble_filter_bank, bank_gradient_to_params
from .network import (
    NetworkSpec,
    ParamSet,
    _nonlinearity_data,
    init_params,
    layer_input_fiber,
    stable_norm,
)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean loss and gradient w.r.t. logits over a batch."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=-1, keepdims=True)
    batch = logits.shape[0]
    loss = -np.mean(np.log(probs[np.arange(batch), labels] + 1e-300))
    grad = probs.copy()
    grad[np.arange(batch), labels] -= 1.0
    return loss, grad / batch


def _conv_backward(grad_out, cached_in, bank):
    s = bank.s
    c = (s - 1) // 2
    grad_in = np.zeros_like(cached_in)
    grad_tensor = np.zeros_like(bank.tensor)
    for du in range(-c, c + 1):
        for dv in range(-c, c + 1):
            taps = bank.tensor[:, :, du + c, dv + c]
            grad_in += np.roll(grad_out, shift=(du, dv), axis=(-3, -2)) @ taps
            shifted = np.roll(cached_in, shift=(-du, -dv), axis=(-3, -2))
            go = grad_out.reshape(-1, grad_out.shape[-1])
            sh = shifted.reshape(-1, shifted.shape[-1])
            grad_tensor[:, :, du + c, dv + c] = go.T @ sh
    return grad_in, grad_tensor


def _nonlinearity_backward(grad_out, cached_in, fiber: FiberSpec, tag, bias):
    if tag == "identity":
        return grad_out
    if tag == "relu":
        return grad_out * (cached_in > 0)
    grads = np.zeros_like(cached_in)
    out_off = 0
    for cap, _copy, off in fiber.capsule_blocks():
        block = cached_in[..., off : off + cap.dim]
        if tag == "crelu":
            d_pos = grad_out[..., out_off : out_off + cap.dim]
            d_neg = grad_out[..., out_off + cap.dim : out_off + 2 * cap.dim]
            grads[..., off : off + cap.dim] = d_pos * (block > 0) - d_neg * (block < 0)
            out_off += 2 * cap.dim
        elif tag == "norm-relu":
            d_blk = grad_out[..., out_off : out_off + cap.dim]
            norm = stable_norm(block)
            active = norm > bias
            safe = np.maximum(norm, 1e-30)
            inner = np.sum(block * d_blk, axis=-1, keepdims=True)
            grads[..., off : off + cap.dim] = np.where(
                active, (1.0 - bias / safe) * d_blk + (bias / safe**3) * inner * block, 0.0
            )
            out_off += cap.dim
        else:
            raise ValueError(f"unknown nonlinearity tag {tag!r}")
    return grads


def grad_params(net: NetworkSpec, params: ParamSet, batch, loss="softmax-ce"):
    """Loss value and analytic gradients for a labelled batch (X, y).

    X has shape (B, N, N, K); returns (loss, ParamSet of gradients).
    """
    if loss != "softmax-ce":
        raise ValueError("only softmax cross-entropy is supported")
    data, labels = batch
    data = np.asarray(data, float)

    # forward, caching layer inputs and assembled banks
    inputs = []
    banks = {}
    current = data
    for idx, layer in enumerate(net.layers):
        inputs.append(current)
        if layer.kind == "steerable-conv":
            bank = assemble_filter_bank(
                layer.in_fiber, layer.out_fiber, layer.s, params.conv[idx]
            )
            banks[idx] = bank
            from .network import _correlate_data

            current = _correlate_data(current, bank)
        elif layer.kind == "nonlinearity":
            fiber = layer_input_fiber(net, idx)
            current, _ = _nonlinearity_data(current, fiber, layer.tag, layer.bias)
        elif layer.kind == "residual-add":
            src = data if layer.source == -1 else _layer_output(inputs, idx, layer.source)
            current = current + src
        elif layer.kind == "global-pool":
            current = current.mean(axis=(-3, -2))
        elif layer.kind == "affine-readout":
            w, b = params.readout[idx]
            current = current @ w.T + b
    logits = current
    loss_value, grad = softmax_cross_entropy(logits, labels)

    grads = ParamSet()
    extra = {}  # gradient contributions flowing to earlier layer outputs
    grad_input = np.zeros_like(data)
    for idx in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[idx]
        grad = grad + extra.pop(idx, 0.0)
        if layer.kind == "steerable-conv":
            grad, grad_tensor = _conv_backward(grad, inputs[idx], banks[idx])
            flat = grad_tensor.reshape(grad_tensor.shape[0], -1)
            grads.conv[idx] = bank_gradient_to_params(
                flat, layer.in_fiber, layer.out_fiber, layer.s
            )
        elif layer.kind == "nonlinearity":
            fiber = layer_input_fiber(net, idx)
            grad = _nonlinearity_backward(grad, inputs[idx], fiber, layer.tag, layer.bias)
        elif layer.kind == "residual-add":
            if layer.source == -1:
                grad_input = grad_input + grad
            else:
                extra[layer.source] = extra.get(layer.source, 0.0) + grad
        elif layer.kind == "global-pool":
            n = inputs[idx].shape[-2]
            grad = np.broadcast_to(
                grad[..., None, None, :], inputs[idx].shape
            ) / (n * n)
        elif layer.kind == "affine-readout":
            w, _ = params.readout[idx]
            go = grad.reshape(-1, grad.shape[-1])
            inp = inputs[idx].reshape(-1, inputs[idx].shape[-1])
            grads.readout[idx] = (go.T @ inp, go.sum(axis=0))
            grad = grad @ w
    return loss_value, grads


def _layer_output(inputs, next_idx, source):
    # inputs[i] is the input of layer i; the output of layer `source` is
    # the input of layer source + 1 (layers are sequential).
    return inputs[source + 1]


def sgd_step(params: ParamSet, grads: ParamSet, lr: float):
    for idx, g in grads.conv.items():
        for key, theta in g.theta.items():
            params.conv[idx].theta[key] -= lr * theta
    for idx, (gw, gb) in grads.readout.items():
        w, b = params.readout[idx]
        params.readout[idx] = (w - lr * gw, b - lr * gb)


# ---------------------------------------------------------------------------
# synthetic demo task


def make_dataset(grid_n: int, classes: int, per_class: int, rng,
                 noise: float = 0.05, stamps=None):
    """Class patterns stamped at random poses on the torus; the label is
    which pattern was stamped, so it is invariant under any isometry.
    Pass the same `stamps` array to draw train and test splits from the
    same underlying patterns."""
    from .dihedral import ELEMENTS, IsometryElement, TorusGrid

    grid = TorusGrid(grid_n)
    if stamps is None:
        stamps = rng.standard_normal((classes, 3, 3))
    trivial = fiber_rep(FiberSpec([("A1", 1)]))
    xs, ys = [], []
    for label in range(classes):
        base = np.zeros((grid_n, grid_n, 1))
        for (du, dv), value in np.ndenumerate(stamps[label]):
            base[(du - 1) % grid_n, (dv - 1) % grid_n, 0] = value
        for _ in range(per_class):
            h = ELEMENTS[rng.integers(8)]
            t = (int(rng.integers(grid_n)), int(rng.integers(grid_n)))
            g = IsometryElement(h, t, grid)
            sample = induction.induced_act_field(trivial, g, base)
            sample = sample + noise * rng.standard_normal(sample.shape)
            xs.append(sample)
            ys.append(label)
    order = rng.permutation(len(xs))
    return np.stack(xs)[order], np.array(ys)[order]


def default_demo_config() -> dict:
    return {
        "grid": 9,
        "classes": 4,
        "train_per_class": 30,
        "test_per_class": 15,
        "epochs": 250,
        "lr": 0.5,
        "seed": 0,
        "noise": 0.05,
    }


def demo_network(grid_n: int, classes: int) -> NetworkSpec:
    from .dihedral import TorusGrid
    from .network import LayerSpec

    return NetworkSpec(
        TorusGrid(grid_n),
        [
            LayerSpec("steerable-conv", in_fiber=FiberSpec([("A1", 1)]),
                      out_fiber=FiberSpec([("regular", 3)]), s=3),
            LayerSpec("nonlinearity", tag="relu"),
            LayerSpec("steerable-conv", in_fiber=FiberSpec([("regular", 3)]),
                      out_fiber=FiberSpec([("A1", 12)]), s=3),
            LayerSpec("global-pool"),
            LayerSpec("affine-readout", classes=classes),
        ],
    )


def accuracy(net: NetworkSpec, params: ParamSet, data, labels) -> float:
    from .network import forward

    logits = forward(net, params, data)
    return float(np.mean(np.argmax(logits, axis=-1) == labels))


def train_demo(config: dict | None = None) -> dict:
    """Plain full-batch gradient descent on the stamped-pattern task."""
    from .dihedral import TorusGrid
    from .network import forward

    cfg = default_demo_config()
    cfg.update(config or {})
    rng = np.random.default_rng(cfg["seed"])
    grid_n, classes = cfg["grid"], cfg["classes"]

    stamps = rng.standard_normal((classes, 3, 3))
    train_x, train_y = make_dataset(
        grid_n, classes, cfg["train_per_class"], rng, cfg["noise"], stamps)
    test_x, test_y = make_dataset(
        grid_n, classes, cfg["test_per_class"], rng, cfg["noise"], stamps)

    # transformed test copies: apply a fresh random isometry to every sample
    grid = TorusGrid(grid_n)
    trivial = fiber_rep(FiberSpec([("A1", 1)]))
    elements = induction.sample_group_elements(grid, rng)
    transformed = np.stack(
        [
            induction.induced_act_field(trivial, elements[rng.integers(len(elements))], x)
            for x in test_x
        ]
    )

    net = demo_network(grid_n, classes)
    params = init_params(net, seed=cfg["seed"])
    loss = float("nan")
    for _epoch in range(cfg["epochs"]):
        loss, grads = grad_params(net, params, (train_x, train_y))
        if not np.isfinite(loss):
            raise TrainingFailureError(f"loss diverged to {loss}")
        sgd_step(params, grads, cfg["lr"])

    final_logits = forward(net, params, train_x)
    if not np.all(np.isfinite(final_logits)):
        raise TrainingFailureError("non-finite logits after training")
    train_acc = accuracy(net, params, train_x, train_y)
    test_acc = accuracy(net, params, test_x, test_y)
    test_acc_tf = accuracy(net, params, transformed, test_y)
    return {
        "config": cfg,
        "final_loss": float(loss) if np.isfinite(loss) else None,
        "train_accuracy": train_acc,
        "test_accuracy": test_acc,
        "test_accuracy_transformed": test_acc_tf,
        "invariance_gap": abs(test_acc - test_acc_tf),
    }
