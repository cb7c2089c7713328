"""Desk-scale steerable network runtime on the torus.

Fields are N x N x K arrays tagged with a fiber spec; all convolution is
circular so that equivariance under the full isometry group is exact up
to float rounding.  The network engine works on arrays with an optional
leading batch axis; the FeatureField wrapper carries the fiber tag for
the public field-level operations.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import capsules, dihedral, induction
from .capsules import FiberSpec, act_fiber, fiber_rep, get_capsule, require_addable
from .dihedral import TorusGrid
from .errors import AdmissibilityError, GroupMismatchError, TypeSystemError
from .intertwiners import (
    FilterBank,
    FilterBankParams,
    assemble_filter_bank,
    bank_gradient_to_params,
    param_shapes,
    random_params,
)


@dataclass
class FeatureField:
    grid: TorusGrid
    fiber: FiberSpec
    data: np.ndarray  # N x N x K

    def __post_init__(self):
        n = self.grid.n
        expected = (n, n, self.fiber.channels)
        if self.data.shape != expected:
            raise ValueError(f"field shape {self.data.shape}, expected {expected}")

    def steer(self, g: dihedral.IsometryElement) -> "FeatureField":
        moved = induction.induced_act_field(fiber_rep(self.fiber), g, self.data)
        return FeatureField(self.grid, self.fiber, moved)


# ---------------------------------------------------------------------------
# core field operations (accept (..., N, N, K) arrays)


def _correlate_data(data: np.ndarray, bank: FilterBank) -> np.ndarray:
    s = bank.s
    c = (s - 1) // 2
    out_k = bank.tensor.shape[0]
    out = np.zeros(data.shape[:-1] + (out_k,))
    for du in range(-c, c + 1):
        for dv in range(-c, c + 1):
            taps = bank.tensor[:, :, du + c, dv + c]  # K' x K
            shifted = np.roll(data, shift=(-du, -dv), axis=(-3, -2))
            out += shifted @ taps.T
    return out


def correlate(f, bank: FilterBank):
    """Circular cross-correlation: output fiber at x is the bank applied
    to the s x s patch centered at x."""
    if isinstance(f, FeatureField):
        if f.fiber != bank.in_fiber:
            raise TypeSystemError(f"input fiber {f.fiber} != bank fiber {bank.in_fiber}")
        return FeatureField(f.grid, bank.out_fiber, _correlate_data(f.data, bank))
    return _correlate_data(np.asarray(f, float), bank)


def stable_norm(block: np.ndarray) -> np.ndarray:
    """Euclidean norm over the last axis, invariant to coordinate order:
    squares are sorted before summation, so signed permutations of the
    input yield a bit-identical result."""
    sq = np.sort(np.square(block), axis=-1)
    return np.sqrt(np.sum(sq, axis=-1, keepdims=True))


def _nonlinearity_data(data: np.ndarray, fiber: FiberSpec, tag: str, bias: float = 0.5):
    """Returns (output data, output fiber)."""
    out_fiber = act_fiber(fiber, tag)
    if tag == "identity":
        return data.copy(), out_fiber
    if tag == "relu":
        return np.maximum(data, 0.0), out_fiber
    pieces = []
    for cap, _copy, off in fiber.capsule_blocks():
        block = data[..., off : off + cap.dim]
        if tag == "crelu":
            if "crelu" not in cap.admissible:
                raise AdmissibilityError(f"crelu not admissible for {cap.id}")
            pieces.append(np.maximum(block, 0.0))
            pieces.append(np.maximum(-block, 0.0))
        elif tag == "norm-relu":
            norm = stable_norm(block)
            scale = np.where(norm > bias, 1.0 - bias / np.maximum(norm, 1e-30), 0.0)
            pieces.append(block * scale)
        else:
            raise ValueError(f"unknown nonlinearity tag {tag!r}")
    return np.concatenate(pieces, axis=-1), out_fiber


def apply_nonlinearity(f: FeatureField, tag: str, bias: float = 0.5) -> FeatureField:
    data, out_fiber = _nonlinearity_data(f.data, f.fiber, tag, bias)
    return FeatureField(f.grid, out_fiber, data)


def residual_add(a: FeatureField, b: FeatureField) -> FeatureField:
    require_addable(a.fiber, b.fiber)
    if a.grid != b.grid:
        raise GroupMismatchError("residual addition across different grids")
    return FeatureField(a.grid, a.fiber, a.data + b.data)


def _require_a1_fiber(fiber: FiberSpec):
    for cid, mult in fiber.entries:
        if mult and cid != "A1":
            raise TypeSystemError(
                f"invariant readout requires an A1-only fiber, found {cid!r}"
            )


def invariant_readout(f: FeatureField, weights: np.ndarray, bias: np.ndarray):
    """Global spatial average per channel followed by an affine map.
    Invariant under the full induced action when the fiber is all A1."""
    _require_a1_fiber(f.fiber)
    pooled = f.data.mean(axis=(-3, -2))
    return pooled @ weights.T + bias


# ---------------------------------------------------------------------------
# network specs


@dataclass
class LayerSpec:
    kind: str
    in_fiber: FiberSpec | None = None
    out_fiber: FiberSpec | None = None
    s: int | None = None
    tag: str | None = None
    bias: float = 0.5
    source: int | None = None  # residual-add: index of the added layer (-1 = input)
    classes: int | None = None

    def to_json(self) -> dict:
        obj = {"kind": self.kind}
        if self.kind == "steerable-conv":
            obj.update({"in": self.in_fiber.to_json(), "out": self.out_fiber.to_json(), "s": self.s})
        elif self.kind == "nonlinearity":
            obj["tag"] = self.tag
            if self.tag == "norm-relu":
                obj["bias"] = self.bias
        elif self.kind == "residual-add":
            obj["from"] = self.source
        elif self.kind == "affine-readout":
            obj["classes"] = self.classes
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "LayerSpec":
        kind = obj["kind"]
        if kind == "steerable-conv":
            return cls(kind, in_fiber=FiberSpec.from_json(obj["in"]),
                       out_fiber=FiberSpec.from_json(obj["out"]), s=obj["s"])
        if kind == "nonlinearity":
            return cls(kind, tag=obj["tag"], bias=obj.get("bias", 0.5))
        if kind == "residual-add":
            return cls(kind, source=obj["from"])
        if kind == "global-pool":
            return cls(kind)
        if kind == "affine-readout":
            return cls(kind, classes=obj["classes"])
        raise ValueError(f"unknown layer kind {kind!r}")


@dataclass
class NetworkSpec:
    grid: TorusGrid
    layers: list

    def to_json(self) -> dict:
        return {"grid": self.grid.n, "layers": [l.to_json() for l in self.layers]}

    @classmethod
    def from_json(cls, obj: dict) -> "NetworkSpec":
        return cls(TorusGrid(obj["grid"]), [LayerSpec.from_json(l) for l in obj["layers"]])

    @property
    def in_fiber(self) -> FiberSpec:
        first = self.layers[0]
        if first.kind != "steerable-conv":
            raise TypeSystemError("network must start with a steerable-conv layer")
        return first.in_fiber

    def fibers(self) -> list:
        """Fiber spec after every layer ("vector" once spatial structure is
        pooled away); raises TypeSystemError on any chaining violation."""
        current = self.in_fiber
        out = []
        for idx, layer in enumerate(self.layers):
            if layer.kind == "steerable-conv":
                if not isinstance(current, FiberSpec) or current != layer.in_fiber:
                    raise TypeSystemError(
                        f"layer {idx}: conv input fiber {layer.in_fiber} does not "
                        f"match incoming {current}"
                    )
                current = layer.out_fiber
            elif layer.kind == "nonlinearity":
                if not isinstance(current, FiberSpec):
                    raise TypeSystemError(f"layer {idx}: nonlinearity after pooling")
                current = act_fiber(current, layer.tag)
            elif layer.kind == "residual-add":
                src = self.in_fiber if layer.source == -1 else out[layer.source]
                if not isinstance(current, FiberSpec) or not isinstance(src, FiberSpec):
                    raise TypeSystemError(f"layer {idx}: residual add on non-fields")
                if not capsules.check_addable(current, src):
                    raise TypeSystemError(
                        f"layer {idx}: residual addition of incompatible fibers "
                        f"{current} vs {src}"
                    )
            elif layer.kind == "global-pool":
                if not isinstance(current, FiberSpec):
                    raise TypeSystemError(f"layer {idx}: repeated pooling")
                _require_a1_fiber(current)
                current = ("vector", current.channels)
            elif layer.kind == "affine-readout":
                if isinstance(current, FiberSpec):
                    raise TypeSystemError(f"layer {idx}: readout before pooling")
                current = ("vector", layer.classes)
            else:
                raise ValueError(f"unknown layer kind {layer.kind!r}")
            out.append(current)
        return out


@dataclass
class ParamSet:
    """Per-layer parameters: FilterBankParams for conv layers, (W, b) for
    affine readouts."""

    conv: dict = field(default_factory=dict)
    readout: dict = field(default_factory=dict)

    def copy(self) -> "ParamSet":
        return ParamSet(
            {k: v.copy() for k, v in self.conv.items()},
            {k: (w.copy(), b.copy()) for k, (w, b) in self.readout.items()},
        )


def save_params(path: str, params: ParamSet):
    """Write every parameter tensor as a named record: one JSON header
    line followed by a binary tensor blob.  Payloads are float32."""
    import json

    from .intertwiners import FilterBankParams  # noqa: F401  (doc reference)
    from .tensorfile import write_tensor_bytes

    with open(path, "wb") as fh:
        for idx in sorted(params.conv):
            for key in sorted(params.conv[idx].theta):
                header = {"kind": "conv", "layer": idx, "block": list(key)}
                fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
                fh.write(write_tensor_bytes(params.conv[idx].theta[key]))
        for idx in sorted(params.readout):
            w, b = params.readout[idx]
            for part, arr in (("W", w), ("b", b)):
                header = {"kind": "readout", "layer": idx, "part": part}
                fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
                fh.write(write_tensor_bytes(arr))


def load_params(path: str) -> ParamSet:
    import json

    from .intertwiners import FilterBankParams
    from .tensorfile import read_tensor_stream

    params = ParamSet()
    readout_parts: dict = {}
    with open(path, "rb") as fh:
        while True:
            line = fh.readline()
            if not line:
                break
            header = json.loads(line.decode())
            arr = read_tensor_stream(fh).astype(float)
            if header["kind"] == "conv":
                block = params.conv.setdefault(header["layer"], FilterBankParams({}))
                block.theta[tuple(header["block"])] = arr
            elif header["kind"] == "readout":
                readout_parts.setdefault(header["layer"], {})[header["part"]] = arr
            else:
                raise ValueError(f"unknown parameter record kind {header['kind']!r}")
    for idx, parts in readout_parts.items():
        if set(parts) != {"W", "b"}:
            raise ValueError(f"incomplete readout record for layer {idx}")
        params.readout[idx] = (parts["W"], parts["b"])
    return params


def init_params(net: NetworkSpec, seed: int = 0, scale: float | None = None) -> ParamSet:
    rng = np.random.default_rng(seed)
    params = ParamSet()
    fibers = net.fibers()
    for idx, layer in enumerate(net.layers):
        if layer.kind == "steerable-conv":
            params.conv[idx] = random_params(layer.in_fiber, layer.out_fiber, layer.s, rng, scale)
        elif layer.kind == "affine-readout":
            width = fibers[idx - 1][1]
            w = rng.standard_normal((layer.classes, width)) / np.sqrt(width)
            b = np.zeros(layer.classes)
            params.readout[idx] = (w, b)
    return params


def forward(net: NetworkSpec, params: ParamSet, data: np.ndarray, keep_intermediates=False):
    """Run the net on (..., N, N, K) input data; returns the final output,
    plus the list of per-layer outputs when requested."""
    net.fibers()  # validates chaining
    outputs = []
    current = np.asarray(data, float)
    for idx, layer in enumerate(net.layers):
        if layer.kind == "steerable-conv":
            bank = assemble_filter_bank(layer.in_fiber, layer.out_fiber, layer.s, params.conv[idx])
            current = _correlate_data(current, bank)
        elif layer.kind == "nonlinearity":
            fiber = layer_input_fiber(net, idx)
            current, _ = _nonlinearity_data(current, fiber, layer.tag, layer.bias)
        elif layer.kind == "residual-add":
            src = data if layer.source == -1 else outputs[layer.source]
            current = current + src
        elif layer.kind == "global-pool":
            current = current.mean(axis=(-3, -2))
        elif layer.kind == "affine-readout":
            w, b = params.readout[idx]
            current = current @ w.T + b
        outputs.append(current)
    if keep_intermediates:
        return current, outputs
    return current


def layer_input_fiber(net: NetworkSpec, idx: int):
    """Fiber entering layer idx (the input fiber for idx == 0)."""
    if idx == 0:
        return net.in_fiber
    return net.fibers()[idx - 1]


def verify_equivariance(
    net: NetworkSpec, params: ParamSet, trials: int = 3, seed: int = 0, tol: float = 1e-10
) -> dict:
    """Two-path check at every layer: steer-then-forward vs
    forward-then-steer, over all of H plus random translations/products."""
    grid = net.grid
    fibers = net.fibers()
    in_rep = fiber_rep(net.in_fiber)
    rng = np.random.default_rng(seed)
    elements = induction.sample_group_elements(grid, rng)

    per_layer = [0.0] * len(net.layers)
    per_element: dict = {}
    for _ in range(trials):
        f = rng.standard_normal((grid.n, grid.n, net.in_fiber.channels))
        _, outs = forward(net, params, f, keep_intermediates=True)
        for g in elements:
            gf = induction.induced_act_field(in_rep, g, f)
            _, gouts = forward(net, params, gf, keep_intermediates=True)
            key = f"{g.h.name}@{g.t}"
            for idx in range(len(net.layers)):
                if isinstance(fibers[idx], FiberSpec):
                    expected = induction.induced_act_field(
                        fiber_rep(fibers[idx]), g, outs[idx]
                    )
                else:
                    expected = outs[idx]  # pooled outputs must be invariant
                scale = max(float(np.max(np.abs(expected))), 1e-30)
                err = float(np.max(np.abs(gouts[idx] - expected))) / scale
                per_layer[idx] = max(per_layer[idx], err)
                per_element[key] = max(per_element.get(key, 0.0), err)
    worst = max(per_layer) if per_layer else 0.0
    return {
        "max_rel_error": worst,
        "per_layer": per_layer,
        "per_element": per_element,
        "tol": tol,
        "pass": bool(worst <= tol),
    }


# ---------------------------------------------------------------------------
# explicit group-convolution oracle (regular capsules only)


def gcnn_oracle(f: FeatureField, bank: FilterBank) -> FeatureField:
    """Compute a regular-capsule steerable layer as an explicit group
    convolution over the torus extension of D4.

    Input channels are read as functions on the group, u_c(x-bar h) =
    f(x)[(c, h)]; the filter taps are the identity-output rows of the
    bank; plane correlations with the transformed filter are stacked
    along the group axis.  Agrees with correlate() without reindexing.
    """
    for spec in (bank.in_fiber, bank.out_fiber):
        for cid, mult in spec.entries:
            if mult and cid != "regular":
                raise TypeSystemError("gcnn_oracle requires pure regular fibers")
    if f.fiber != bank.in_fiber:
        raise TypeSystemError("input fiber does not match the bank")
    n_in = f.fiber.channels // 8
    n_out = bank.out_fiber.channels // 8
    s = bank.s
    c = (s - 1) // 2
    n = f.grid.n
    elements = dihedral.ELEMENTS
    idx = dihedral.element_index

    # base filter: rows for output group coordinate e
    base = bank.tensor[[cp * 8 + idx(dihedral.IDENTITY) for cp in range(n_out)], :, :, :]

    out = np.zeros((n, n, n_out * 8))
    for hp in elements:  # output group coordinate
        acc = np.zeros((n, n, n_out))
        for h in elements:  # input group coordinate of the filter
            for du in range(-c, c + 1):
                for dv in range(-c, c + 1):
                    taps = base[:, [cc * 8 + idx(h) for cc in range(n_in)], du + c, dv + c]
                    tu, tv = hp.act((du, dv))
                    shifted = np.roll(f.data, shift=(-tu, -tv), axis=(0, 1))
                    channels = [cc * 8 + idx(hp * h) for cc in range(n_in)]
                    acc += shifted[:, :, channels] @ taps.T
        for cp in range(n_out):
            out[:, :, cp * 8 + idx(hp)] = acc[:, :, cp]
    return FeatureField(f.grid, bank.out_fiber, out)
