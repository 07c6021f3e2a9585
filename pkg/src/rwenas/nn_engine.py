"""Forward-only inference over decoded plans with frozen random weights.

Activations are float32 arrays in (batch, channels, height, width)
layout.  Convolutions and pools use zero same-padding with symmetric
margin (effective_kernel - 1) // 2, so spatial output is
ceil(input / stride).  Nothing in the backbone is ever trained, so
normalization layers have no learned parameters: they standardize each
channel to zero mean and unit variance using the statistics of the
batch at hand (eps 1e-5; a zero-variance channel maps to zeros).

Weight tensors live in a WeightBank keyed by layer path.  Arrays are
marked read-only at creation, so any in-place mutation attempt raises;
the bank's checksum makes freezing checkable end to end.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np

from .errors import ShapeMismatch
from .search_space import (
    CONV_OPS,
    OP_DILATION,
    OP_KERNEL,
    NetworkPlan,
    OpCode,
    OpSpec,
)

EPS = 1e-5
_F32 = np.float32


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, _F32(0))


def batch_norm(x: np.ndarray) -> np.ndarray:
    """Per-channel standardization with current-batch statistics."""
    mean = x.mean(axis=(0, 2, 3), keepdims=True)
    var = x.var(axis=(0, 2, 3), keepdims=True)
    return (x - mean) / np.sqrt(var + _F32(EPS))


def _maybe_norm(x: np.ndarray, normalize: bool) -> np.ndarray:
    return batch_norm(x) if normalize else x


def _pad_same(x: np.ndarray, kernel: int, dilation: int) -> np.ndarray:
    margin = (dilation * (kernel - 1)) // 2
    if margin == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (margin, margin), (margin, margin)))


def _out_len(n: int, stride: int) -> int:
    return -(-n // stride)


def _taps(
    padded: np.ndarray, kernel: int, stride: int, dilation: int
) -> Iterator[tuple[int, int, np.ndarray]]:
    """Yield (i, j, window) strided views, one per kernel tap."""
    h = padded.shape[2] - dilation * (kernel - 1)
    w = padded.shape[3] - dilation * (kernel - 1)
    out_h, out_w = _out_len(h, stride), _out_len(w, stride)
    for i in range(kernel):
        for j in range(kernel):
            top, left = i * dilation, j * dilation
            yield i, j, padded[
                :,
                :,
                top : top + (out_h - 1) * stride + 1 : stride,
                left : left + (out_w - 1) * stride + 1 : stride,
            ]


def conv1x1(x: np.ndarray, weight: np.ndarray, stride: int = 1) -> np.ndarray:
    """Pointwise conv; weight is (out_channels, in_channels)."""
    if x.shape[1] != weight.shape[1]:
        raise ShapeMismatch(
            f"conv1x1 expects {weight.shape[1]} input channels, got {x.shape[1]}"
        )
    if stride > 1:
        x = x[:, :, ::stride, ::stride]
    n, c, h, w = x.shape
    out = np.matmul(weight[None], x.reshape(n, c, h * w))
    return out.reshape(n, weight.shape[0], h, w)


def dense_conv(x: np.ndarray, weight: np.ndarray, stride: int = 1) -> np.ndarray:
    """Full conv; weight is (out_channels, in_channels, k, k)."""
    out_c, in_c, k, _ = weight.shape
    if x.shape[1] != in_c:
        raise ShapeMismatch(f"dense_conv expects {in_c} input channels, got {x.shape[1]}")
    padded = _pad_same(x, k, 1)
    acc = None
    for i, j, tap in _taps(padded, k, stride, 1):
        term = np.tensordot(tap, weight[:, :, i, j], axes=([1], [1]))
        acc = term if acc is None else acc + term
    return np.ascontiguousarray(acc.transpose(0, 3, 1, 2))


def depthwise_conv(
    x: np.ndarray, weight: np.ndarray, stride: int = 1, dilation: int = 1
) -> np.ndarray:
    """Per-channel conv; weight is (channels, k, k)."""
    c, k, _ = weight.shape
    if x.shape[1] != c:
        raise ShapeMismatch(f"depthwise_conv expects {c} channels, got {x.shape[1]}")
    padded = _pad_same(x, k, dilation)
    acc = None
    for i, j, tap in _taps(padded, k, stride, dilation):
        term = tap * weight[:, i, j][None, :, None, None]
        acc = term if acc is None else acc + term
    return acc


def avg_pool3(x: np.ndarray, stride: int = 1) -> np.ndarray:
    """3x3 average pool over the zero-padded window (divisor is always 9)."""
    padded = _pad_same(x, 3, 1)
    acc = None
    for _, _, tap in _taps(padded, 3, stride, 1):
        acc = tap.copy() if acc is None else acc + tap
    return acc * _F32(1.0 / 9.0)


def max_pool3(x: np.ndarray, stride: int = 1) -> np.ndarray:
    """3x3 max pool; zero padding participates in the max."""
    padded = _pad_same(x, 3, 1)
    acc = None
    for _, _, tap in _taps(padded, 3, stride, 1):
        acc = tap.copy() if acc is None else np.maximum(acc, tap)
    return acc


def factorized_reduce(
    x: np.ndarray, w_even: np.ndarray, w_odd: np.ndarray, normalize: bool = True
) -> np.ndarray:
    """Stride-2 downsampling that keeps every input pixel reachable.

    Two stride-2 pointwise convs, one on the input and one on the input
    shifted by a pixel in both spatial directions, concatenated
    channel-wise.  Output channels = rows(w_even) + rows(w_odd).
    """
    y = relu(x)
    even = conv1x1(y, w_even, stride=2)
    shifted = np.pad(y, ((0, 0), (0, 0), (0, 1), (0, 1)))[:, :, 1:, 1:]
    odd = conv1x1(shifted, w_odd, stride=2)
    return _maybe_norm(np.concatenate([even, odd], axis=1), normalize)


def _sep_conv(
    x: np.ndarray,
    dw: np.ndarray,
    pw: np.ndarray,
    stride: int,
    dilation: int,
    normalize: bool,
) -> np.ndarray:
    y = relu(x)
    y = depthwise_conv(y, dw, stride=stride, dilation=dilation)
    y = conv1x1(y, pw)
    return _maybe_norm(y, normalize)


def apply_op(
    op: OpSpec,
    x: np.ndarray,
    weights: Mapping[str, np.ndarray] | None,
    node_width: int,
    normalize: bool = True,
) -> np.ndarray:
    """Run one node operator.  `weights` holds this operator's tensors only."""
    if x.ndim != 4 or x.shape[1] != node_width:
        raise ShapeMismatch(
            f"operator input must be (n, {node_width}, h, w), got {x.shape}"
        )
    if op.code == OpCode.IDENTITY:
        if op.stride == 1:
            return x
        return factorized_reduce(x, weights["fr_even"], weights["fr_odd"], normalize)
    if op.code == OpCode.AVG_POOL_3:
        return avg_pool3(x, stride=op.stride)
    if op.code == OpCode.MAX_POOL_3:
        return max_pool3(x, stride=op.stride)
    return _sep_conv(
        x, weights["dw"], weights["pw"], op.stride, OP_DILATION[op.code], normalize
    )


@dataclass(frozen=True)
class WeightSpec:
    name: str
    shape: tuple[int, ...]
    fan_in: int


def _split_width(width: int) -> tuple[int, int]:
    return width // 2, width - width // 2


def iter_weight_specs(plan: NetworkPlan) -> Iterator[WeightSpec]:
    """Enumerate every backbone tensor in deterministic order."""
    in_c = plan.macro.input_shape[0]
    yield WeightSpec("stem.conv", (plan.stem_channels, in_c, 3, 3), in_c * 9)
    for cell in plan.cells:
        prefix = f"cell{cell.index}"
        if cell.s0_reduce:
            h_even, h_odd = _split_width(cell.width)
            yield WeightSpec(f"{prefix}.pre0.fr_even", (h_even, cell.s0_channels), cell.s0_channels)
            yield WeightSpec(f"{prefix}.pre0.fr_odd", (h_odd, cell.s0_channels), cell.s0_channels)
        else:
            yield WeightSpec(f"{prefix}.pre0.conv", (cell.width, cell.s0_channels), cell.s0_channels)
        yield WeightSpec(f"{prefix}.pre1.conv", (cell.width, cell.s1_channels), cell.s1_channels)
        for k, node in enumerate(cell.nodes):
            node_id = k + 2
            for slot, op in (("a", node.op_a), ("b", node.op_b)):
                base = f"{prefix}.node{node_id}.{slot}"
                if op.code in CONV_OPS:
                    kern = OP_KERNEL[op.code]
                    yield WeightSpec(f"{base}.dw", (cell.width, kern, kern), kern * kern)
                    yield WeightSpec(f"{base}.pw", (cell.width, cell.width), cell.width)
                elif op.code == OpCode.IDENTITY and op.stride == 2:
                    h_even, h_odd = _split_width(cell.width)
                    yield WeightSpec(f"{base}.fr_even", (h_even, cell.width), cell.width)
                    yield WeightSpec(f"{base}.fr_odd", (h_odd, cell.width), cell.width)


def uniform_fan_in(
    rng: np.random.Generator, shape: tuple[int, ...], fan_in: int
) -> np.ndarray:
    """Draw float32 weights uniformly from +-1/sqrt(fan_in)."""
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(_F32)


@dataclass
class WeightBank:
    """Frozen random backbone weights, keyed by layer path."""

    seed: int
    arrays: dict[str, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def subbank(self, prefix: str) -> dict[str, np.ndarray]:
        dot = prefix + "."
        return {k[len(dot):]: v for k, v in self.arrays.items() if k.startswith(dot)}

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for name in sorted(self.arrays):
            digest.update(name.encode())
            digest.update(self.arrays[name].tobytes())
        return digest.hexdigest()

    def num_params(self) -> int:
        return sum(a.size for a in self.arrays.values())


def init_weights(plan: NetworkPlan, seed) -> WeightBank:
    """Sample the full backbone from one generator, then mark it read-only.

    Conv layers carry no bias term; normalization supplies the
    centering.  `seed` may be an int or a numpy SeedSequence.
    """
    rng = np.random.default_rng(seed)
    arrays: dict[str, np.ndarray] = {}
    for spec in iter_weight_specs(plan):
        arr = uniform_fan_in(rng, spec.shape, spec.fan_in)
        arr.flags.writeable = False
        arrays[spec.name] = arr
    bank_seed = seed if isinstance(seed, int) else -1
    return WeightBank(seed=bank_seed, arrays=arrays)


def forward_features(
    plan: NetworkPlan,
    bank: WeightBank,
    batch: np.ndarray,
    normalize: bool = True,
    shape_log: dict | None = None,
) -> np.ndarray:
    """Run the frozen backbone and return pooled features (n, feature_dim).

    `shape_log`, if given, collects per-layer output shapes (channels,
    height, width) keyed like the complexity report.  `normalize=False`
    disables every batch-stat normalization layer.
    """
    if batch.ndim != 4 or batch.shape[1:] != plan.macro.input_shape:
        raise ShapeMismatch(
            f"batch must be (n, {plan.macro.input_shape}), got {batch.shape}"
        )

    def log(name: str, arr: np.ndarray):
        if shape_log is not None:
            shape_log[name] = tuple(arr.shape[1:])

    x = batch.astype(_F32, copy=False)
    stem = _maybe_norm(dense_conv(x, bank["stem.conv"]), normalize)
    log("stem", stem)
    s0 = s1 = stem
    for cell in plan.cells:
        prefix = f"cell{cell.index}"
        if cell.s0_reduce:
            p0 = factorized_reduce(
                s0,
                bank[f"{prefix}.pre0.fr_even"],
                bank[f"{prefix}.pre0.fr_odd"],
                normalize,
            )
        else:
            p0 = _maybe_norm(conv1x1(relu(s0), bank[f"{prefix}.pre0.conv"]), normalize)
        log(f"{prefix}.pre0", p0)
        p1 = _maybe_norm(conv1x1(relu(s1), bank[f"{prefix}.pre1.conv"]), normalize)
        log(f"{prefix}.pre1", p1)
        values = [p0, p1]
        for k, node in enumerate(cell.nodes):
            node_id = k + 2
            results = []
            for slot, inp, op in (
                ("a", node.input_a, node.op_a),
                ("b", node.input_b, node.op_b),
            ):
                weights = bank.subbank(f"{prefix}.node{node_id}.{slot}")
                out = apply_op(op, values[inp], weights, cell.width, normalize)
                log(f"{prefix}.node{node_id}.{slot}", out)
                results.append(out)
            summed = results[0] + results[1]
            log(f"{prefix}.node{node_id}.sum", summed)
            values.append(summed)
        out = np.concatenate([values[node_id] for node_id in cell.concat], axis=1)
        log(f"{prefix}.concat", out)
        s0, s1 = s1, out
    features = s1.mean(axis=(2, 3))
    if shape_log is not None:
        shape_log["gap"] = (features.shape[1], 1, 1)
    return features


def linear_forward(
    features: np.ndarray, weight: np.ndarray, bias: np.ndarray
) -> np.ndarray:
    """Affine head: (n, f) @ (f, classes) + (classes,)."""
    if features.ndim != 2 or features.shape[1] != weight.shape[0]:
        raise ShapeMismatch(
            f"features (n, {weight.shape[0]}) required, got {features.shape}"
        )
    if bias.shape != (weight.shape[1],):
        raise ShapeMismatch(f"bias shape {bias.shape} does not match {weight.shape[1]}")
    return features @ weight + bias
