"""Exact multiply-add and parameter counts for decoded plans.

All arithmetic is Python integers, so counts are exact at any scale.
One multiply-add counts as one FLOP.  Conventions:

- dense conv:      out_h * out_w * out_c * in_c * k_h * k_w
- depthwise conv:  out_h * out_w * channels * k * k
- pointwise conv:  out_h * out_w * out_c * in_c
- pool (k x k):    out_h * out_w * channels * k * k
- batch-stat norm: 2 * channels * out_h * out_w
- linear head:     feature_dim * num_classes
- identity, concat, elementwise add, ReLU: 0

Costs of an operator's internal stages (ReLU, depthwise, pointwise,
norm) are merged into a single per-layer entry so layer ids line up
one-to-one with the inference engine's shape log.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from .search_space import (
    CONV_OPS,
    OP_KERNEL,
    NetworkPlan,
    OpCode,
    OpSpec,
)


@dataclass(frozen=True)
class LayerCost:
    layer: str
    flops: int
    params: int
    output_shape: tuple[int, int, int]  # (channels, height, width)


@dataclass(frozen=True)
class ComplexityReport:
    flops: int
    params: int
    per_layer: tuple[LayerCost, ...]

    def as_dict(self) -> dict:
        return {
            "flops": self.flops,
            "params": self.params,
            "per_layer": [
                {
                    "layer": c.layer,
                    "flops": c.flops,
                    "params": c.params,
                    "output_shape": list(c.output_shape),
                }
                for c in self.per_layer
            ],
        }


def _norm_flops(channels: int, h: int, w: int) -> int:
    return 2 * channels * h * w


def _pointwise(out_c: int, in_c: int, h: int, w: int) -> tuple[int, int]:
    # (flops, params) of a 1x1 conv evaluated at out resolution h x w
    return h * w * out_c * in_c, out_c * in_c


def _op_cost(op: OpSpec, width: int, out_hw: tuple[int, int]) -> tuple[int, int]:
    """(flops, params) of one node operator producing width x out_hw."""
    oh, ow = out_hw
    if op.code == OpCode.IDENTITY:
        if op.stride == 1:
            return 0, 0
        # strided identity is realized as two half-width 1x1 convs plus norm
        flops, params = _pointwise(width, width, oh, ow)
        return flops + _norm_flops(width, oh, ow), params
    if op.code in CONV_OPS:
        k = OP_KERNEL[op.code]
        dw_flops = oh * ow * width * k * k
        pw_flops, pw_params = _pointwise(width, width, oh, ow)
        flops = dw_flops + pw_flops + _norm_flops(width, oh, ow)
        params = width * k * k + pw_params
        return flops, params
    # pooling ops, fixed 3x3 window
    return oh * ow * width * 9, 0


def _walk(plan: NetworkPlan) -> Iterator[LayerCost]:
    in_c, h, w = plan.macro.input_shape
    stem_c = plan.stem_channels
    stem_flops = h * w * stem_c * in_c * 9 + _norm_flops(stem_c, h, w)
    yield LayerCost("stem", stem_flops, stem_c * in_c * 9, (stem_c, h, w))
    for cell in plan.cells:
        prefix = f"cell{cell.index}"
        ih, iw = cell.in_hw
        oh, ow = cell.out_hw
        # both preprocessing paths land at the cell working resolution;
        # the factorized-reduce variant splits the same pointwise params
        # into two halves, so counts match the plain variant
        p0_flops, p0_params = _pointwise(cell.width, cell.s0_channels, ih, iw)
        yield LayerCost(
            f"{prefix}.pre0",
            p0_flops + _norm_flops(cell.width, ih, iw),
            p0_params,
            (cell.width, ih, iw),
        )
        p1_flops, p1_params = _pointwise(cell.width, cell.s1_channels, ih, iw)
        yield LayerCost(
            f"{prefix}.pre1",
            p1_flops + _norm_flops(cell.width, ih, iw),
            p1_params,
            (cell.width, ih, iw),
        )
        for k, node in enumerate(cell.nodes):
            node_id = k + 2
            for slot, op in (("a", node.op_a), ("b", node.op_b)):
                flops, params = _op_cost(op, cell.width, (oh, ow))
                yield LayerCost(
                    f"{prefix}.node{node_id}.{slot}", flops, params, (cell.width, oh, ow)
                )
            yield LayerCost(f"{prefix}.node{node_id}.sum", 0, 0, (cell.width, oh, ow))
        yield LayerCost(f"{prefix}.concat", 0, 0, (cell.out_channels, oh, ow))
    fh, fw = plan.out_hw
    yield LayerCost("gap", plan.feature_dim * fh * fw, 0, (plan.feature_dim, 1, 1))
    head_flops = plan.feature_dim * plan.macro.num_classes
    head_params = plan.feature_dim * plan.macro.num_classes + plan.macro.num_classes
    yield LayerCost("head", head_flops, head_params, (plan.macro.num_classes, 1, 1))


def count_flops(plan: NetworkPlan) -> ComplexityReport:
    """Full per-layer cost breakdown plus exact totals."""
    layers = tuple(_walk(plan))
    return ComplexityReport(
        flops=sum(c.flops for c in layers),
        params=sum(c.params for c in layers),
        per_layer=layers,
    )


def count_params(plan: NetworkPlan) -> int:
    """Trainable-parameter count under the same conventions as count_flops."""
    return sum(c.params for c in _walk(plan))
